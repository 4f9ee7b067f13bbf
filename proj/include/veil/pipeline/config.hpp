// Pipeline configuration: every stage's hyperparameters in one serializable
// struct, the learning-rate schedule, and a stable digest over the
// architecture fields. The digest keys stego packages and stage checkpoints,
// so two parties can exchange artifacts iff their configurations agree.
#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "veil/anim/anim.hpp"
#include "veil/common.hpp"
#include "veil/inn/coupling.hpp"
#include "veil/sha256.hpp"
#include "veil/vist/vist.hpp"

namespace veil::pipeline {

// ====== settings ======

struct SwapSettings {
    int base = 8;     // denoiser width at full resolution
    int t_diff = 100; // reverse-chain length
    int t_hat = 50;   // mask ramp length
};

struct DecideSettings {
    double mu_threshold = 0.05;
    double lambda_ce = 3.0;
    std::array<double, 3> agreement_edges{1e-4, 1e-3, 1e-2};  // per-frame MSE bins
};

struct HideSettings {
    int group_size = 8;   // frames per band stack
    int hidden = 8;       // growth channels in the coupling subnets
    int blocks = 4;       // coupling depth
    double clamp_c = 2.0;
    inn::ResidualMode residual = inn::ResidualMode::attach;
    double lambda_b = 2.0;              // recovery weight in the hiding loss
    std::string cf_window = "triangular";  // or "center"
};

struct ClipSettings {
    int channels = 1;
    int height = 32;
    int width = 32;
    int frames = 8;
    double fps = 25.0;
};

struct TrainSettings {
    int steps = 500;
    double lr0 = 1e-3;          // paper-scale schedule: 1e-5 halved every 25k
    int halve_interval = 25000;
    int dataset_clips = 8;
    int log_every = 50;
    uint64_t seed = 1;
};

struct PipelineConfig {
    SwapSettings swap;
    anim::AnimConfig anim;
    vist::VistConfig predict{.in_channels = 1, .base_channels = 8, .n_layers = 1,
                             .heads = 2,       .window = {2, 4, 4}, .shift = {1, 2, 2},
                             .blocks = 1,      .t_in = 4,           .t_out = 4};
    DecideSettings decide;
    HideSettings hide;
    ClipSettings clip;
    TrainSettings train;
    uint64_t seed = 0x5eed;

    // Local-machine fields; never part of the fingerprint.
    std::string data_root;
    std::map<std::string, std::string> checkpoints;  // stage name -> path
};

// Coupling width follows the band-stack layout: four bands per frame group.
inline inn::CouplingConfig hide_config(const PipelineConfig& c) {
    inn::CouplingConfig k;
    k.channels = 4 * c.hide.group_size * c.clip.channels;
    k.hidden = c.hide.hidden;
    k.blocks = c.hide.blocks;
    k.clamp_c = c.hide.clamp_c;
    return k;
}

inline std::vector<double> cf_weights_for(const PipelineConfig& c) {
    if (c.hide.cf_window == "center") return inn::center_weights(c.hide.group_size);
    if (c.hide.cf_window == "triangular") return inn::triangular_weights(c.hide.group_size);
    throw ValidationError("config: unknown frame window: " + c.hide.cf_window);
}

inline void validate_pipeline_config(const PipelineConfig& c) {
    require(c.clip.channels == 1 || c.clip.channels == 3, "config: channels must be 1 or 3");
    require(c.clip.height >= 4 && c.clip.width >= 4, "config: frame too small");
    require(c.clip.height % 4 == 0 && c.clip.width % 4 == 0,
            "config: frame dims must divide by 4");
    require(c.clip.frames >= 1, "config: empty clip");
    require(c.clip.fps > 0, "config: fps must be positive");
    require(c.swap.t_diff >= 1, "config: diffusion needs at least one step");
    require(1 <= c.swap.t_hat && c.swap.t_hat <= c.swap.t_diff,
            "config: mask ramp must fit the chain");
    require(c.swap.base >= 1, "config: denoiser width must be positive");
    require(c.predict.in_channels == c.clip.channels,
            "config: predictor channels must match the clip");
    require(c.predict.t_in + c.predict.t_out == c.clip.frames,
            "config: predictor context plus horizon must equal the clip length");
    vist::validate_config(c.predict);
    require(c.decide.mu_threshold > 0, "config: exit threshold must be positive");
    require(c.decide.lambda_ce >= 0, "config: margin weight must be nonnegative");
    require(c.decide.agreement_edges[0] > 0 &&
                c.decide.agreement_edges[0] < c.decide.agreement_edges[1] &&
                c.decide.agreement_edges[1] < c.decide.agreement_edges[2],
            "config: agreement edges must be positive and increasing");
    require(c.hide.group_size >= 1, "config: empty frame group");
    require(c.clip.frames % c.hide.group_size == 0,
            "config: frame group must divide the clip length");
    require(c.hide.hidden >= 1 && c.hide.blocks >= 1, "config: bad coupling shape");
    require(c.hide.lambda_b >= 0, "config: recovery weight must be nonnegative");
    cf_weights_for(c);
    require(c.train.steps >= 1 && c.train.halve_interval >= 1 && c.train.dataset_clips >= 1 &&
                c.train.log_every >= 1,
            "config: bad training settings");
    require(c.train.lr0 > 0, "config: learning rate must be positive");
}

// ====== learning-rate schedule ======

// lr_k = lr0 * 2^-(k / interval) with integer division, k zero-based. Binary
// scaling keeps every halving exact in floating point.
inline double lr_at(double lr0, int halve_interval, int step) {
    require(step >= 0, "lr_at: negative step");
    require(halve_interval >= 1, "lr_at: halving interval must be positive");
    return std::ldexp(lr0, -(step / halve_interval));
}

inline double lr_at(const TrainSettings& t, int step) {
    return lr_at(t.lr0, t.halve_interval, step);
}

// ====== serialization ======

inline nlohmann::json config_to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["swap"] = {{"base", c.swap.base}, {"t_diff", c.swap.t_diff}, {"t_hat", c.swap.t_hat}};
    j["anim"] = {{"n_mel", c.anim.n_mel},           {"d_latent", c.anim.d_latent},
                 {"groups", c.anim.groups},         {"psi_blocks", c.anim.psi_blocks},
                 {"theta_blocks", c.anim.theta_blocks}, {"d_expr", c.anim.d_expr},
                 {"d_cond", c.anim.d_cond},         {"shape_dim", c.anim.shape_dim}};
    j["predict"] = {{"in_channels", c.predict.in_channels},
                    {"base_channels", c.predict.base_channels},
                    {"n_layers", c.predict.n_layers},
                    {"heads", c.predict.heads},
                    {"window", c.predict.window},
                    {"shift", c.predict.shift},
                    {"blocks", c.predict.blocks},
                    {"t_in", c.predict.t_in},
                    {"t_out", c.predict.t_out}};
    j["decide"] = {{"mu_threshold", c.decide.mu_threshold},
                   {"lambda_ce", c.decide.lambda_ce},
                   {"agreement_edges", c.decide.agreement_edges}};
    j["hide"] = {{"group_size", c.hide.group_size},
                 {"hidden", c.hide.hidden},
                 {"blocks", c.hide.blocks},
                 {"clamp", c.hide.clamp_c},
                 {"residual", inn::residual_mode_name(c.hide.residual)},
                 {"lambda_b", c.hide.lambda_b},
                 {"cf_window", c.hide.cf_window}};
    j["clip"] = {{"channels", c.clip.channels},
                 {"height", c.clip.height},
                 {"width", c.clip.width},
                 {"frames", c.clip.frames},
                 {"fps", c.clip.fps}};
    j["train"] = {{"steps", c.train.steps},
                  {"lr0", c.train.lr0},
                  {"halve_interval", c.train.halve_interval},
                  {"dataset_clips", c.train.dataset_clips},
                  {"log_every", c.train.log_every},
                  {"seed", c.train.seed}};
    j["seed"] = c.seed;
    if (!c.data_root.empty()) j["data_root"] = c.data_root;
    if (!c.checkpoints.empty()) j["checkpoints"] = c.checkpoints;
    return j;
}

// Missing keys keep their defaults, so a partial config file is legal.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("config: top level must be an object");
    PipelineConfig c;
    try {
        if (j.contains("swap")) {
            const auto& s = j.at("swap");
            c.swap.base = s.value("base", c.swap.base);
            c.swap.t_diff = s.value("t_diff", c.swap.t_diff);
            c.swap.t_hat = s.value("t_hat", c.swap.t_hat);
        }
        if (j.contains("anim")) {
            const auto& a = j.at("anim");
            c.anim.n_mel = a.value("n_mel", c.anim.n_mel);
            c.anim.d_latent = a.value("d_latent", c.anim.d_latent);
            c.anim.groups = a.value("groups", c.anim.groups);
            c.anim.psi_blocks = a.value("psi_blocks", c.anim.psi_blocks);
            c.anim.theta_blocks = a.value("theta_blocks", c.anim.theta_blocks);
            c.anim.d_expr = a.value("d_expr", c.anim.d_expr);
            c.anim.d_cond = a.value("d_cond", c.anim.d_cond);
            c.anim.shape_dim = a.value("shape_dim", c.anim.shape_dim);
        }
        if (j.contains("predict")) {
            const auto& p = j.at("predict");
            c.predict.in_channels = p.value("in_channels", c.predict.in_channels);
            c.predict.base_channels = p.value("base_channels", c.predict.base_channels);
            c.predict.n_layers = p.value("n_layers", c.predict.n_layers);
            c.predict.heads = p.value("heads", c.predict.heads);
            c.predict.window = p.value("window", c.predict.window);
            c.predict.shift = p.value("shift", c.predict.shift);
            c.predict.blocks = p.value("blocks", c.predict.blocks);
            c.predict.t_in = p.value("t_in", c.predict.t_in);
            c.predict.t_out = p.value("t_out", c.predict.t_out);
        }
        if (j.contains("decide")) {
            const auto& d = j.at("decide");
            c.decide.mu_threshold = d.value("mu_threshold", c.decide.mu_threshold);
            c.decide.lambda_ce = d.value("lambda_ce", c.decide.lambda_ce);
            c.decide.agreement_edges = d.value("agreement_edges", c.decide.agreement_edges);
        }
        if (j.contains("hide")) {
            const auto& h = j.at("hide");
            c.hide.group_size = h.value("group_size", c.hide.group_size);
            c.hide.hidden = h.value("hidden", c.hide.hidden);
            c.hide.blocks = h.value("blocks", c.hide.blocks);
            c.hide.clamp_c = h.value("clamp", c.hide.clamp_c);
            if (h.contains("residual"))
                c.hide.residual = inn::residual_mode_from_name(h.at("residual").get<std::string>());
            c.hide.lambda_b = h.value("lambda_b", c.hide.lambda_b);
            c.hide.cf_window = h.value("cf_window", c.hide.cf_window);
        }
        if (j.contains("clip")) {
            const auto& k = j.at("clip");
            c.clip.channels = k.value("channels", c.clip.channels);
            c.clip.height = k.value("height", c.clip.height);
            c.clip.width = k.value("width", c.clip.width);
            c.clip.frames = k.value("frames", c.clip.frames);
            c.clip.fps = k.value("fps", c.clip.fps);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            c.train.steps = t.value("steps", c.train.steps);
            c.train.lr0 = t.value("lr0", c.train.lr0);
            c.train.halve_interval = t.value("halve_interval", c.train.halve_interval);
            c.train.dataset_clips = t.value("dataset_clips", c.train.dataset_clips);
            c.train.log_every = t.value("log_every", c.train.log_every);
            c.train.seed = t.value("seed", c.train.seed);
        }
        c.seed = j.value("seed", c.seed);
        c.data_root = j.value("data_root", c.data_root);
        if (j.contains("checkpoints"))
            c.checkpoints = j.at("checkpoints").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return c;
}

inline std::string config_to_text(const PipelineConfig& c) {
    return config_to_json(c).dump(2) + "\n";
}

inline PipelineConfig config_from_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

inline void save_config(const PipelineConfig& c, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("config: cannot open for write: " + path);
    os << config_to_text(c);
    if (!os) throw IoError("config: write failed: " + path);
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return config_from_text(ss.str());
}

// ====== fingerprint ======

// Digest over the architecture and seed only. Training schedule, local paths,
// and checkpoint locations do not change what a key holder must agree on, so
// they stay out of the hash.
inline std::array<uint8_t, 32> pipeline_fingerprint(const PipelineConfig& c) {
    nlohmann::json j = config_to_json(c);
    j.erase("train");
    j.erase("data_root");
    j.erase("checkpoints");
    return Sha256::digest(j.dump());
}

inline std::string pipeline_fingerprint_hex(const PipelineConfig& c) {
    return Sha256::hex(pipeline_fingerprint(c));
}

}  // namespace veil::pipeline
