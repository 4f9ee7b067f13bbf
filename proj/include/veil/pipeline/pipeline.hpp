// End-to-end orchestration: swap the secret's first-frame identity, animate
// the pseudo face with the secret's audio, re-predict the tail of the clip
// once the decision trace says prediction has caught up, then hide the secret
// clip inside the decided cover over wavelet band stacks. Recovery runs the
// exact inverse and refuses to start unless the caller's configuration and
// hide checkpoint match the key stored with the package.
#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "veil/anim/anim.hpp"
#include "veil/decide/decide.hpp"
#include "veil/diffusion/swap.hpp"
#include "veil/inn/coupling.hpp"
#include "veil/nn/checkpoint.hpp"
#include "veil/pipeline/config.hpp"
#include "veil/video/clip.hpp"
#include "veil/video/synth.hpp"
#include "veil/vist/vist.hpp"
#include "veil/wavelet/haar.hpp"

namespace veil::pipeline {

// ====== stages ======

struct PipelineStages {
    diffusion::DenoiserT<float> denoiser;
    anim::AudioEncoderT<float> audio;
    vist::VistModelT<float> predictor;
    inn::CouplingNetT<float> hider;
    nn::ParamsT<float> decide_params;
    decide::FrameClassifierT<float> frame_cls;
    bool use_frame_cls = false;  // set when a decide checkpoint is loaded
};

inline constexpr int kDecideFeatures = 4;

// Fresh nets, deterministic in the config seed. The coupling net starts at
// the identity, the predictor copies its last context frame, so an untrained
// pipeline already satisfies the recovery contract end to end.
inline PipelineStages make_stages(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    diffusion::DenoiserConfig dc;
    dc.channels = cfg.clip.channels;
    dc.base = cfg.swap.base;
    dc.t_steps = cfg.swap.t_diff;
    PipelineStages st{diffusion::make_denoiser<float>(dc, cfg.seed ^ 0xd1fful),
                      anim::make_audio_encoder<float>(cfg.anim, cfg.seed ^ 0xa0d10ul),
                      vist::make_vist_model(cfg.predict, cfg.seed ^ 0x715ful),
                      inn::make_coupling_net<float>(hide_config(cfg), cfg.seed ^ 0x1ddul)};
    st.frame_cls = decide::make_frame_classifier(st.decide_params, "cls", kDecideFeatures, 4);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fresh:%016llx", (unsigned long long)cfg.seed);
    st.hider.checkpoint_id = buf;
    return st;
}

inline std::string file_digest_hex(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for digest: " + path);
    Sha256 ctx;
    char buf[4096];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) ctx.update(buf, size_t(is.gcount()));
    return Sha256::hex(ctx.finish());
}

// Loads whichever stage checkpoints the config names. Every checkpoint is
// bound to the pipeline fingerprint; the hide checkpoint additionally stamps
// its content digest into the stego key.
inline void load_stage_checkpoints(PipelineStages& st, const PipelineConfig& cfg) {
    const auto fp = pipeline_fingerprint(cfg);
    for (const auto& [stage, path] : cfg.checkpoints) {
        if (stage == "swap") {
            nn::load_checkpoint(path, st.denoiser.params, fp);
        } else if (stage == "anim") {
            nn::load_checkpoint(path, st.audio.params, fp);
        } else if (stage == "predict") {
            nn::load_checkpoint(path, st.predictor.params, fp);
        } else if (stage == "decide") {
            nn::load_checkpoint(path, st.decide_params, fp);
            st.use_frame_cls = true;
        } else if (stage == "hide") {
            nn::load_checkpoint(path, st.hider.params, fp);
            st.hider.checkpoint_id = file_digest_hex(path);
        } else {
            throw ValidationError("unknown checkpoint stage: " + stage);
        }
    }
}

// ====== frame agreement ======

// Distance features between a generated frame and its re-prediction; the
// inputs to the consistency classifier head.
inline Tensor agreement_features(const Tensor& generated, const Tensor& predicted) {
    require(generated.shape == predicted.shape, "agreement: frame shapes differ");
    double mse = 0, mae = 0, mx = 0, big = 0;
    for (size_t i = 0; i < generated.data.size(); ++i) {
        const double d = std::abs(double(generated.data[i]) - double(predicted.data[i]));
        mse += d * d;
        mae += d;
        mx = std::max(mx, d);
        big += d > 0.01 ? 1.0 : 0.0;
    }
    const double n = double(generated.data.size());
    Tensor f({1, kDecideFeatures});
    f.data[0] = float(std::log10(mse / n + 1e-12));
    f.data[1] = float(std::log10(mae / n + 1e-12));
    f.data[2] = float(mx);
    f.data[3] = float(big / n);
    return f;
}

// Analytic agreement distribution: softmax over the distance from log10-MSE
// to each bin center. For uniformly log-spaced edges (the default) the argmax
// equals the hard agreement bin.
inline std::vector<double> consistency_probs(const Tensor& generated, const Tensor& predicted,
                                             const std::array<double, 3>& edges) {
    require(generated.shape == predicted.shape, "agreement: frame shapes differ");
    require(edges[0] > 0 && edges[0] < edges[1] && edges[1] < edges[2],
            "agreement: edges must be positive and increasing");
    const double l0 = std::log10(edges[0]), l1 = std::log10(edges[1]), l2 = std::log10(edges[2]);
    const double centers[4] = {l0 - 0.5 * (l1 - l0), 0.5 * (l0 + l1), 0.5 * (l1 + l2),
                               l2 + 0.5 * (l2 - l1)};
    const double x = std::log10(eval::mse(generated, predicted) + 1e-12);

    std::vector<double> p(4);
    double zmax = -1e300;
    for (int k = 0; k < 4; ++k) {
        p[size_t(k)] = -std::abs(x - centers[k]) / 0.25;
        zmax = std::max(zmax, p[size_t(k)]);
    }
    double sum = 0;
    for (auto& v : p) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

// Classifier-head agreement distribution, used once a decide checkpoint is
// loaded.
inline std::vector<double> consistency_probs_model(const PipelineStages& st,
                                                   const Tensor& generated,
                                                   const Tensor& predicted) {
    auto probs = decide::classify_nodes(st.frame_cls, constant(agreement_features(generated,
                                                                                  predicted)));
    std::vector<double> p(size_t(st.frame_cls.classes));
    for (size_t k = 0; k < p.size(); ++k) p[k] = double(probs->val.data[k]);
    return p;
}

// ====== decision rollout ======

struct DecisionRollout {
    decide::DecisionTrace trace;
    int handover_frame = 0;  // x_i in 1..T; frames beyond it come from the predictor
};

// Margins over the prediction horizon, labels against the final margin, and
// the handover frame. Exit probabilities are the soft echo exp(-gap / mu) of
// the label rule, recorded so traces carry a complete per-step record.
inline DecisionRollout decide_handover(const video::VideoClip& generated,
                                       const video::VideoClip& predicted,
                                       const PipelineConfig& cfg, const PipelineStages& st) {
    const int t_in = cfg.predict.t_in, t_out = cfg.predict.t_out;
    require(generated.T() == cfg.clip.frames, "decide: generated clip length mismatch");
    require(predicted.T() == t_out, "decide: predicted clip length mismatch");

    std::vector<double> deltas, exits, pred_losses;
    for (int s = 0; s < t_out; ++s) {
        const auto& gen = generated.frames[size_t(t_in + s)];
        const auto& pred = predicted.frames[size_t(s)];
        auto probs = st.use_frame_cls ? consistency_probs_model(st, gen, pred)
                                      : consistency_probs(gen, pred, cfg.decide.agreement_edges);
        deltas.push_back(decide::margin(probs));
        std::vector<double> onehot(probs.size(), 0.0);
        onehot[size_t(std::max_element(probs.begin(), probs.end()) - probs.begin())] = 1.0;
        pred_losses.push_back(decide::prediction_loss(onehot, probs));
    }
    for (int s = 0; s < t_out; ++s)
        exits.push_back(std::exp(-std::abs(deltas.back() - deltas[size_t(s)]) /
                                 cfg.decide.mu_threshold));

    DecisionRollout out;
    out.trace = decide::make_decision_trace(deltas, exits, pred_losses, cfg.decide.mu_threshold,
                                            cfg.decide.lambda_ce);
    out.handover_frame = t_in + out.trace.handover;
    return out;
}

// ====== stego packages ======

struct StegoKey {
    std::array<uint8_t, 32> config_hash{};
    std::string checkpoint_id;
    int group_size = 8;
    inn::ResidualMode residual = inn::ResidualMode::attach;
};

struct StegoPackage {
    StegoKey key;
    int frames = 0, channels = 0, height = 0, width = 0;
    double fps = 25.0;
    std::vector<Tensor> stego_stacks;     // per group: [4*G*C, H/2, W/2]
    std::vector<Tensor> residual_stacks;  // empty in discard mode
};

// Hides the secret clip in the cover clip group by group. Both clips must
// match the configured geometry; the cover is whatever the caller decided on,
// generated or supplied directly.
inline StegoPackage hide_in_cover(const video::VideoClip& cover, const video::VideoClip& secret,
                                  const PipelineConfig& cfg, const PipelineStages& st) {
    validate_pipeline_config(cfg);
    video::validate_clip(cover);
    video::validate_clip(secret);
    require(cover.T() == secret.T(), "hide: cover and secret frame counts differ");
    require(secret.T() == cfg.clip.frames && secret.C() == cfg.clip.channels &&
                secret.H() == cfg.clip.height && secret.W() == cfg.clip.width,
            "hide: clip does not match the configured geometry");

    const int G = cfg.hide.group_size;
    StegoPackage pkg;
    pkg.key = {pipeline_fingerprint(cfg), st.hider.checkpoint_id, G, cfg.hide.residual};
    pkg.frames = secret.T();
    pkg.channels = secret.C();
    pkg.height = secret.H();
    pkg.width = secret.W();
    pkg.fps = secret.fps;

    for (int g = 0; g < secret.T() / G; ++g) {
        std::vector<Tensor> cg(cover.frames.begin() + g * G, cover.frames.begin() + (g + 1) * G);
        std::vector<Tensor> sg(secret.frames.begin() + g * G,
                               secret.frames.begin() + (g + 1) * G);
        auto [stego, residual] =
            inn::hide_forward(st.hider, wavelet::band_pack(cg), wavelet::band_pack(sg));
        pkg.stego_stacks.push_back(std::move(stego));
        if (cfg.hide.residual == inn::ResidualMode::attach)
            pkg.residual_stacks.push_back(std::move(residual));
    }
    return pkg;
}

// The stego stacks rendered back to a viewable clip. Lossy (clamped to pixel
// range); recovery always runs on the stacks themselves.
inline video::VideoClip stego_preview(const StegoPackage& pkg) {
    video::VideoClip out;
    out.fps = pkg.fps;
    for (const auto& stack : pkg.stego_stacks)
        for (auto& f : wavelet::band_unpack(stack, pkg.key.group_size, pkg.channels)) {
            for (auto& v : f.data) v = std::clamp(v, 0.0f, 1.0f);
            out.frames.push_back(std::move(f));
        }
    return out;
}

// ====== run and recover ======

struct PipelineArtifacts {
    video::Frame swapped;       // pseudo-identity first frame
    video::VideoClip generated; // full animated rollout
    video::VideoClip predicted; // re-predicted horizon
    video::VideoClip cover;     // decided cover clip
    decide::DecisionTrace trace;
    int handover_frame = 0;
};

// Soft elliptical face region used as the rigid swap mask.
inline Tensor face_region_mask(int H, int W) {
    Tensor U({H, W});
    const double cy = 0.5 * H, cx = 0.5 * W, ry = 0.36 * H, rx = 0.28 * W;
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            const double e = (h - cy) * (h - cy) / (ry * ry) + (w - cx) * (w - cx) / (rx * rx);
            U.data[size_t(h) * size_t(W) + size_t(w)] = e <= 1.0 ? 1.0f : 0.0f;
        }
    return U;
}

inline StegoPackage run_pipeline(const video::VideoClip& secret, const video::Frame& target_face,
                                 const PipelineConfig& cfg, const PipelineStages& st,
                                 PipelineArtifacts* artifacts = nullptr) {
    validate_pipeline_config(cfg);
    video::validate_clip(secret);
    require(secret.T() == cfg.clip.frames && secret.C() == cfg.clip.channels &&
                secret.H() == cfg.clip.height && secret.W() == cfg.clip.width,
            "run: secret clip does not match the configured geometry");
    require(target_face.shape == secret.frames[0].shape,
            "run: target face must match the frame geometry");

    // Pseudo identity for the first frame.
    const auto sched = diffusion::linear_schedule(cfg.swap.t_diff);
    const auto ms = diffusion::make_mask_schedule(face_region_mask(cfg.clip.height,
                                                                   cfg.clip.width),
                                                  cfg.swap.t_diff, cfg.swap.t_hat);
    video::Frame swapped = diffusion::swap_face(st.denoiser, target_face, secret.frames[0],
                                                sched, ms, cfg.seed ^ 0x5fa1ul);
    for (auto& v : swapped.data) v = std::clamp(v, 0.0f, 1.0f);

    // Audio-driven rollout of the pseudo face.
    Tensor audio = secret.audio;
    if (audio.numel() == 0) audio = Tensor({cfg.clip.frames, cfg.anim.n_mel});
    require(audio.ndim() == 2 && audio.dim(0) == cfg.clip.frames,
            "run: audio must hold one feature row per frame");
    video::SyntheticFaceParams p0;
    auto state = anim::sample_motion(st.audio, audio, Tensor({cfg.anim.d_expr}),
                                     Tensor({cfg.anim.shape_dim}), Tensor({2}), 0.0f,
                                     cfg.seed ^ 0xa21ul);
    video::VideoClip generated = anim::render_initial_cover(swapped, p0, state, secret.fps);

    // Re-prediction of the horizon from the generated context.
    video::VideoClip context;
    context.fps = secret.fps;
    context.frames.assign(generated.frames.begin(),
                          generated.frames.begin() + cfg.predict.t_in);
    video::VideoClip predicted = vist::predict(context, cfg.predict.t_out, st.predictor);

    // Handover: generation up to x_i, prediction after.
    auto rollout = decide_handover(generated, predicted, cfg, st);
    video::VideoClip cover;
    cover.fps = secret.fps;
    cover.audio = secret.audio;
    for (int k = 1; k <= cfg.clip.frames; ++k)
        cover.frames.push_back(
            decide::handover(k, rollout.handover_frame) == decide::Route::generation
                ? generated.frames[size_t(k - 1)]
                : predicted.frames[size_t(k - 1 - cfg.predict.t_in)]);

    if (artifacts) {
        artifacts->swapped = swapped;
        artifacts->generated = generated;
        artifacts->predicted = predicted;
        artifacts->cover = cover;
        artifacts->trace = rollout.trace;
        artifacts->handover_frame = rollout.handover_frame;
    }
    return hide_in_cover(cover, secret, cfg, st);
}

// Recovery refuses on any key disagreement before touching the stacks.
inline video::VideoClip recover_pipeline(const StegoPackage& pkg, const PipelineConfig& cfg,
                                         const PipelineStages& st) {
    validate_pipeline_config(cfg);
    if (pipeline_fingerprint(cfg) != pkg.key.config_hash)
        throw KeyMismatchError("recover: configuration digest does not match the package key");
    if (st.hider.checkpoint_id != pkg.key.checkpoint_id)
        throw KeyMismatchError("recover: hide checkpoint does not match the package key");
    require(pkg.key.group_size == cfg.hide.group_size && pkg.key.residual == cfg.hide.residual,
            "recover: package layout disagrees with the configuration");
    const int G = pkg.key.group_size;
    require(pkg.frames >= 1 && pkg.frames % G == 0 &&
                int(pkg.stego_stacks.size()) == pkg.frames / G,
            "recover: package stack count does not match its frame count");
    if (pkg.key.residual == inn::ResidualMode::attach)
        require(pkg.residual_stacks.size() == pkg.stego_stacks.size(),
                "recover: residual payload is incomplete");

    video::VideoClip out;
    out.fps = pkg.fps;
    for (size_t g = 0; g < pkg.stego_stacks.size(); ++g) {
        std::optional<Tensor> payload;
        if (pkg.key.residual == inn::ResidualMode::attach) payload = pkg.residual_stacks[g];
        Tensor residual = inn::residual_for_recovery(payload, pkg.stego_stacks[g].shape);
        auto [secret_stack, cover_stack] =
            inn::recover_backward(st.hider, pkg.stego_stacks[g], residual);
        (void)cover_stack;
        for (auto& f : wavelet::band_unpack(secret_stack, G, pkg.channels)) {
            for (auto& v : f.data) v = std::clamp(v, 0.0f, 1.0f);
            out.frames.push_back(std::move(f));
        }
    }
    return out;
}

// ====== package files ======

// Directory layout: key.json next to raw float32 stack files. Stacks are
// bit-exact on disk, so attach-mode recovery from a loaded package matches
// in-memory recovery.
inline constexpr char kStackMagic[4] = {'C', 'V', 'E', 'S'};

namespace detail {

inline void save_stacks(const std::vector<Tensor>& stacks, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("package: cannot open for write: " + path);
    os.write(kStackMagic, 4);
    nn::detail::put_u32(os, uint32_t(stacks.size()));
    for (const auto& t : stacks) {
        nn::detail::put_u32(os, uint32_t(t.shape.size()));
        for (int d : t.shape) nn::detail::put_u32(os, uint32_t(d));
        for (float v : t.data) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            nn::detail::put_u32(os, bits);
        }
    }
    if (!os) throw IoError("package: write failed: " + path);
}

inline std::vector<Tensor> load_stacks(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("package: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kStackMagic, 4) != 0)
        throw FormatError("package: bad stack magic in " + path);
    const uint32_t count = nn::detail::get_u32(is);
    if (count > 1u << 20) throw FormatError("package: implausible stack count");
    std::vector<Tensor> stacks;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t ndim = nn::detail::get_u32(is);
        if (ndim > 8) throw FormatError("package: implausible stack rank");
        std::vector<int> shape(ndim);
        for (auto& d : shape) {
            d = int(nn::detail::get_u32(is));
            if (d <= 0 || d > 1 << 20) throw FormatError("package: implausible stack dim");
        }
        Tensor t(shape);
        for (auto& v : t.data) {
            const uint32_t bits = nn::detail::get_u32(is);
            std::memcpy(&v, &bits, 4);
        }
        stacks.push_back(std::move(t));
    }
    return stacks;
}

inline std::array<uint8_t, 32> hash_from_hex(const std::string& hex) {
    if (hex.size() != 64) throw FormatError("package: config hash must be 64 hex digits");
    std::array<uint8_t, 32> out{};
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        throw FormatError("package: config hash must be lowercase hex");
    };
    for (size_t i = 0; i < 32; ++i)
        out[i] = uint8_t(nib(hex[2 * i]) << 4 | nib(hex[2 * i + 1]));
    return out;
}

}  // namespace detail

inline void save_package(const StegoPackage& pkg, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["format"] = "veil-stego-1";
    j["config_hash"] = Sha256::hex(pkg.key.config_hash);
    j["checkpoint"] = pkg.key.checkpoint_id;
    j["group_size"] = pkg.key.group_size;
    j["residual_mode"] = inn::residual_mode_name(pkg.key.residual);
    j["frames"] = pkg.frames;
    j["channels"] = pkg.channels;
    j["height"] = pkg.height;
    j["width"] = pkg.width;
    j["fps"] = pkg.fps;
    std::ofstream os(dir + "/key.json");
    if (!os) throw IoError("package: cannot write key file in " + dir);
    os << j.dump(2) << "\n";
    detail::save_stacks(pkg.stego_stacks, dir + "/stego.bin");
    if (pkg.key.residual == inn::ResidualMode::attach)
        detail::save_stacks(pkg.residual_stacks, dir + "/residual.bin");
}

inline StegoPackage load_package(const std::string& dir) {
    std::ifstream is(dir + "/key.json");
    if (!is) throw IoError("package: cannot open key file in " + dir);
    nlohmann::json j;
    try {
        is >> j;
        StegoPackage pkg;
        if (j.at("format").get<std::string>() != "veil-stego-1")
            throw FormatError("package: unknown format tag");
        pkg.key.config_hash = detail::hash_from_hex(j.at("config_hash").get<std::string>());
        pkg.key.checkpoint_id = j.at("checkpoint").get<std::string>();
        pkg.key.group_size = j.at("group_size").get<int>();
        pkg.key.residual = inn::residual_mode_from_name(j.at("residual_mode").get<std::string>());
        pkg.frames = j.at("frames").get<int>();
        pkg.channels = j.at("channels").get<int>();
        pkg.height = j.at("height").get<int>();
        pkg.width = j.at("width").get<int>();
        pkg.fps = j.at("fps").get<double>();

        pkg.stego_stacks = detail::load_stacks(dir + "/stego.bin");
        if (pkg.key.residual == inn::ResidualMode::attach)
            pkg.residual_stacks = detail::load_stacks(dir + "/residual.bin");

        require(pkg.key.group_size >= 1 && pkg.frames >= 1 &&
                    pkg.frames % pkg.key.group_size == 0,
                "package: frame count does not divide into groups");
        const std::vector<int> want{4 * pkg.key.group_size * pkg.channels, pkg.height / 2,
                                    pkg.width / 2};
        require(int(pkg.stego_stacks.size()) == pkg.frames / pkg.key.group_size,
                "package: stack count does not match the frame count");
        for (const auto& t : pkg.stego_stacks)
            if (t.shape != want) throw FormatError("package: stego stack shape mismatch");
        for (const auto& t : pkg.residual_stacks)
            if (t.shape != want) throw FormatError("package: residual stack shape mismatch");
        return pkg;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("package: ") + e.what());
    }
}

}  // namespace veil::pipeline
