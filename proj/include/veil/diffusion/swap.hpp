// Toy denoising-diffusion face swapper. A small conditional U-net predicts
// noise; the reverse chain runs two pathways per step, one unconditioned
// (target reconstruction) and one conditioned on the source identity
// embedding, and blends them under a time-ramped rigid mask. The result is
// the first cover frame for the rest of the pipeline.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "veil/common.hpp"
#include "veil/nn/layers.hpp"
#include "veil/tensor.hpp"

namespace veil::diffusion {

using namespace veil::nn;

// ====== noise schedule ======

struct NoiseSchedule {
    std::vector<double> betas;      // beta_t, t = 1..T
    std::vector<double> alpha_bar;  // cumulative product of (1 - beta)

    int steps() const { return int(betas.size()); }
};

// Validated schedule; an all-zero schedule is legal and freezes the chain.
inline NoiseSchedule make_noise_schedule(std::vector<double> betas) {
    require(!betas.empty(), "noise schedule: empty");
    double prev = 0;
    for (double b : betas) {
        require(b >= 0.0 && b < 1.0, "noise schedule: beta out of [0,1)");
        require(b >= prev, "noise schedule: betas must be nondecreasing");
        prev = b;
    }
    NoiseSchedule s;
    s.betas = std::move(betas);
    double ab = 1.0;
    for (double b : s.betas) {
        ab *= 1.0 - b;
        s.alpha_bar.push_back(ab);
    }
    return s;
}

inline NoiseSchedule linear_schedule(int T, double lo = 1e-4, double hi = 2e-2) {
    require(T >= 1, "noise schedule: need at least one step");
    std::vector<double> b(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t)
        b[static_cast<size_t>(t)] = T == 1 ? lo : lo + (hi - lo) * t / double(T - 1);
    return make_noise_schedule(std::move(b));
}

// ====== forward and reverse steps ======

// Closed-form jump to step t: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
template <class T>
TensorT<T> q_sample(const TensorT<T>& x0, int t, const TensorT<T>& noise,
                    const NoiseSchedule& sched) {
    require(1 <= t && t <= sched.steps(), "q_sample: step out of range");
    require(noise.shape == x0.shape, "q_sample: noise shape mismatch");
    const double ab = sched.alpha_bar[static_cast<size_t>(t - 1)];
    const T ca = T(std::sqrt(ab)), cn = T(std::sqrt(1.0 - ab));
    TensorT<T> out(x0.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = ca * x0.data[i] + cn * noise.data[i];
    return out;
}

// One reverse step in the standard noise-prediction parameterization:
//   mean  = (x_t - beta_t / sqrt(1 - abar_t) * eps) / sqrt(1 - beta_t)
//   var   = (1 - abar_{t-1}) / (1 - abar_t) * beta_t   (posterior variance)
// z is the sampling noise; pass nullptr (or zeros) for a deterministic step.
template <class T>
TensorT<T> p_step(const TensorT<T>& x_t, int t, const TensorT<T>& eps, const NoiseSchedule& sched,
                  const TensorT<T>* z = nullptr) {
    require(1 <= t && t <= sched.steps(), "p_step: step out of range");
    require(eps.shape == x_t.shape, "p_step: noise prediction shape mismatch");
    for (const T v : eps.data)
        if (!std::isfinite(double(v)))
            throw NumericError("p_step: non-finite denoiser output at step " + std::to_string(t));
    const double beta = sched.betas[static_cast<size_t>(t - 1)];
    const double ab = sched.alpha_bar[static_cast<size_t>(t - 1)];
    const double ab_prev = t > 1 ? sched.alpha_bar[static_cast<size_t>(t - 2)] : 1.0;
    const double coef = beta > 0 ? beta / std::sqrt(1.0 - ab) : 0.0;
    const double inv_sa = 1.0 / std::sqrt(1.0 - beta);
    const double sigma = beta > 0 ? std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta) : 0.0;
    TensorT<T> out(x_t.shape);
    for (int64_t i = 0; i < out.numel(); ++i) {
        double v = (double(x_t.data[i]) - coef * double(eps.data[i])) * inv_sa;
        if (z) v += sigma * double(z->data[i]);
        out.data[i] = T(v);
    }
    return out;
}

// ====== mask schedule ======

// Rigid swap-region mask ramped in over the reverse chain: zero influence at
// t = T, full mask once t drops below T - T_hat.
struct MaskSchedule {
    TensorT<float> U;  // [1,H,W] or [H,W], entries in [0,1]
    int T_diff = 100;
    int T_hat = 50;
};

inline MaskSchedule make_mask_schedule(TensorT<float> U, int T_diff, int T_hat) {
    require(U.ndim() == 2 || (U.ndim() == 3 && U.dim(0) == 1),
            "mask schedule: mask must be [H,W] or [1,H,W]");
    for (float v : U.data) require(v >= 0.0f && v <= 1.0f, "mask schedule: mask outside [0,1]");
    require(T_diff >= 1, "mask schedule: bad step count");
    if (T_hat <= 0) throw ValidationError("mask schedule: ramp length must be positive");
    MaskSchedule ms;
    ms.U = std::move(U);
    ms.T_diff = T_diff;
    ms.T_hat = T_hat;
    return ms;
}

// U_t = min(1, (T - t) / T_hat * U), elementwise.
inline TensorT<float> mask_at(const MaskSchedule& ms, int t) {
    if (ms.T_hat <= 0) throw ValidationError("mask_at: ramp length must be positive");
    require(0 <= t && t <= ms.T_diff, "mask_at: step out of range");
    const float ramp = float(ms.T_diff - t) / float(ms.T_hat);
    TensorT<float> out(ms.U.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data[i] = std::min(1.0f, ramp * ms.U.data[i]);
    return out;
}

// x_hat = (1 - U_t) * phi + U_t * lambda, with the pathways evaluated here so
// the caller passes predictions-as-functions rather than tensors.
template <class T>
TensorT<T> blended_step(const TensorT<T>& x_t, int t,
                        const std::function<TensorT<T>(const TensorT<T>&, int)>& phi_path,
                        const std::function<TensorT<T>(const TensorT<T>&, int)>& lambda_path,
                        const MaskSchedule& ms) {
    const TensorT<T> phi = phi_path(x_t, t);
    const TensorT<T> lam = lambda_path(x_t, t);
    require(phi.shape == x_t.shape && lam.shape == x_t.shape,
            "blended_step: pathway output shape mismatch");
    const TensorT<float> u = mask_at(ms, t);
    const int C = x_t.dim(0), H = x_t.dim(1), W = x_t.dim(2);
    require(int(u.numel()) == H * W, "blended_step: mask size does not match the frame");
    TensorT<T> out(x_t.shape);
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const T m = T(u.data[static_cast<size_t>(h) * W + w]);
                out.at3(c, h, w) = (T(1) - m) * phi.at3(c, h, w) + m * lam.at3(c, h, w);
            }
    return out;
}

// ====== identity embedder ======

// Stand-in for a face recognizer: gray 8x8 average-pool, flattened and
// L2-normalized. Coarse, but enough to tell synthetic identities apart.
constexpr int kEmbedDim = 64;

template <class T>
NodePtrT<T> embed_nodes(const NodePtrT<T>& frame) {
    require(frame->val.ndim() == 3, "embed: frame must be [C,H,W]");
    const int C = frame->val.dim(0), H = frame->val.dim(1), W = frame->val.dim(2);
    require(H % 8 == 0 && W % 8 == 0, "embed: frame dims must divide by 8");
    NodePtrT<T> gray = frame;
    if (C > 1) {
        gray = slice_dim0(frame, 0, 1);
        for (int c = 1; c < C; ++c) gray = add(gray, slice_dim0(frame, c, c + 1));
        gray = scale(gray, T(1) / T(C));
    }
    auto pooled = reshape(avgpool2d(gray, H / 8, W / 8), {kEmbedDim});
    auto nrm2 = sum_all(square(pooled));
    // Flat-zero frames pool to zero; rsqrt gets a floor so the output stays
    // finite, and the unit-norm fallback below takes over.
    auto safe = clamp(nrm2, T(1e-24), T(std::numeric_limits<T>::max()));
    return broadcast_mul(pooled, rsqrt(safe));
}

template <class T>
TensorT<T> embed(const TensorT<T>& frame) {
    auto out = embed_nodes(constant(frame))->val;
    double n2 = 0;
    for (const T v : out.data) n2 += double(v) * double(v);
    if (n2 < 0.5) {
        // Degenerate constant-zero frame: fall back to a fixed unit vector so
        // the embedding is still unit-norm.
        for (auto& v : out.data) v = T(0.125);
    }
    return out;
}

// ====== denoiser ======

struct DenoiserConfig {
    int channels = 1;   // image channels
    int base = 8;       // channel width at full resolution; doubles per level
    int t_steps = 100;  // diffusion steps the time channel normalizes against
};

// Per-level feature-wise modulation from the identity embedding. Bias-free
// and zero-initialized, so a zero embedding (and a fresh net) leaves features
// untouched and the conditioned pathway equals the unconditioned one.
template <class T>
struct FilmT {
    LinearT<T> to_scale, to_shift;

    FilmT() = default;
    FilmT(ParamsT<T>& p, const std::string& prefix, int ch)
        : to_scale(p, prefix + ".s", kEmbedDim, ch, /*bias=*/false, /*zero_init=*/true),
          to_shift(p, prefix + ".t", kEmbedDim, ch, /*bias=*/false, /*zero_init=*/true) {}

    NodePtrT<T> operator()(const NodePtrT<T>& h, const NodePtrT<T>& emb_row) const {
        const int ch = h->val.dim(0);
        auto s = add_const(reshape(to_scale(emb_row), {ch}), T(1));
        auto t = reshape(to_shift(emb_row), {ch});
        return channel_affine(h, s, t);
    }
};

// Three-level U-shaped conv net with skip connections. The timestep enters as
// an extra constant channel; the identity embedding modulates every level.
template <class T>
struct DenoiserT {
    DenoiserConfig config;
    ParamsT<T> params;
    Conv2dT<T> conv_in, conv_d1, conv_d2, conv_u1, conv_u0, conv_out;
    FilmT<T> film0, film1, film2;
};

template <class T>
DenoiserT<T> make_denoiser(const DenoiserConfig& cfg, uint64_t seed = 0x5eed) {
    require(cfg.channels >= 1 && cfg.base >= 1 && cfg.t_steps >= 1, "denoiser: bad config");
    DenoiserT<T> net;
    net.config = cfg;
    net.params.rng.seed(seed);
    const int F = cfg.base;
    net.conv_in = Conv2dT<T>(net.params, "in", cfg.channels + 1, F, 3);
    net.conv_d1 = Conv2dT<T>(net.params, "d1", F, 2 * F, 3);
    net.conv_d2 = Conv2dT<T>(net.params, "d2", 2 * F, 4 * F, 3);
    net.conv_u1 = Conv2dT<T>(net.params, "u1", 6 * F, 2 * F, 3);
    net.conv_u0 = Conv2dT<T>(net.params, "u0", 3 * F, F, 3);
    net.conv_out = Conv2dT<T>(net.params, "out", F, cfg.channels, 3);
    net.film0 = FilmT<T>(net.params, "film0", F);
    net.film1 = FilmT<T>(net.params, "film1", 2 * F);
    net.film2 = FilmT<T>(net.params, "film2", 4 * F);
    return net;
}

// Noise prediction as tape nodes; emb is a [1,64] row (zeros for the
// unconditioned pathway).
template <class T>
NodePtrT<T> denoise_nodes(const DenoiserT<T>& net, const NodePtrT<T>& x, int t,
                          const NodePtrT<T>& emb_row) {
    require(x->val.ndim() == 3 && x->val.dim(0) == net.config.channels,
            "denoiser: input must be [C,H,W] matching the config");
    require(x->val.dim(1) % 4 == 0 && x->val.dim(2) % 4 == 0,
            "denoiser: frame dims must divide by 4");
    require(1 <= t && t <= net.config.t_steps, "denoiser: step out of range");
    const int H = x->val.dim(1), W = x->val.dim(2);
    auto tch = constant(TensorT<T>({1, H, W}, T(t) / T(net.config.t_steps)));
    auto h0 = net.film0(relu(net.conv_in(concat_dim0(x, tch))), emb_row);
    auto h1 = net.film1(relu(net.conv_d1(avgpool2d(h0, 2, 2))), emb_row);
    auto h2 = net.film2(relu(net.conv_d2(avgpool2d(h1, 2, 2))), emb_row);
    auto u1 = relu(net.conv_u1(concat_dim0(upsample2x(h2), h1)));
    auto u0 = relu(net.conv_u0(concat_dim0(upsample2x(u1), h0)));
    return net.conv_out(u0);
}

template <class T>
TensorT<T> denoise(const DenoiserT<T>& net, const TensorT<T>& x, int t, const TensorT<T>& emb) {
    require(emb.numel() == kEmbedDim, "denoiser: embedding must have 64 entries");
    TensorT<T> row = emb;
    row.shape = {1, kEmbedDim};
    return denoise_nodes(net, constant(x), t, constant(std::move(row)))->val;
}

// ====== cover-image loss ======

// Noise-prediction error plus identity divergence:
//   sum((pred - true)^2) + 1 - cos(id_src, id_denoised)
template <class T>
NodePtrT<T> cover_image_loss_nodes(const NodePtrT<T>& pred_noise, const NodePtrT<T>& true_noise,
                                   const NodePtrT<T>& id_src, const NodePtrT<T>& id_denoised) {
    require(pred_noise->val.shape == true_noise->val.shape, "cover loss: noise shape mismatch");
    require(id_src->val.numel() == id_denoised->val.numel(), "cover loss: embedding dim mismatch");
    double n_src = 0, n_den = 0;
    for (const T v : id_src->val.data) n_src += double(v) * double(v);
    for (const T v : id_denoised->val.data) n_den += double(v) * double(v);
    if (n_src <= 0 || n_den <= 0) throw ValidationError("cover loss: zero-norm embedding");
    auto mse = sum_all(square(sub(pred_noise, true_noise)));
    auto u = broadcast_mul(id_src, rsqrt(sum_all(square(id_src))));
    auto v = broadcast_mul(id_denoised, rsqrt(sum_all(square(id_denoised))));
    auto cos_sim = sum_all(mul(u, v));
    return add(mse, add_const(neg(cos_sim), T(1)));
}

template <class T>
T cover_image_loss(const TensorT<T>& pred_noise, const TensorT<T>& true_noise,
                   const TensorT<T>& id_src, const TensorT<T>& id_denoised) {
    return cover_image_loss_nodes(constant(pred_noise), constant(true_noise), constant(id_src),
                                  constant(id_denoised))
        ->val.data[0];
}

// ====== end-to-end swap ======

// Reverse chain from t = T down to 1. Both pathways share the backbone and
// the per-step sampling noise; only the identity conditioning differs. The
// mask ramp keeps early steps purely reconstructive and hands the masked
// region over to the conditioned pathway as t falls.
template <class T>
TensorT<T> swap_face(const DenoiserT<T>& net, const TensorT<T>& source, const TensorT<T>& target,
                     const NoiseSchedule& sched, const MaskSchedule& ms, uint64_t seed) {
    require(source.shape == target.shape, "swap_face: source and target shapes differ");
    require(sched.steps() == ms.T_diff, "swap_face: schedule and mask ramp disagree on steps");
    const TensorT<T> emb_src = embed(source);
    TensorT<T> zero_emb({kEmbedDim});

    std::mt19937_64 rng(seed);
    TensorT<T> x = q_sample(target, sched.steps(), TensorT<T>::randn(target.shape, rng), sched);
    for (int t = sched.steps(); t >= 1; --t) {
        TensorT<T> z =
            t > 1 ? TensorT<T>::randn(x.shape, rng) : TensorT<T>(x.shape);
        auto phi = [&](const TensorT<T>& xt, int step) {
            return p_step(xt, step, denoise(net, xt, step, zero_emb), sched, &z);
        };
        auto lam = [&](const TensorT<T>& xt, int step) {
            return p_step(xt, step, denoise(net, xt, step, emb_src), sched, &z);
        };
        x = blended_step<T>(x, t, phi, lam, ms);
    }
    return x;
}

}  // namespace veil::diffusion
