// Audio-driven animation: a parametric 3D face shape model, a grouped-residual
// audio encoder with a CVAE latent, residual decoders for expression and head
// pose, the animation losses, and a delta renderer that turns a single base
// frame plus coefficient tracks into a video clip.
#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "veil/common.hpp"
#include "veil/nn/autograd.hpp"
#include "veil/nn/layers.hpp"
#include "veil/tensor.hpp"
#include "veil/video/synth.hpp"

namespace veil::anim {

using namespace veil::nn;

// ====== 3D face shape model ======

// Linear shape model: F = F_bar + r_id * alpha + r_ex * beta. Identity and
// expression bases are mutually orthonormal columns.
template <class T>
struct FaceModel3DT {
    TensorT<T> f_bar;  // [D]
    TensorT<T> r_id;   // [D, d_id]
    TensorT<T> r_ex;   // [D, d_ex]
};

template <class T>
FaceModel3DT<T> make_face_model(int shape_dim = 64, int d_id = 8, int d_ex = 8,
                                uint64_t seed = 0x3d) {
    require(shape_dim > 0 && d_id > 0 && d_ex > 0, "face model: dims must be positive");
    require(d_id + d_ex <= shape_dim, "face model: more basis columns than dimensions");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);

    const int k = d_id + d_ex;
    std::vector<std::vector<double>> cols(static_cast<size_t>(k),
                                          std::vector<double>(static_cast<size_t>(shape_dim)));
    for (auto& c : cols)
        for (auto& v : c) v = n01(rng);
    // Modified Gram-Schmidt in double keeps the bases orthonormal well past
    // float precision.
    for (int j = 0; j < k; ++j) {
        auto& cj = cols[static_cast<size_t>(j)];
        for (int i = 0; i < j; ++i) {
            const auto& ci = cols[static_cast<size_t>(i)];
            double dot = 0.0;
            for (int d = 0; d < shape_dim; ++d)
                dot += cj[static_cast<size_t>(d)] * ci[static_cast<size_t>(d)];
            for (int d = 0; d < shape_dim; ++d) cj[static_cast<size_t>(d)] -= dot * ci[static_cast<size_t>(d)];
        }
        double n2 = 0.0;
        for (double v : cj) n2 += v * v;
        require(n2 > 1e-12, "face model: degenerate basis draw");
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& v : cj) v *= inv;
    }

    FaceModel3DT<T> m;
    m.f_bar = TensorT<T>::randn({shape_dim}, rng, T(0.5));
    m.r_id = TensorT<T>({shape_dim, d_id});
    m.r_ex = TensorT<T>({shape_dim, d_ex});
    for (int d = 0; d < shape_dim; ++d) {
        for (int j = 0; j < d_id; ++j)
            m.r_id.at2(d, j) = T(cols[static_cast<size_t>(j)][static_cast<size_t>(d)]);
        for (int j = 0; j < d_ex; ++j)
            m.r_ex.at2(d, j) = T(cols[static_cast<size_t>(d_id + j)][static_cast<size_t>(d)]);
    }
    return m;
}

template <class T>
TensorT<T> synth_face(const FaceModel3DT<T>& m, const TensorT<T>& alpha, const TensorT<T>& beta) {
    const int D = m.f_bar.dim(0);
    require(alpha.numel() == m.r_id.dim(1), "synth_face: identity coeff dim mismatch");
    require(beta.numel() == m.r_ex.dim(1), "synth_face: expression coeff dim mismatch");
    TensorT<T> f({D});
    for (int d = 0; d < D; ++d) {
        T v = m.f_bar.data[static_cast<size_t>(d)];
        for (int j = 0; j < m.r_id.dim(1); ++j) v += m.r_id.at2(d, j) * alpha.data[static_cast<size_t>(j)];
        for (int j = 0; j < m.r_ex.dim(1); ++j) v += m.r_ex.at2(d, j) * beta.data[static_cast<size_t>(j)];
        f.data[static_cast<size_t>(d)] = v;
    }
    return f;
}

// ====== 2D eye geometry and blink signal ======

// Per-frame landmark terms: half the left/right difference of eye width and
// eye height spans. Rigid head motion leaves both gaps unchanged; only
// per-eye openness moves the height gap.
struct EyeGaps {
    float width_gap = 0.0f;
    float height_gap = 0.0f;
};

inline EyeGaps eye_gaps(const video::SyntheticFaceParams& p) {
    const auto lm = video::eye_landmarks(p);
    auto dist = [](const std::array<float, 2>& a, const std::array<float, 2>& b) {
        return std::hypot(a[0] - b[0], a[1] - b[1]);
    };
    EyeGaps g;
    g.width_gap = 0.5f * (dist(lm.left_w0, lm.left_w1) - dist(lm.right_w0, lm.right_w1));
    g.height_gap = 0.5f * (dist(lm.left_h0, lm.left_h1) - dist(lm.right_h0, lm.right_h1));
    return g;
}

// Smooth blink-style target in [0,1]: white noise passed through a gaussian
// kernel of the given period, scaled and recentered at 0.5, then clipped.
inline std::vector<float> blink_style_signal(int T, float period, float scale, uint64_t seed) {
    require(T >= 1, "blink_style_signal: T must be positive");
    require(period > 0.0f && scale >= 0.0f, "blink_style_signal: bad period or scale");
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n01(0.0f, 1.0f);
    std::vector<float> raw(static_cast<size_t>(T));
    for (auto& v : raw) v = n01(rng);

    const int radius = std::max(1, int(std::ceil(3.0f * period)));
    std::vector<float> out(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        float acc = 0.0f, wsum = 0.0f;
        for (int k = -radius; k <= radius; ++k) {
            const int i = t + k;
            if (i < 0 || i >= T) continue;
            const float w = std::exp(-0.5f * float(k) * float(k) / (period * period));
            acc += w * raw[static_cast<size_t>(i)];
            wsum += w;
        }
        out[static_cast<size_t>(t)] = std::clamp(0.5f + scale * acc / wsum, 0.0f, 1.0f);
    }
    return out;
}

// ====== Audio encoder and motion decoders ======

struct AnimConfig {
    int n_mel = 16;
    int d_latent = 16;
    int groups = 4;
    int psi_blocks = 2;
    int theta_blocks = 1;
    int d_expr = 8;
    int d_cond = 8;
    int shape_dim = 64;
};

// Grouped-residual audio encoder (psi) with mean/logvar latent heads, a
// conditioning projection of beta0 fused with the mean face shape, a residual
// expression decoder (theta), and a residual head-pose decoder. All convs use
// a 1x1 kernel on a [channels, 1, T] layout, so every frame is processed
// independently.
template <class T>
struct AudioEncoderT {
    AnimConfig config;
    ParamsT<T> params;

    Conv2dT<T> psi_in;
    std::vector<std::vector<Conv2dT<T>>> psi_group;  // [block][group]
    std::vector<Conv2dT<T>> psi_merge;               // [block]
    Conv2dT<T> mean_head;
    Conv2dT<T> logvar_head;

    LinearT<T> b0_proj;
    LinearT<T> cond_fuse;

    Conv2dT<T> theta_in;
    std::vector<std::array<Conv2dT<T>, 2>> theta_block;
    Conv2dT<T> theta_out;

    Conv2dT<T> pose_in;
    std::array<Conv2dT<T>, 2> pose_block;
    Conv2dT<T> pose_out;
};

template <class T>
AudioEncoderT<T> make_audio_encoder(const AnimConfig& cfg, uint64_t seed = 0x5eed) {
    require(cfg.n_mel > 0 && cfg.d_latent > 0 && cfg.groups > 0 && cfg.d_expr > 0 &&
                cfg.d_cond > 0 && cfg.shape_dim > 0 && cfg.psi_blocks >= 0 &&
                cfg.theta_blocks >= 0,
            "audio encoder: dims must be positive");
    require(cfg.d_latent % cfg.groups == 0, "audio encoder: d_latent must divide into groups");

    AudioEncoderT<T> enc;
    enc.config = cfg;
    auto& p = enc.params;
    p.rng.seed(seed);
    const int dg = cfg.d_latent / cfg.groups;
    const int d_dec_in = cfg.d_latent + cfg.d_cond + 3;  // latent + cond + (rho0, z_style)

    enc.psi_in = Conv2dT<T>(p, "psi.in", cfg.n_mel, cfg.d_latent, 1);
    for (int b = 0; b < cfg.psi_blocks; ++b) {
        std::vector<Conv2dT<T>> grp;
        for (int g = 0; g < cfg.groups; ++g)
            grp.emplace_back(p, "psi.b" + std::to_string(b) + ".g" + std::to_string(g), dg, dg, 1);
        enc.psi_group.push_back(std::move(grp));
        enc.psi_merge.emplace_back(p, "psi.b" + std::to_string(b) + ".m", cfg.d_latent,
                                   cfg.d_latent, 1);
    }
    enc.mean_head = Conv2dT<T>(p, "psi.mean", cfg.d_latent, cfg.d_latent, 1);
    // Zero logvar at init gives a unit-variance latent and zero KL at the mean.
    enc.logvar_head = Conv2dT<T>(p, "psi.logvar", cfg.d_latent, cfg.d_latent, 1, true, true);

    enc.b0_proj = LinearT<T>(p, "cond.b0p", cfg.d_expr, cfg.shape_dim, false);
    enc.cond_fuse = LinearT<T>(p, "cond.fuse", cfg.shape_dim, cfg.d_cond);

    enc.theta_in = Conv2dT<T>(p, "theta.in", d_dec_in, cfg.d_latent, 1);
    for (int b = 0; b < cfg.theta_blocks; ++b) {
        const std::string pre = "theta.b" + std::to_string(b);
        enc.theta_block.push_back({Conv2dT<T>(p, pre + ".c0", cfg.d_latent, cfg.d_latent, 1),
                                   Conv2dT<T>(p, pre + ".c1", cfg.d_latent, cfg.d_latent, 1)});
    }
    enc.theta_out = Conv2dT<T>(p, "theta.out", cfg.d_latent, cfg.d_expr, 1);

    enc.pose_in = Conv2dT<T>(p, "pose.in", d_dec_in, cfg.d_latent, 1);
    enc.pose_block = {Conv2dT<T>(p, "pose.c0", cfg.d_latent, cfg.d_latent, 1),
                      Conv2dT<T>(p, "pose.c1", cfg.d_latent, cfg.d_latent, 1)};
    enc.pose_out = Conv2dT<T>(p, "pose.out", cfg.d_latent, 2, 1);
    return enc;
}

// [T, n_mel] feature rows to the [n_mel, 1, T] conv layout.
template <class T>
TensorT<T> audio_channels(const TensorT<T>& audio) {
    require(audio.ndim() == 2, "audio features must be [T, n_mel]");
    const int Tn = audio.dim(0), M = audio.dim(1);
    TensorT<T> img({M, 1, Tn});
    for (int t = 0; t < Tn; ++t)
        for (int m = 0; m < M; ++m) img.at3(m, 0, t) = audio.at2(t, m);
    return img;
}

// [C, 1, T] conv layout back to [T, C] rows.
template <class T>
TensorT<T> rows_from_img(const TensorT<T>& img) {
    require(img.ndim() == 3 && img.dim(1) == 1, "rows_from_img: expected [C,1,T]");
    const int C = img.dim(0), Tn = img.dim(2);
    TensorT<T> rows({Tn, C});
    for (int t = 0; t < Tn; ++t)
        for (int c = 0; c < C; ++c) rows.at2(t, c) = img.at3(c, 0, t);
    return rows;
}

namespace detail {

template <class T>
void check_audio(const AudioEncoderT<T>& enc, const TensorT<T>& audio) {
    require(audio.ndim() == 2 && audio.dim(1) == enc.config.n_mel,
            "audio features must be [T, n_mel] with n_mel matching the encoder");
    require(audio.dim(0) >= 1, "audio features must cover at least one frame");
    for (T v : audio.data)
        require(std::isfinite(double(v)), "audio features must be finite");
}

}  // namespace detail

// Encoder trunk on a [n_mel,1,T] input node.
template <class T>
NodePtrT<T> psi_nodes(const AudioEncoderT<T>& enc, const NodePtrT<T>& audio_img) {
    const int dg = enc.config.d_latent / enc.config.groups;
    auto h = relu(enc.psi_in(audio_img));
    for (size_t b = 0; b < enc.psi_group.size(); ++b) {
        NodePtrT<T> u;
        for (int g = 0; g < enc.config.groups; ++g) {
            auto part = relu(enc.psi_group[b][static_cast<size_t>(g)](
                slice_dim0(h, g * dg, (g + 1) * dg)));
            u = g == 0 ? part : concat_dim0(u, part);
        }
        h = relu(add(h, enc.psi_merge[b](u)));
    }
    return h;
}

template <class T>
struct LatentStatsNodes {
    NodePtrT<T> mean;    // [d_latent, 1, T]
    NodePtrT<T> logvar;  // [d_latent, 1, T]
};

template <class T>
LatentStatsNodes<T> latent_stats_nodes(const AudioEncoderT<T>& enc, const NodePtrT<T>& audio_img) {
    auto h = psi_nodes(enc, audio_img);
    return {enc.mean_head(h), enc.logvar_head(h)};
}

// Conditioning vector: beta0 projected into shape space, fused with the mean
// shape by elementwise product, then compressed to d_cond values.
template <class T>
NodePtrT<T> cond_nodes(const AudioEncoderT<T>& enc, const TensorT<T>& beta0,
                       const TensorT<T>& f_bar) {
    require(beta0.numel() == enc.config.d_expr, "beta0 dim mismatch");
    require(f_bar.numel() == enc.config.shape_dim, "mean shape dim mismatch");
    TensorT<T> b0 = beta0;
    b0.shape = {1, enc.config.d_expr};
    TensorT<T> fb = f_bar;
    fb.shape = {1, enc.config.shape_dim};
    auto fused = mul(enc.b0_proj(constant(b0)), constant(fb));
    return reshape(enc.cond_fuse(fused), {enc.config.d_cond});
}

namespace detail {

// Decoder input: latent channels, the conditioning vector broadcast over
// frames, and three extra channels carrying rho0 and z_style.
template <class T>
NodePtrT<T> decoder_input(const AudioEncoderT<T>& enc, const NodePtrT<T>& z,
                          const NodePtrT<T>& cond, const TensorT<T>& extra3) {
    require(z->val.ndim() == 3 && z->val.dim(0) == enc.config.d_latent && z->val.dim(1) == 1,
            "decoder latent must be [d_latent, 1, T]");
    require(cond->val.numel() == enc.config.d_cond, "conditioning dim mismatch");
    require(extra3.numel() == 3, "extra inputs must be [rho_mu, rho_nu, z_style]");
    const int Tn = z->val.dim(2);
    auto ones = constant(TensorT<T>({enc.config.d_cond, 1, Tn}, T(1)));
    auto cond_img = channel_affine(ones, cond, constant(TensorT<T>({enc.config.d_cond})));
    TensorT<T> extra({3, 1, Tn});
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < Tn; ++t) extra.at3(c, 0, t) = extra3.data[static_cast<size_t>(c)];
    return concat_dim0(concat_dim0(z, cond_img), constant(extra));
}

}  // namespace detail

template <class T>
NodePtrT<T> decode_expr_nodes(const AudioEncoderT<T>& enc, const NodePtrT<T>& z,
                              const NodePtrT<T>& cond, const TensorT<T>& extra3) {
    auto h = relu(enc.theta_in(detail::decoder_input(enc, z, cond, extra3)));
    for (const auto& blk : enc.theta_block) h = relu(add(h, blk[1](relu(blk[0](h)))));
    return enc.theta_out(h);  // [d_expr, 1, T]
}

template <class T>
NodePtrT<T> decode_pose_nodes(const AudioEncoderT<T>& enc, const NodePtrT<T>& z,
                              const NodePtrT<T>& cond, const TensorT<T>& extra3) {
    auto h = relu(enc.pose_in(detail::decoder_input(enc, z, cond, extra3)));
    h = relu(add(h, enc.pose_block[1](relu(enc.pose_block[0](h)))));
    return enc.pose_out(h);  // [2, 1, T]
}

// Deterministic expression coefficients: latent mean only, no pose or style
// inputs. Frame-local by construction, so row t depends only on audio row t.
template <class T>
TensorT<T> coeffs_from_audio(const AudioEncoderT<T>& enc, const TensorT<T>& audio,
                             const TensorT<T>& beta0, const TensorT<T>& f_bar) {
    detail::check_audio(enc, audio);
    auto stats = latent_stats_nodes(enc, constant(audio_channels(audio)));
    auto cond = cond_nodes(enc, beta0, f_bar);
    auto beta = decode_expr_nodes(enc, stats.mean, cond, TensorT<T>({3}));
    return rows_from_img(beta->val);  // [T, d_expr]
}

// Latent gaussian parameters per frame, as [T, d_latent] rows.
template <class T>
std::pair<TensorT<T>, TensorT<T>> latent_stats(const AudioEncoderT<T>& enc,
                                               const TensorT<T>& audio) {
    detail::check_audio(enc, audio);
    auto stats = latent_stats_nodes(enc, constant(audio_channels(audio)));
    return {rows_from_img(stats.mean->val), rows_from_img(stats.logvar->val)};
}

// ====== Sampled motion ======

template <class T>
struct AnimStateT {
    TensorT<T> beta_t;  // [T, d_expr]
    TensorT<T> rho_t;   // [T, 2] rotation, translation
    T z_style = T(0);
    TensorT<T> beta0;   // [d_expr]
};

using AnimState = AnimStateT<float>;

// Draws the latent with the reparameterized gaussian and decodes expression
// and pose tracks. Identical seeds give identical states; a collapsed logvar
// makes the draw equal to the mean for any seed.
template <class T>
AnimStateT<T> sample_motion(const AudioEncoderT<T>& enc, const TensorT<T>& audio,
                            const TensorT<T>& beta0, const TensorT<T>& f_bar,
                            const TensorT<T>& rho0, T z_style, uint64_t seed) {
    detail::check_audio(enc, audio);
    require(rho0.numel() == 2, "rho0 must hold [mu, nu]");
    auto stats = latent_stats_nodes(enc, constant(audio_channels(audio)));

    std::mt19937_64 rng(seed);
    std::normal_distribution<T> n01(T(0), T(1));
    TensorT<T> z(stats.mean->val.shape);
    for (int64_t i = 0; i < z.numel(); ++i)
        z.data[static_cast<size_t>(i)] =
            stats.mean->val.data[static_cast<size_t>(i)] +
            std::exp(T(0.5) * stats.logvar->val.data[static_cast<size_t>(i)]) * n01(rng);

    TensorT<T> extra({3});
    extra.data[0] = rho0.data[0];
    extra.data[1] = rho0.data[1];
    extra.data[2] = z_style;
    auto cond = cond_nodes(enc, beta0, f_bar);
    auto zc = constant(z);
    AnimStateT<T> st;
    st.beta_t = rows_from_img(decode_expr_nodes(enc, zc, cond, extra)->val);
    st.rho_t = rows_from_img(decode_pose_nodes(enc, zc, cond, extra)->val);
    st.z_style = z_style;
    st.beta0 = beta0;
    return st;
}

// ====== Animation losses ======

template <class T>
struct AnimLossWeights {
    T l3d = T(2);
    T l2d = T(0.01);
    T rebuild = T(1);
    T kl = T(0.7);
};

template <class T>
struct AnimLossNodesT {
    NodePtrT<T> total, l3d, l2d, rebuild, kl;
};

template <class T>
struct AnimLossValue {
    T total = 0, l3d = 0, l2d = 0, rebuild = 0, kl = 0;
};

// Diagonal-gaussian KL against the standard normal, summed over latent dims
// and averaged over rows: mean of 0.5 * (mu^2 + e^lv - lv - 1).
template <class T>
NodePtrT<T> kl_divergence_nodes(const NodePtrT<T>& mean, const NodePtrT<T>& logvar) {
    require(mean->val.shape == logvar->val.shape, "KL: mean/logvar shape mismatch");
    require(mean->val.ndim() <= 2, "KL: expected [rows, dims] or [dims]");
    const int rows = mean->val.ndim() == 2 ? mean->val.dim(0) : 1;
    auto term = sub(add(square(mean), exp_(logvar)), add_const(logvar, T(1)));
    return scale(sum_all(term), T(0.5) / T(rows));
}

// Track losses. Lip mismatch is a per-frame squared error; the 2D term is the
// L1 gap between the eye asymmetry signal and the blink style target; rebuild
// compares frame-to-frame pose deltas; KL regularizes the latent.
template <class T>
AnimLossNodesT<T> anim_loss_nodes(const NodePtrT<T>& gen_lip, const TensorT<T>& gt_lip,
                                  const NodePtrT<T>& width_gap, const NodePtrT<T>& height_gap,
                                  const TensorT<T>& z_style, const NodePtrT<T>& rho_pred,
                                  const TensorT<T>& rho_gt, const NodePtrT<T>& lat_mean,
                                  const NodePtrT<T>& lat_logvar,
                                  const AnimLossWeights<T>& w = {}) {
    require(w.l3d >= 0 && w.l2d >= 0 && w.rebuild >= 0 && w.kl >= 0,
            "anim loss: weights must be nonnegative");
    const int Tn = int(gen_lip->val.numel());
    require(Tn >= 1, "anim loss: empty tracks");
    require(int(gt_lip.numel()) == Tn && int(width_gap->val.numel()) == Tn &&
                int(height_gap->val.numel()) == Tn && int(z_style.numel()) == Tn,
            "anim loss: track length mismatch");
    require(rho_pred->val.ndim() == 2 && rho_pred->val.dim(0) == Tn && rho_pred->val.dim(1) == 2,
            "anim loss: pose track must be [T,2]");
    require(rho_gt.shape == rho_pred->val.shape, "anim loss: pose track length mismatch");

    AnimLossNodesT<T> out;
    out.l3d = mean_all(square(sub(gen_lip, constant(gt_lip))));
    out.l2d = mean_all(abs_(sub(add(width_gap, height_gap), constant(z_style))));
    if (Tn > 1) {
        auto dp = sub(slice_dim0(rho_pred, 1, Tn), slice_dim0(rho_pred, 0, Tn - 1));
        TensorT<T> dg({Tn - 1, 2});
        for (int t = 0; t + 1 < Tn; ++t)
            for (int c = 0; c < 2; ++c) dg.at2(t, c) = rho_gt.at2(t + 1, c) - rho_gt.at2(t, c);
        out.rebuild = scale(sum_all(square(sub(dp, constant(dg)))), T(1) / T(Tn - 1));
    } else {
        out.rebuild = scalar_const(T(0));
    }
    out.kl = kl_divergence_nodes(lat_mean, lat_logvar);
    out.total = add(add(scale(out.l3d, w.l3d), scale(out.l2d, w.l2d)),
                    add(scale(out.rebuild, w.rebuild), scale(out.kl, w.kl)));
    return out;
}

template <class T>
AnimLossValue<T> anim_losses(const TensorT<T>& gen_lip, const TensorT<T>& gt_lip,
                             const TensorT<T>& width_gap, const TensorT<T>& height_gap,
                             const TensorT<T>& z_style, const TensorT<T>& rho_pred,
                             const TensorT<T>& rho_gt, const TensorT<T>& lat_mean,
                             const TensorT<T>& lat_logvar, const AnimLossWeights<T>& w = {}) {
    auto nodes = anim_loss_nodes(constant(gen_lip), gt_lip, constant(width_gap),
                                 constant(height_gap), z_style, constant(rho_pred), rho_gt,
                                 constant(lat_mean), constant(lat_logvar), w);
    AnimLossValue<T> v;
    v.total = nodes.total->val.data[0];
    v.l3d = nodes.l3d->val.data[0];
    v.l2d = nodes.l2d->val.data[0];
    v.rebuild = nodes.rebuild->val.data[0];
    v.kl = nodes.kl->val.data[0];
    return v;
}

// ====== Delta renderer ======

// Coefficient binding for the parametric renderer: expression channel 0 is
// the mouth delta, channels 1 and 2 are left/right eye deltas; pose is
// (tilt delta, horizontal center delta).
template <class T>
std::vector<video::SyntheticFaceParams> anim_param_track(const video::SyntheticFaceParams& p0,
                                                         const AnimStateT<T>& st) {
    require(st.beta_t.ndim() == 2 && st.beta_t.dim(1) >= 3,
            "anim track: need at least mouth and two eye channels");
    require(st.rho_t.ndim() == 2 && st.rho_t.dim(1) == 2 && st.rho_t.dim(0) == st.beta_t.dim(0),
            "anim track: pose rows must match expression rows");
    const int Tn = st.beta_t.dim(0);
    require(Tn >= 1, "anim track: empty state");
    std::vector<video::SyntheticFaceParams> track(static_cast<size_t>(Tn), p0);
    for (int t = 0; t < Tn; ++t) {
        auto& p = track[static_cast<size_t>(t)];
        p.mouth_open += float(st.beta_t.at2(t, 0));
        p.eye_open_left += float(st.beta_t.at2(t, 1));
        p.eye_open_right += float(st.beta_t.at2(t, 2));
        p.head_tilt += float(st.rho_t.at2(t, 0));
        p.head_cx += float(st.rho_t.at2(t, 1));
    }
    return track;
}

// Renders the animated parameter track and applies it to the base frame as a
// pixel delta: frame_t = clip(base + render(p_t) - render(p0)). A zero
// coefficient state reproduces the base frame exactly on every frame.
template <class T>
video::VideoClip render_initial_cover(const video::Frame& base,
                                      const video::SyntheticFaceParams& p0,
                                      const AnimStateT<T>& st, double fps = 25.0) {
    require(base.ndim() == 3 && (base.dim(0) == 1 || base.dim(0) == 3),
            "render: base frame must be [C,H,W] with 1 or 3 channels");
    const int C = base.dim(0), H = base.dim(1), W = base.dim(2);
    auto track = anim_param_track(p0, st);
    auto [animated, tracks] = video::synth_face_clip(track, H, W, fps, C);
    auto [ref, ref_tracks] = video::synth_face_clip({p0}, H, W, fps, C);

    video::VideoClip out;
    out.fps = fps;
    for (auto& f : animated.frames) {
        video::Frame g({C, H, W});
        for (int64_t i = 0; i < g.numel(); ++i)
            g.data[static_cast<size_t>(i)] =
                std::clamp(base.data[static_cast<size_t>(i)] +
                               (f.data[static_cast<size_t>(i)] -
                                ref.frames[0].data[static_cast<size_t>(i)]),
                           0.0f, 1.0f);
        out.frames.push_back(std::move(g));
    }
    video::validate_clip(out);
    return out;
}

}  // namespace veil::anim
