// Invertible coupling network for video hiding. A stack of coupling blocks
// maps a (cover, secret) pair of band stacks to a (stego, residual) pair; the
// same parameters run the exact algebraic inverse, so whoever holds the
// network configuration and checkpoint recovers the secret. The pair
// (config, checkpoint) is the steganographic key.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "veil/common.hpp"
#include "veil/nn/layers.hpp"
#include "veil/sha256.hpp"
#include "veil/tensor.hpp"

namespace veil::inn {

using namespace veil::nn;

// ====== configuration ======

struct CouplingConfig {
    int channels = 8;      // width of each branch; cover and secret stacks match
    int hidden = 8;        // growth channels inside the dense subnets
    int blocks = 4;        // coupling depth K
    double clamp_c = 2.0;  // scale pre-activations squash into [-c, c]; <= 0 turns clamping off
};

// Stable digest of the architecture settings. Recovery refuses to run against
// a checkpoint whose stored hash disagrees, which is what makes the config
// part of the key rather than a convention.
inline std::array<uint8_t, 32> config_fingerprint(const CouplingConfig& c) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "coupling channels=%d hidden=%d blocks=%d clamp=%.6f",
                  c.channels, c.hidden, c.blocks, c.clamp_c);
    return Sha256::digest(buf);
}

// ====== subnets ======

// One conditioning branch: a 3x3 convolution feeding a five-layer dense block.
template <class T>
struct SubnetT {
    Conv2dT<T> eta;
    DenseBlockT<T> phi;

    SubnetT() = default;
    SubnetT(ParamsT<T>& p, const std::string& prefix, int ch, int growth, bool zero_final)
        : eta(p, prefix + ".eta", ch, ch, 3),
          phi(p, prefix + ".phi", ch, growth, ch, zero_final) {}

    NodePtrT<T> operator()(const NodePtrT<T>& x) const { return phi(eta(x)); }
};

// Squash a scale pre-activation into [-c, c] so exp() stays bounded under
// training. Smooth and strictly monotone, hence still invertible.
template <class T>
NodePtrT<T> clamped_pre(const NodePtrT<T>& pre, double c) {
    if (c <= 0) return pre;
    return scale(tanh_(scale(pre, T(1.0 / c))), T(c));
}

// One coupling step. The cover branch takes a weighted additive update from
// the secret features; the secret branch is then scaled and shifted by
// functions of the updated cover, which is what makes the step invertible.
template <class T>
struct InvertibleBlockT {
    SubnetT<T> feat;       // feature extractor on the secret branch
    Conv2dT<T> xi;         // weighting over the extracted features; zero at init
    SubnetT<T> scale_net;  // scale pre-activation from the cover branch
    SubnetT<T> shift_net;  // shift from the cover branch

    InvertibleBlockT(ParamsT<T>& p, const std::string& prefix, const CouplingConfig& cfg)
        : feat(p, prefix + ".feat", cfg.channels, cfg.hidden, /*zero_final=*/false),
          xi(p, prefix + ".xi", cfg.channels, cfg.channels, 3, true, /*zero_init=*/true),
          scale_net(p, prefix + ".scale", cfg.channels, cfg.hidden, /*zero_final=*/true),
          shift_net(p, prefix + ".shift", cfg.channels, cfg.hidden, /*zero_final=*/true) {}
};

// ====== network ======

template <class T>
struct CouplingNetT {
    CouplingConfig config;
    std::array<uint8_t, 32> config_hash{};
    std::string checkpoint_id;  // set when loaded from or saved to a file
    ParamsT<T> params;
    std::vector<InvertibleBlockT<T>> blocks;
};

using CouplingNet = CouplingNetT<float>;

// Fresh network. The weighting convs and the final dense layers of the scale
// and shift subnets start at zero, so the whole map is the identity at init.
template <class T>
CouplingNetT<T> make_coupling_net(const CouplingConfig& cfg, uint64_t seed = 0x5eed) {
    require(cfg.channels >= 1 && cfg.hidden >= 1 && cfg.blocks >= 1,
            "make_coupling_net: channels, hidden and blocks must be positive");
    CouplingNetT<T> net;
    net.config = cfg;
    net.config_hash = config_fingerprint(cfg);
    net.params.rng.seed(seed);
    for (int k = 0; k < cfg.blocks; ++k)
        net.blocks.emplace_back(net.params, "block" + std::to_string(k), cfg);
    return net;
}

namespace detail {

template <class T>
void check_finite(const TensorT<T>& a, const TensorT<T>& b, int block, const char* where) {
    for (const T v : a.data)
        if (!std::isfinite(double(v)))
            throw NumericError(std::string(where) + ": non-finite activation in block " +
                               std::to_string(block));
    for (const T v : b.data)
        if (!std::isfinite(double(v)))
            throw NumericError(std::string(where) + ": non-finite activation in block " +
                               std::to_string(block));
}

template <class T>
void check_pair(const CouplingNetT<T>& net, const TensorT<T>& a, const TensorT<T>& b,
                const char* where) {
    require(a.ndim() == 3 && b.ndim() == 3, std::string(where) + ": inputs must be [C,H,W]");
    require(a.shape == b.shape, std::string(where) + ": branch shapes differ");
    require(a.dim(0) == net.config.channels,
            std::string(where) + ": channel count does not match the network");
}

}  // namespace detail

// Hiding direction on tape nodes, block k:
//   cover  <- cover + xi(feat(secret))
//   secret <- secret * exp(clamp(scale(cover))) + shift(cover)
// After K blocks the cover branch is the stego stack and the secret branch is
// the residual. Differentiable end to end.
template <class T>
std::pair<NodePtrT<T>, NodePtrT<T>> hide_forward_nodes(const CouplingNetT<T>& net,
                                                       NodePtrT<T> cover, NodePtrT<T> secret) {
    detail::check_pair(net, cover->val, secret->val, "hide_forward");
    for (size_t k = 0; k < net.blocks.size(); ++k) {
        const auto& blk = net.blocks[k];
        cover = add(cover, blk.xi(blk.feat(secret)));
        auto s = clamped_pre(blk.scale_net(cover), net.config.clamp_c);
        secret = add(mul(secret, exp_(s)), blk.shift_net(cover));
        detail::check_finite(cover->val, secret->val, int(k), "hide_forward");
    }
    return {cover, secret};
}

// Recovery direction, the exact algebraic inverse, block k from the top:
//   secret <- (residual - shift(stego)) * exp(-clamp(scale(stego)))
//   stego  <- stego - xi(feat(secret))
template <class T>
std::pair<NodePtrT<T>, NodePtrT<T>> recover_backward_nodes(const CouplingNetT<T>& net,
                                                           NodePtrT<T> stego,
                                                           NodePtrT<T> residual) {
    detail::check_pair(net, stego->val, residual->val, "recover_backward");
    for (size_t i = net.blocks.size(); i-- > 0;) {
        const auto& blk = net.blocks[i];
        auto s = clamped_pre(blk.scale_net(stego), net.config.clamp_c);
        residual = mul(sub(residual, blk.shift_net(stego)), exp_(neg(s)));
        stego = sub(stego, blk.xi(blk.feat(residual)));
        detail::check_finite(stego->val, residual->val, int(i), "recover_backward");
    }
    return {residual, stego};  // (secret, cover)
}

// Plain-tensor entry points for inference; no tape survives the call.
template <class T>
std::pair<TensorT<T>, TensorT<T>> hide_forward(const CouplingNetT<T>& net, const TensorT<T>& cover,
                                               const TensorT<T>& secret) {
    auto [stego, residual] = hide_forward_nodes(net, constant(cover), constant(secret));
    return {stego->val, residual->val};
}

template <class T>
std::pair<TensorT<T>, TensorT<T>> recover_backward(const CouplingNetT<T>& net,
                                                   const TensorT<T>& stego,
                                                   const TensorT<T>& residual) {
    auto [secret, cover] = recover_backward_nodes(net, constant(stego), constant(residual));
    return {secret->val, cover->val};
}

// ====== two-way affine coupling ======

// Pedagogical single-tensor form: split the channels in half, then
//   y1 = x1 * g1(x2) + e1(x2)
//   y2 = x2 * g2(y1) + e2(y1)
// with each gain g the exponential of a clamped pre-activation, hence nonzero
// and the step invertible. Neutral (zero-final) subnets give the identity.
template <class T>
struct AffineCoupleT {
    int channels = 0;
    double clamp_c = 2.0;
    ParamsT<T> params;
    SubnetT<T> g1, e1, g2, e2;
};

template <class T>
AffineCoupleT<T> make_affine_couple(int channels, int hidden, double clamp_c = 2.0,
                                    uint64_t seed = 0x5eed) {
    require(channels >= 2, "make_affine_couple: need at least two channels");
    if (channels % 2 != 0)
        throw ValidationError("make_affine_couple: odd channel count cannot be split");
    AffineCoupleT<T> net;
    net.channels = channels;
    net.clamp_c = clamp_c;
    net.params.rng.seed(seed);
    const int half = channels / 2;
    net.g1 = SubnetT<T>(net.params, "g1", half, hidden, /*zero_final=*/true);
    net.e1 = SubnetT<T>(net.params, "e1", half, hidden, /*zero_final=*/true);
    net.g2 = SubnetT<T>(net.params, "g2", half, hidden, /*zero_final=*/true);
    net.e2 = SubnetT<T>(net.params, "e2", half, hidden, /*zero_final=*/true);
    return net;
}

template <class T>
std::pair<TensorT<T>, TensorT<T>> affine_couple(const AffineCoupleT<T>& net, const TensorT<T>& x) {
    require(x.ndim() == 3, "affine_couple: input must be [C,H,W]");
    if (x.dim(0) % 2 != 0) throw ValidationError("affine_couple: odd channel count");
    require(x.dim(0) == net.channels, "affine_couple: channel count does not match the network");
    const int half = net.channels / 2;
    auto xn = constant(x);
    auto x1 = slice_dim0(xn, 0, half);
    auto x2 = slice_dim0(xn, half, net.channels);
    auto y1 = add(mul(x1, exp_(clamped_pre(net.g1(x2), net.clamp_c))), net.e1(x2));
    auto y2 = add(mul(x2, exp_(clamped_pre(net.g2(y1), net.clamp_c))), net.e2(y1));
    return {y1->val, y2->val};
}

template <class T>
TensorT<T> affine_uncouple(const AffineCoupleT<T>& net, const TensorT<T>& y1_t,
                           const TensorT<T>& y2_t) {
    require(y1_t.shape == y2_t.shape, "affine_uncouple: half shapes differ");
    require(y1_t.ndim() == 3 && y1_t.dim(0) * 2 == net.channels,
            "affine_uncouple: halves do not match the network");
    auto y1 = constant(y1_t);
    auto y2 = constant(y2_t);
    auto x2 = mul(sub(y2, net.e2(y1)), exp_(neg(clamped_pre(net.g2(y1), net.clamp_c))));
    auto x1 = mul(sub(y1, net.e1(x2)), exp_(neg(clamped_pre(net.g1(x2), net.clamp_c))));
    return concat_dim0(x1, x2)->val;
}

// ====== hiding losses ======

// Frame-group weight windows for the loss mask. Both sum to one.
inline std::vector<double> center_weights(int G) {
    require(G >= 1, "center_weights: empty group");
    std::vector<double> w(static_cast<size_t>(G), 0.0);
    w[static_cast<size_t>(G / 2)] = 1.0;
    return w;
}

inline std::vector<double> triangular_weights(int G) {
    require(G >= 1, "triangular_weights: empty group");
    std::vector<double> w(static_cast<size_t>(G));
    const double mid = (G - 1) / 2.0;
    double sum = 0;
    for (int g = 0; g < G; ++g) {
        w[static_cast<size_t>(g)] = 1.0 - std::abs(g - mid) / ((G + 1) / 2.0);
        sum += w[static_cast<size_t>(g)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

template <class T>
struct HidingLossT {
    NodePtrT<T> total;  // fwd + lambda * bwd
    NodePtrT<T> fwd;    // stego vs cover, masked
    NodePtrT<T> bwd;    // recovered secret and cover vs originals, masked
};

namespace detail {

// Per-channel expansion of the temporal weight window. Band stacks lay
// channels out as [band][frame][channel] with four bands, so the G-pattern
// repeats every C/4 channels. A single-group window weights every channel
// alike and needs no layout bookkeeping.
template <class T>
NodePtrT<T> cf_channel_scale(int C, const std::vector<double>& cf) {
    const int G = int(cf.size());
    TensorT<T> s({C});
    if (G == 1) {
        for (auto& v : s.data) v = T(cf[0]);
        return constant(std::move(s));
    }
    require(C % 4 == 0, "hiding_loss: band stack channels must divide by four");
    const int gc = C / 4;
    require(gc % G == 0, "hiding_loss: frame group does not divide the stack");
    const int cc = gc / G;
    for (int ch = 0; ch < C; ++ch)
        s.data[static_cast<size_t>(ch)] = T(cf[static_cast<size_t>((ch % gc) / cc)]);
    return constant(std::move(s));
}

template <class T>
NodePtrT<T> masked_sq(const NodePtrT<T>& a, const NodePtrT<T>& b, const NodePtrT<T>& w,
                      const NodePtrT<T>& zero) {
    return sum_all(square(channel_affine(sub(a, b), w, zero)));
}

}  // namespace detail

// Squared-error hiding objective with a temporal mask:
//   fwd   = sum((stego - cover) .* w)^2
//   bwd   = sum((rec_secret - secret) .* w)^2 + sum((rec_cover - cover_ref) .* w)^2
//   total = fwd + lambda_b * bwd
// where w broadcasts cf_weights across the band-stack channels.
template <class T>
HidingLossT<T> hiding_loss(const NodePtrT<T>& stego, const NodePtrT<T>& cover,
                           const NodePtrT<T>& rec_secret, const NodePtrT<T>& secret,
                           const NodePtrT<T>& rec_cover, const NodePtrT<T>& cover_ref,
                           const std::vector<double>& cf_weights, double lambda_b = 2.0) {
    if (lambda_b < 0) throw ValidationError("hiding_loss: negative balance weight");
    require(!cf_weights.empty(), "hiding_loss: empty frame weights");
    double wsum = 0;
    for (double v : cf_weights) wsum += v;
    require(std::abs(wsum - 1.0) <= 1e-6, "hiding_loss: frame weights must sum to one");
    const auto& shape = stego->val.shape;
    require(cover->val.shape == shape && rec_secret->val.shape == shape &&
                secret->val.shape == shape && rec_cover->val.shape == shape &&
                cover_ref->val.shape == shape,
            "hiding_loss: tensor shapes differ");
    require(stego->val.ndim() == 3, "hiding_loss: inputs must be [C,H,W]");

    auto w = detail::cf_channel_scale<T>(stego->val.dim(0), cf_weights);
    auto zero = constant(TensorT<T>({stego->val.dim(0)}));
    HidingLossT<T> out;
    out.fwd = detail::masked_sq(stego, cover, w, zero);
    out.bwd = add(detail::masked_sq(rec_secret, secret, w, zero),
                  detail::masked_sq(rec_cover, cover_ref, w, zero));
    out.total = add(out.fwd, scale(out.bwd, T(lambda_b)));
    return out;
}

// Tensor convenience: evaluates the loss without keeping a tape.
template <class T>
struct HidingLossValue {
    T total = 0, fwd = 0, bwd = 0;
};

template <class T>
HidingLossValue<T> hiding_loss(const TensorT<T>& stego, const TensorT<T>& cover,
                               const TensorT<T>& rec_secret, const TensorT<T>& secret,
                               const TensorT<T>& rec_cover, const TensorT<T>& cover_ref,
                               const std::vector<double>& cf_weights, double lambda_b = 2.0) {
    auto l = hiding_loss(constant(stego), constant(cover), constant(rec_secret), constant(secret),
                         constant(rec_cover), constant(cover_ref), cf_weights, lambda_b);
    return {l.total->val.data[0], l.fwd->val.data[0], l.bwd->val.data[0]};
}

// ====== residual policy ======

// Eq-style recovery needs the secret-branch output back. At desk scale the
// default is to carry it next to the stego stack (exact recovery); discard
// mode transmits stego alone and recovery substitutes zeros, trading
// exactness for the single-tensor protocol.
enum class ResidualMode { attach, discard };

inline const char* residual_mode_name(ResidualMode m) {
    return m == ResidualMode::attach ? "attach" : "discard";
}

inline ResidualMode residual_mode_from_name(const std::string& s) {
    if (s == "attach") return ResidualMode::attach;
    if (s == "discard") return ResidualMode::discard;
    throw ValidationError("unknown residual mode: " + s);
}

template <class T>
std::optional<TensorT<T>> residual_embedding_policy(const TensorT<T>& residual, ResidualMode mode) {
    if (mode == ResidualMode::attach) return residual;
    return std::nullopt;
}

// What the recovery side feeds the inverse when the payload is absent.
template <class T>
TensorT<T> residual_for_recovery(const std::optional<TensorT<T>>& payload,
                                 const std::vector<int>& shape) {
    if (payload) {
        require(payload->shape == shape, "residual payload shape does not match the stego stack");
        return *payload;
    }
    return TensorT<T>(shape);
}

}  // namespace veil::inn
