// Latent video predictor. Each frame passes through a strided conv encoder,
// a shifted-window self-attention translator mixes the latent token volume
// across time and space, a learned temporal map projects the observed frames
// onto the future horizon, and a mirrored conv decoder renders the predicted
// frames. A fresh model is exactly the copy baseline: translator blocks start
// as the identity and the temporal map starts one-hot on the last frame.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "veil/common.hpp"
#include "veil/kernels.hpp"
#include "veil/nn/layers.hpp"
#include "veil/tensor.hpp"
#include "veil/video/clip.hpp"

namespace veil::vist {

using namespace veil::nn;

// ====== configuration ======

// Encoder channels double per stage from base_channels; the final stage width
// is the translator token dim. n_layers = 0 keeps encoder and decoder as
// identity maps, which ties them trivially.
struct VistConfig {
    int in_channels = 3;
    int base_channels = 32;
    int n_layers = 2;               // conv stages, each stride 2
    int heads = 4;
    std::array<int, 3> window{2, 4, 4};  // (t, h, w) tokens per window
    std::array<int, 3> shift{1, 2, 2};   // cyclic shift on odd translator layers
    int blocks = 2;                 // translator depth
    int t_in = 8;
    int t_out = 8;

    int d_model() const {
        return n_layers == 0 ? in_channels : base_channels << (n_layers - 1);
    }
    int d_head() const { return d_model() / heads; }
    int total_stride() const { return 1 << n_layers; }
};

inline void validate_config(const VistConfig& cfg) {
    require(cfg.in_channels >= 1, "config: in_channels must be positive");
    require(cfg.base_channels >= 1, "config: base_channels must be positive");
    require(cfg.n_layers >= 0, "config: n_layers must be nonnegative");
    require(cfg.blocks >= 0, "config: blocks must be nonnegative");
    require(cfg.t_in >= 1 && cfg.t_out >= 1, "config: clip lengths must be positive");
    for (int a = 0; a < 3; ++a) {
        require(cfg.window[size_t(a)] >= 1, "config: window extent must be positive");
        require(cfg.shift[size_t(a)] >= 0 && cfg.shift[size_t(a)] < cfg.window[size_t(a)],
                "config: shift must be in [0, window)");
    }
    if (cfg.blocks > 0) {
        require(cfg.heads >= 1, "config: heads must be positive");
        require(cfg.d_model() % cfg.heads == 0, "config: heads must divide the model dim");
    }
}

// ====== attention core ======

// Scaled dot-product logits Q K^T / sqrt(d_k); d_k is the feature width.
template <class T>
TensorT<T> attention_logits(const TensorT<T>& q, const TensorT<T>& k) {
    require(q.ndim() == 2 && k.ndim() == 2 && q.dim(1) == k.dim(1),
            "attention: Q and K must be [N,d] with a shared feature dim");
    auto logits = kernels::matmul(q, k, false, true);
    const T inv = T(1.0 / std::sqrt(double(q.dim(1))));
    for (auto& v : logits.data) v *= inv;
    return logits;
}

// Softmax rows of the logits; mask entries are added to the logits first so a
// large negative entry zeroes that weight. Mirrors the node path bit for bit.
template <class T>
TensorT<T> attention_weights(const TensorT<T>& q, const TensorT<T>& k,
                             const TensorT<T>* mask = nullptr) {
    auto logits = attention_logits(q, k);
    const int N = logits.dim(0), M = logits.dim(1);
    if (mask) require(mask->same_shape(logits), "attention: mask shape mismatch");
    TensorT<T> w(logits.shape);
    for (int i = 0; i < N; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (int j = 0; j < M; ++j) {
            T v = logits.at2(i, j) + (mask ? mask->at2(i, j) : T(0));
            mx = std::max(mx, v);
        }
        T Z = T(0);
        for (int j = 0; j < M; ++j) {
            T v = std::exp(logits.at2(i, j) + (mask ? mask->at2(i, j) : T(0)) - mx);
            w.at2(i, j) = v;
            Z += v;
        }
        for (int j = 0; j < M; ++j) w.at2(i, j) /= Z;
    }
    return w;
}

namespace detail {

template <class T>
void check_finite_logits(const TensorT<T>& logits) {
    for (const T& v : logits.data)
        if (!std::isfinite(v)) throw NumericError("attention logits are not finite");
}

}  // namespace detail

// Softmax(Q K^T / sqrt(d_k)) V on autograd nodes. Throws NumericError when
// the logits are not finite; masked entries underflow to exactly zero weight.
template <class T>
NodePtrT<T> attention_nodes(const NodePtrT<T>& q, const NodePtrT<T>& k, const NodePtrT<T>& v,
                            const TensorT<T>* mask = nullptr) {
    require(v->val.ndim() == 2 && v->val.dim(0) == k->val.dim(0),
            "attention: V rows must match K rows");
    auto logits = scale(matmul(q, k, false, true), T(1.0 / std::sqrt(double(q->val.dim(1)))));
    detail::check_finite_logits(logits->val);
    return matmul(softmax_rows(logits, mask), v);
}

// Raw single-window self-attention: Q = K = V = the token rows themselves.
template <class T>
NodePtrT<T> window_attention(const NodePtrT<T>& tokens, const TensorT<T>* mask = nullptr) {
    require(tokens->val.ndim() == 2, "window_attention: tokens must be [N,d]");
    return attention_nodes(tokens, tokens, tokens, mask);
}

template <class T>
TensorT<T> window_attention(const TensorT<T>& tokens, const TensorT<T>* mask = nullptr) {
    return window_attention(constant(tokens), mask)->val;
}

// ====== multi-head attention ======

// Window geometry plus the per-head projections. Head h maps tokens through
// q/k/v weights of width d_k = d_model / heads; the concatenated heads pass
// through the output projection.
template <class T>
struct WindowAttentionT {
    std::array<int, 3> window{2, 4, 4};
    std::array<int, 3> shift{1, 2, 2};
    int heads = 1;
    int d_model = 0;
    std::vector<LinearT<T>> wq, wk, wv;  // per head, d_model -> d_k, no bias
    LinearT<T> wo;                       // heads * d_k -> d_model, no bias

    int d_k() const { return d_model / heads; }
};

// zero_out starts the output projection at zero so a residual block around
// this attention is the identity at init.
template <class T>
WindowAttentionT<T> make_window_attention(ParamsT<T>& p, const std::string& prefix,
                                          const VistConfig& cfg, bool zero_out = true) {
    validate_config(cfg);
    require(cfg.heads >= 1, "attention: heads must be positive");
    require(cfg.d_model() % cfg.heads == 0, "attention: heads must divide the model dim");
    WindowAttentionT<T> a;
    a.window = cfg.window;
    a.shift = cfg.shift;
    a.heads = cfg.heads;
    a.d_model = cfg.d_model();
    const int dk = a.d_k();
    for (int h = 0; h < a.heads; ++h) {
        const std::string s = std::to_string(h);
        a.wq.emplace_back(p, prefix + ".q" + s, a.d_model, dk, false);
        a.wk.emplace_back(p, prefix + ".k" + s, a.d_model, dk, false);
        a.wv.emplace_back(p, prefix + ".v" + s, a.d_model, dk, false);
    }
    a.wo = LinearT<T>(p, prefix + ".o", a.heads * dk, a.d_model, false, zero_out);
    return a;
}

// Feature-dim concatenation of two [N,a] and [N,b] row matrices.
template <class T>
NodePtrT<T> concat_feature(const NodePtrT<T>& a, const NodePtrT<T>& b) {
    require(a->val.ndim() == 2 && b->val.ndim() == 2 && a->val.dim(0) == b->val.dim(0),
            "concat_feature: row count mismatch");
    const int N = a->val.dim(0), da = a->val.dim(1), db = b->val.dim(1);
    auto wide = concat_dim0(reshape(a, {N * da}), reshape(b, {N * db}));
    std::vector<int64_t> idx(size_t(N) * size_t(da + db));
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < da; ++j)
            idx[size_t(i) * size_t(da + db) + size_t(j)] = int64_t(i) * da + j;
        for (int j = 0; j < db; ++j)
            idx[size_t(i) * size_t(da + db) + size_t(da + j)] = int64_t(N) * da + int64_t(i) * db + j;
    }
    return gather(wide, std::move(idx), {N, da + db});
}

// Concat(head_1..head_H) W^O with head_h = Attention(X Wq_h, X Wk_h, X Wv_h).
template <class T>
NodePtrT<T> multi_head(const NodePtrT<T>& tokens, const WindowAttentionT<T>& a,
                       const TensorT<T>* mask = nullptr) {
    require(tokens->val.ndim() == 2, "multi_head: tokens must be [N,d]");
    require(tokens->val.dim(1) == a.d_model, "multi_head: token dim must match the model dim");
    NodePtrT<T> cat;
    for (int h = 0; h < a.heads; ++h) {
        auto head = attention_nodes(a.wq[size_t(h)](tokens), a.wk[size_t(h)](tokens),
                                    a.wv[size_t(h)](tokens), mask);
        // Heads concatenate along the feature dim; rows stay token-major.
        cat = h == 0 ? head : concat_feature(cat, head);
    }
    return a.wo(cat);
}

// ====== window partition and shift masks ======

// Token bookkeeping for one shifted-window arrangement over a [T,C,H,W]
// latent. Rows are window-major: window k owns rows [k*Nw, (k+1)*Nw). coords
// holds each row's original (t,h,w); fwd/inv are gather indices between the
// latent layout and the [N,C] token matrix.
struct WindowPartition {
    std::array<int, 3> extent{};  // (T, H, W)
    std::array<int, 3> window{};
    std::array<int, 3> shift{};   // effective shift; zero on full-extent axes
    int channels = 0;
    int tokens_per_window = 0;
    int num_windows = 0;
    std::vector<std::array<int, 3>> coords;
    std::vector<int64_t> fwd, inv;
};

namespace detail {

// Region id of a window-partition coordinate. With a cyclic shift s the last
// window on an axis holds a contiguous tail [L-w+s, L) and a wrapped head
// [0, s); ids 1 and 2 keep them from attending to each other. Unshifted axes
// are a single region.
inline int region_id(int q, int L, int w, int s) {
    if (s == 0) return 0;
    if (q < L - w) return 0;
    return q < L - s ? 1 : 2;
}

}  // namespace detail

inline WindowPartition make_window_partition(std::array<int, 3> extent, int channels,
                                             std::array<int, 3> window,
                                             std::array<int, 3> shift) {
    WindowPartition p;
    p.extent = extent;
    p.window = window;
    p.channels = channels;
    for (int a = 0; a < 3; ++a) {
        const int L = extent[size_t(a)], w = window[size_t(a)], s = shift[size_t(a)];
        require(w >= 1 && L >= 1, "window partition: extents must be positive");
        if (w > L) throw ValidationError("window partition: window larger than latent extent");
        require(L % w == 0, "window partition: window must divide latent extent");
        require(s >= 0 && s < w, "window partition: shift must be in [0, window)");
        // A full-extent axis has a single cyclic window; shifting it only
        // permutes tokens inside that window, so the shift is dropped.
        p.shift[size_t(a)] = w == L ? 0 : s;
    }
    const int T = extent[0], H = extent[1], W = extent[2];
    const int wt = window[0], wh = window[1], ww = window[2];
    p.tokens_per_window = wt * wh * ww;
    p.num_windows = (T / wt) * (H / wh) * (W / ww);
    const int64_t N = int64_t(p.num_windows) * p.tokens_per_window;
    p.coords.resize(size_t(N));
    p.fwd.resize(size_t(N) * size_t(channels));
    p.inv.resize(size_t(N) * size_t(channels));
    int64_t row = 0;
    for (int bt = 0; bt < T / wt; ++bt)
        for (int bh = 0; bh < H / wh; ++bh)
            for (int bw = 0; bw < W / ww; ++bw)
                for (int dt = 0; dt < wt; ++dt)
                    for (int dh = 0; dh < wh; ++dh)
                        for (int dw = 0; dw < ww; ++dw, ++row) {
                            // Shifted coordinate of this row, then the original
                            // latent cell it reads from.
                            const int qt = bt * wt + dt, qh = bh * wh + dh, qw = bw * ww + dw;
                            const int t = (qt + p.shift[0]) % T;
                            const int h = (qh + p.shift[1]) % H;
                            const int w = (qw + p.shift[2]) % W;
                            p.coords[size_t(row)] = {t, h, w};
                            for (int c = 0; c < channels; ++c) {
                                const int64_t latent =
                                    ((int64_t(t) * channels + c) * H + h) * W + w;
                                p.fwd[size_t(row) * size_t(channels) + size_t(c)] = latent;
                                p.inv[size_t(latent)] = row * channels + c;
                            }
                        }
    return p;
}

// Additive attention masks per window: 0 where the shifted coordinates share
// a region triple, a large negative value otherwise. Windows with a single
// region return an empty tensor (no mask needed).
template <class T>
std::vector<TensorT<T>> window_masks(const WindowPartition& p) {
    const T kBlocked = T(-1e9);
    std::vector<TensorT<T>> masks(size_t(p.num_windows));
    const int wt = p.window[0], wh = p.window[1], ww = p.window[2];
    const int T_ = p.extent[0], H_ = p.extent[1], W_ = p.extent[2];
    std::vector<int> ids(size_t(p.tokens_per_window));
    int win = 0;
    for (int bt = 0; bt < T_ / wt; ++bt)
        for (int bh = 0; bh < H_ / wh; ++bh)
            for (int bw = 0; bw < W_ / ww; ++bw, ++win) {
                bool uniform = true;
                int i = 0;
                for (int dt = 0; dt < wt; ++dt)
                    for (int dh = 0; dh < wh; ++dh)
                        for (int dw = 0; dw < ww; ++dw, ++i) {
                            const int rt = detail::region_id(bt * wt + dt, T_, wt, p.shift[0]);
                            const int rh = detail::region_id(bh * wh + dh, H_, wh, p.shift[1]);
                            const int rw = detail::region_id(bw * ww + dw, W_, ww, p.shift[2]);
                            ids[size_t(i)] = (rt * 3 + rh) * 3 + rw;
                            uniform = uniform && ids[size_t(i)] == ids[0];
                        }
                if (uniform) continue;
                TensorT<T> m({p.tokens_per_window, p.tokens_per_window});
                for (int r = 0; r < p.tokens_per_window; ++r)
                    for (int c = 0; c < p.tokens_per_window; ++c)
                        m.at2(r, c) = ids[size_t(r)] == ids[size_t(c)] ? T(0) : kBlocked;
                masks[size_t(win)] = std::move(m);
            }
    return masks;
}

// ====== translator block ======

template <class T>
struct TranslatorBlockT {
    LayerNormRowsT<T> norm;
    WindowAttentionT<T> attn;
};

template <class T>
TranslatorBlockT<T> make_translator_block(ParamsT<T>& p, const std::string& prefix,
                                          const VistConfig& cfg) {
    TranslatorBlockT<T> b;
    b.norm = LayerNormRowsT<T>(p, prefix + ".ln", cfg.d_model());
    b.attn = make_window_attention(p, prefix + ".at", cfg);
    return b;
}

// Pre-norm residual shifted-window attention over a [T,C,H,W] latent. Even
// layers use the unshifted arrangement; odd layers cyclically shift the token
// volume, and region masks keep wrapped tokens from mixing with the tail they
// land next to. The inverse shift is the inverse gather.
template <class T>
NodePtrT<T> shifted_block(const NodePtrT<T>& latent, const TranslatorBlockT<T>& block,
                          int layer_index) {
    require(latent->val.ndim() == 4, "shifted_block: latent must be [T,C,H,W]");
    const int T_ = latent->val.dim(0), C = latent->val.dim(1);
    const int H = latent->val.dim(2), W = latent->val.dim(3);
    require(C == block.attn.d_model, "shifted_block: latent channels must match the model dim");
    const bool odd = layer_index % 2 != 0;
    const std::array<int, 3> shift =
        odd ? block.attn.shift : std::array<int, 3>{0, 0, 0};
    auto part = make_window_partition({T_, H, W}, C, block.attn.window, shift);
    auto masks = window_masks<T>(part);

    const int64_t N = int64_t(part.num_windows) * part.tokens_per_window;
    auto tokens = gather(latent, part.fwd, {int(N), C});
    auto normed = block.norm(tokens);
    NodePtrT<T> out;
    for (int k = 0; k < part.num_windows; ++k) {
        auto rows = slice_dim0(normed, k * part.tokens_per_window,
                               (k + 1) * part.tokens_per_window);
        const TensorT<T>* mask =
            masks[size_t(k)].numel() > 0 ? &masks[size_t(k)] : nullptr;
        auto att = multi_head(rows, block.attn, mask);
        out = k == 0 ? att : concat_dim0(out, att);
    }
    auto restored = gather(out, part.inv, {T_, C, H, W});
    return add(latent, restored);
}

// ====== encoder / decoder / model ======

// Channel widths {in, c_1, .., c_n} for the conv stages.
inline std::vector<int> encoder_channels(const VistConfig& cfg) {
    std::vector<int> c{cfg.in_channels};
    for (int k = 1; k <= cfg.n_layers; ++k) c.push_back(cfg.base_channels << (k - 1));
    return c;
}

template <class T>
struct VistModelT {
    VistConfig cfg;
    ParamsT<T> params;
    std::vector<Conv2dT<T>> enc_conv;
    std::vector<LayerNormChannelT<T>> enc_norm;
    std::vector<Conv2dT<T>> dec_conv;
    std::vector<LayerNormChannelT<T>> dec_norm;  // between stages only
    std::vector<TranslatorBlockT<T>> blocks;
    NodePtrT<T> mix;  // [t_out, t_in] temporal map over latent frames
};

// The temporal map starts one-hot on the last observed frame, and residual
// blocks start as the identity, so a fresh model repeats the last frame.
template <class T>
VistModelT<T> make_vist_model(const VistConfig& cfg, uint64_t seed = 0x715f) {
    validate_config(cfg);
    VistModelT<T> m;
    m.cfg = cfg;
    m.params.rng.seed(seed);
    const auto ch = encoder_channels(cfg);
    for (int k = 0; k < cfg.n_layers; ++k) {
        const std::string s = std::to_string(k);
        m.enc_conv.emplace_back(m.params, "enc.c" + s, ch[size_t(k)], ch[size_t(k) + 1], 3);
        m.enc_norm.emplace_back(m.params, "enc.n" + s, ch[size_t(k) + 1]);
    }
    for (int k = cfg.n_layers; k >= 1; --k) {
        const std::string s = std::to_string(cfg.n_layers - k);
        m.dec_conv.emplace_back(m.params, "dec.c" + s, ch[size_t(k)], ch[size_t(k) - 1], 3);
        if (k > 1) m.dec_norm.emplace_back(m.params, "dec.n" + s, ch[size_t(k) - 1]);
    }
    for (int b = 0; b < cfg.blocks; ++b)
        m.blocks.push_back(make_translator_block(m.params, "tr.b" + std::to_string(b), cfg));
    TensorT<T> mix({cfg.t_out, cfg.t_in});
    for (int r = 0; r < cfg.t_out; ++r) mix.at2(r, cfg.t_in - 1) = T(1);
    m.mix = m.params.make("mix", std::move(mix));
    return m;
}

namespace detail {

// Every second row and column; equals a stride-2 convolution when applied
// right after the stride-1 conv.
template <class T>
NodePtrT<T> subsample2(const NodePtrT<T>& x) {
    const int C = x->val.dim(0), H = x->val.dim(1), W = x->val.dim(2);
    std::vector<int64_t> idx(size_t(C) * size_t(H / 2) * size_t(W / 2));
    int64_t i = 0;
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; h += 2)
            for (int w = 0; w < W; w += 2, ++i) idx[size_t(i)] = (int64_t(c) * H + h) * W + w;
    return gather(x, std::move(idx), {C, H / 2, W / 2});
}

template <class T>
NodePtrT<T> frame_of(const NodePtrT<T>& clip, int t) {
    auto f = slice_dim0(clip, t, t + 1);
    return reshape(f, {clip->val.dim(1), clip->val.dim(2), clip->val.dim(3)});
}

template <class T>
NodePtrT<T> stack_frames(const std::vector<NodePtrT<T>>& frames) {
    NodePtrT<T> out;
    for (size_t t = 0; t < frames.size(); ++t) {
        auto f = reshape(frames[t], {1, frames[t]->val.dim(0), frames[t]->val.dim(1),
                                     frames[t]->val.dim(2)});
        out = t == 0 ? f : concat_dim0(out, f);
    }
    return out;
}

}  // namespace detail

// ReLU(LN(Conv(x))) per stage with stride 2, applied to each frame.
template <class T>
NodePtrT<T> encode_nodes(const VistModelT<T>& m, const NodePtrT<T>& clip) {
    require(clip->val.ndim() == 4, "encode: clip must be [T,C,H,W]");
    require(clip->val.dim(1) == m.cfg.in_channels, "encode: channel count mismatch");
    const int stride = m.cfg.total_stride();
    if (clip->val.dim(2) % stride != 0 || clip->val.dim(3) % stride != 0)
        throw ValidationError("encode: spatial size must be divisible by the total stride");
    std::vector<NodePtrT<T>> latents;
    for (int t = 0; t < clip->val.dim(0); ++t) {
        auto x = detail::frame_of(clip, t);
        for (int k = 0; k < m.cfg.n_layers; ++k) {
            x = detail::subsample2(m.enc_conv[size_t(k)](x));
            x = relu(m.enc_norm[size_t(k)](x));
        }
        latents.push_back(x);
    }
    return detail::stack_frames(latents);
}

// Mirror of the encoder: per stage, nearest upsample then conv, with LN+ReLU
// between stages. The last conv output is the frame estimate.
template <class T>
NodePtrT<T> decode_nodes(const VistModelT<T>& m, const NodePtrT<T>& latent) {
    require(latent->val.ndim() == 4, "decode: latent must be [T,C,H,W]");
    require(latent->val.dim(1) == m.cfg.d_model(), "decode: latent channel mismatch");
    std::vector<NodePtrT<T>> frames;
    for (int t = 0; t < latent->val.dim(0); ++t) {
        auto x = detail::frame_of(latent, t);
        for (int k = 0; k < m.cfg.n_layers; ++k) {
            x = m.dec_conv[size_t(k)](upsample2x(x));
            if (k + 1 < m.cfg.n_layers) x = relu(m.dec_norm[size_t(k)](x));
        }
        frames.push_back(x);
    }
    return detail::stack_frames(frames);
}

template <class T>
NodePtrT<T> translate_nodes(const VistModelT<T>& m, NodePtrT<T> latent) {
    for (size_t b = 0; b < m.blocks.size(); ++b)
        latent = shifted_block(latent, m.blocks[b], int(b));
    return latent;
}

// Full predictor: encode, translate, map the t_in latent frames to t_out via
// the temporal matrix, decode.
template <class T>
NodePtrT<T> predict_nodes(const VistModelT<T>& m, const NodePtrT<T>& clip) {
    require(clip->val.dim(0) == m.cfg.t_in, "predict: clip length mismatch");
    auto latent = translate_nodes(m, encode_nodes(m, clip));
    const int C = latent->val.dim(1), H = latent->val.dim(2), W = latent->val.dim(3);
    auto rows = reshape(latent, {m.cfg.t_in, C * H * W});
    auto mixed = reshape(matmul(m.mix, rows), {m.cfg.t_out, C, H, W});
    return decode_nodes(m, mixed);
}

// Tensor-level wrappers for inference.
template <class T>
TensorT<T> encode(const VistModelT<T>& m, const TensorT<T>& clip) {
    return encode_nodes(m, constant(clip))->val;
}

template <class T>
TensorT<T> decode(const VistModelT<T>& m, const TensorT<T>& latent) {
    return decode_nodes(m, constant(latent))->val;
}

// Predicts t_prime future frames for a clip of exactly cfg.t_in frames.
// t_prime must match the trained horizon; outputs clamp to valid pixel range.
inline video::VideoClip predict(const video::VideoClip& clip, int t_prime,
                                const VistModelT<float>& m) {
    require(clip.T() == m.cfg.t_in, "predict: clip length mismatch");
    require(t_prime == m.cfg.t_out, "predict: horizon does not match the model");
    require(clip.C() == m.cfg.in_channels, "predict: channel count mismatch");
    TensorT<float> stacked({clip.T(), clip.C(), clip.H(), clip.W()});
    int64_t off = 0;
    for (const auto& f : clip.frames) {
        std::copy(f.data.begin(), f.data.end(), stacked.data.begin() + off);
        off += f.numel();
    }
    auto out = predict_nodes(m, constant(stacked))->val;
    video::VideoClip result;
    result.fps = clip.fps;
    const int64_t per = int64_t(clip.C()) * clip.H() * clip.W();
    for (int t = 0; t < t_prime; ++t) {
        video::Frame f({clip.C(), clip.H(), clip.W()});
        for (int64_t i = 0; i < per; ++i)
            f.data[size_t(i)] = std::clamp(out.data[size_t(t * per + i)], 0.0f, 1.0f);
        result.frames.push_back(std::move(f));
    }
    return result;
}

// Mean squared error between the prediction for `clip` and `target` frames.
template <class T>
NodePtrT<T> predictor_loss_nodes(const VistModelT<T>& m, const NodePtrT<T>& clip,
                                 const NodePtrT<T>& target) {
    require(target->val.dim(0) == m.cfg.t_out, "predictor loss: target length mismatch");
    return mean_all(square(sub(predict_nodes(m, clip), target)));
}

}  // namespace veil::vist
