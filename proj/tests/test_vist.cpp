#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "util/grad_check.hpp"
#include "veil/nn/adam.hpp"
#include "veil/nn/checkpoint.hpp"
#include "veil/vist/vist.hpp"

using namespace veil;
using namespace veil::vist;
using testutil::grad_check;

namespace {

template <class T>
double max_abs_diff_t(const TensorT<T>& a, const TensorT<T>& b) {
    REQUIRE(a.same_shape(b));
    double m = 0;
    for (int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(double(a.data[size_t(i)]) - double(b.data[size_t(i)])));
    return m;
}

// Clip of zero frames with a unit-amplitude square of side `side` whose top
// left corner moves by (vy, vx) per frame, starting at (y0, x0).
TensorT<float> square_clip(int T, int H, int W, int y0, int x0, int vy, int vx, int side) {
    TensorT<float> clip({T, 1, H, W});
    for (int t = 0; t < T; ++t) {
        const int y = y0 + vy * t, x = x0 + vx * t;
        for (int dy = 0; dy < side; ++dy)
            for (int dx = 0; dx < side; ++dx)
                clip.data[size_t(((int64_t(t) * H) + y + dy) * W + x + dx)] = 1.0f;
    }
    return clip;
}

}  // namespace

// ====== encoder / decoder ======

TEST_CASE("encoding halves the spatial extent per stage and widens channels") {
    VistConfig cfg;  // 3 -> 32 -> 64, two stride-2 stages
    auto m = make_vist_model<float>(cfg);
    std::mt19937_64 rng(5);
    auto clip = TensorT<float>::randn({8, 3, 32, 32}, rng);
    auto latent = encode(m, clip);
    CHECK(latent.shape == std::vector<int>{8, 64, 8, 8});
}

TEST_CASE("a zero clip maps to an exactly zero latent through fresh layers") {
    // Conv biases and norm shifts start at zero, so conv(0) = 0, the
    // eps-guarded norm keeps 0, and ReLU keeps 0.
    VistConfig cfg;
    cfg.in_channels = 1;
    cfg.base_channels = 4;
    auto m = make_vist_model<float>(cfg);
    auto latent = encode(m, TensorT<float>({4, 1, 16, 16}));
    for (float v : latent.data) CHECK(v == 0.0f);
}

TEST_CASE("encoding rejects spatial sizes the stride chain cannot halve") {
    VistConfig cfg;
    auto m = make_vist_model<float>(cfg);
    CHECK_THROWS_AS(encode(m, TensorT<float>({2, 3, 30, 32})), ValidationError);
    CHECK_THROWS_AS(encode(m, TensorT<float>({2, 1, 32, 32})), ValidationError);
}

TEST_CASE("decoding mirrors the encoder shape for every stage count") {
    std::mt19937_64 rng(7);
    for (int n : {0, 1, 2, 3}) {
        for (int base : {4, 8}) {
            for (int hw : {16, 32}) {
                VistConfig cfg;
                cfg.in_channels = n % 2 == 0 ? 3 : 1;
                cfg.base_channels = base;
                cfg.n_layers = n;
                cfg.blocks = 0;
                cfg.heads = 1;
                auto m = make_vist_model<float>(cfg);
                auto x = TensorT<float>::randn({2, cfg.in_channels, hw, hw}, rng);
                auto back = decode(m, encode(m, x));
                CHECK(back.shape == x.shape);
            }
        }
    }
}

// ====== raw window attention ======

TEST_CASE("a single token attends only to itself") {
    std::mt19937_64 rng(11);
    auto tok = TensorT<float>::randn({1, 5}, rng);
    auto out = window_attention(tok);
    CHECK(max_abs_diff_t(out, tok) == 0.0);
}

TEST_CASE("identical keys split the attention weight evenly") {
    std::mt19937_64 rng(13);
    auto row = TensorT<float>::randn({1, 6}, rng);
    TensorT<float> two({2, 6});
    for (int j = 0; j < 6; ++j) two.at2(0, j) = two.at2(1, j) = row.at2(0, j);
    auto w = attention_weights(two, two);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(w.at2(i, j) == 0.5f);
}

TEST_CASE("attention rows are probability distributions") {
    std::mt19937_64 rng(17);
    auto q = TensorT<float>::randn({12, 6}, rng);
    auto k = TensorT<float>::randn({12, 6}, rng);
    auto w = attention_weights(q, k);
    for (int i = 0; i < 12; ++i) {
        double s = 0;
        for (int j = 0; j < 12; ++j) {
            s += w.at2(i, j);
            CHECK(w.at2(i, j) >= 0.0f);
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
}

TEST_CASE("window attention matches a dense evaluation in double precision") {
    std::mt19937_64 rng(19);
    for (int N : {4, 64}) {
        const int d = N == 4 ? 8 : 16;
        auto tok = TensorT<float>::randn({N, d}, rng, 0.5f);
        auto out = window_attention(tok);

        // Brute-force softmax attention, no shared code with the node path.
        auto td = tok.cast<double>();
        TensorT<double> want({N, d});
        for (int i = 0; i < N; ++i) {
            std::vector<double> logits(static_cast<size_t>(N));
            double mx = -1e300;
            for (int j = 0; j < N; ++j) {
                double dot = 0;
                for (int c = 0; c < d; ++c) dot += td.at2(i, c) * td.at2(j, c);
                logits[size_t(j)] = dot / std::sqrt(double(d));
                mx = std::max(mx, logits[size_t(j)]);
            }
            double Z = 0;
            for (int j = 0; j < N; ++j) Z += std::exp(logits[size_t(j)] - mx);
            for (int j = 0; j < N; ++j) {
                const double w = std::exp(logits[size_t(j)] - mx) / Z;
                for (int c = 0; c < d; ++c) want.at2(i, c) += w * td.at2(j, c);
            }
        }
        CHECK(max_abs_diff_t(out.cast<double>(), want) < 1e-6);
    }
}

TEST_CASE("non-finite logits raise a numeric error") {
    TensorT<float> bad({2, 3});
    bad.at2(0, 0) = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(window_attention(bad), NumericError);
    bad.at2(0, 0) = std::numeric_limits<float>::quiet_NaN();
    VistConfig cfg;
    cfg.base_channels = 3;
    cfg.n_layers = 1;
    cfg.heads = 1;
    Params p;
    auto attn = make_window_attention(p, "a", cfg);
    CHECK_THROWS_AS(multi_head(constant(bad), attn), NumericError);
}

TEST_CASE("scaling the keys scales the logits linearly before the softmax") {
    std::mt19937_64 rng(23);
    auto q = TensorT<float>::randn({6, 8}, rng);
    auto k = TensorT<float>::randn({6, 8}, rng);
    auto base = attention_logits(q, k);
    for (float c : {2.0f, 0.5f}) {
        TensorT<float> kc = k;
        for (auto& v : kc.data) v *= c;
        auto scaled = attention_logits(q, kc);
        TensorT<float> want = base;
        for (auto& v : want.data) v *= c;
        CHECK(max_abs_diff_t(scaled, want) == 0.0);
    }
}

// ====== multi-head attention ======

TEST_CASE("one head with identity projections is raw window attention") {
    VistConfig cfg;
    cfg.base_channels = 6;
    cfg.n_layers = 1;  // model dim 6
    cfg.heads = 1;
    Params p;
    auto attn = make_window_attention(p, "a", cfg);
    for (const char* name : {"a.q0.w", "a.k0.w", "a.v0.w", "a.o.w"}) {
        auto node = p.find(name);
        for (int i = 0; i < 6; ++i) node->val.at2(i, i) = 1.0f;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                if (i != j) node->val.at2(i, j) = 0.0f;
    }
    std::mt19937_64 rng(29);
    auto tok = TensorT<float>::randn({5, 6}, rng);
    auto got = multi_head(constant(tok), attn)->val;
    auto want = window_attention(tok);
    CHECK(max_abs_diff_t(got, want) == 0.0);
}

TEST_CASE("multi-head output keeps the token shape for every head count") {
    std::mt19937_64 rng(31);
    auto tok = TensorT<float>::randn({10, 8}, rng);
    for (int H : {1, 2, 4, 8}) {
        VistConfig cfg;
        cfg.base_channels = 8;
        cfg.n_layers = 1;
        cfg.heads = H;
        Params p;
        auto attn = make_window_attention(p, "a", cfg, false);
        auto out = multi_head(constant(tok), attn)->val;
        CHECK(out.shape == std::vector<int>{10, 8});
    }
}

TEST_CASE("two heads match the brute-force per-head computation") {
    VistConfig cfg;
    cfg.base_channels = 8;
    cfg.n_layers = 1;
    cfg.heads = 2;
    Params p;
    auto attn = make_window_attention(p, "a", cfg, false);
    p.randomize(41, 0.4f);
    std::mt19937_64 rng(43);
    auto tok = TensorT<float>::randn({8, 8}, rng, 0.5f);
    auto got = multi_head(constant(tok), attn)->val;

    // Independent double-precision evaluation straight from the parameters.
    const int N = 8, d = 8, dk = 4;
    auto td = tok.cast<double>();
    TensorT<double> cat({N, d});
    for (int h = 0; h < 2; ++h) {
        auto wq = p.find("a.q" + std::to_string(h) + ".w")->val.cast<double>();
        auto wk = p.find("a.k" + std::to_string(h) + ".w")->val.cast<double>();
        auto wv = p.find("a.v" + std::to_string(h) + ".w")->val.cast<double>();
        TensorT<double> Q({N, dk}), K({N, dk}), V({N, dk});
        for (int i = 0; i < N; ++i)
            for (int o = 0; o < dk; ++o)
                for (int c = 0; c < d; ++c) {
                    Q.at2(i, o) += td.at2(i, c) * wq.at2(o, c);
                    K.at2(i, o) += td.at2(i, c) * wk.at2(o, c);
                    V.at2(i, o) += td.at2(i, c) * wv.at2(o, c);
                }
        for (int i = 0; i < N; ++i) {
            std::vector<double> logits(static_cast<size_t>(N));
            double mx = -1e300;
            for (int j = 0; j < N; ++j) {
                double dot = 0;
                for (int c = 0; c < dk; ++c) dot += Q.at2(i, c) * K.at2(j, c);
                logits[size_t(j)] = dot / std::sqrt(double(dk));
                mx = std::max(mx, logits[size_t(j)]);
            }
            double Z = 0;
            for (int j = 0; j < N; ++j) Z += std::exp(logits[size_t(j)] - mx);
            for (int j = 0; j < N; ++j) {
                const double w = std::exp(logits[size_t(j)] - mx) / Z;
                for (int c = 0; c < dk; ++c) cat.at2(i, h * dk + c) += w * V.at2(j, c);
            }
        }
    }
    auto wo = p.find("a.o.w")->val.cast<double>();
    TensorT<double> want({N, d});
    for (int i = 0; i < N; ++i)
        for (int o = 0; o < d; ++o)
            for (int c = 0; c < d; ++c) want.at2(i, o) += cat.at2(i, c) * wo.at2(o, c);
    CHECK(max_abs_diff_t(got.cast<double>(), want) < 1e-6);
}

TEST_CASE("multi-head rejects tokens whose width differs from the model dim") {
    VistConfig cfg;
    cfg.base_channels = 8;
    cfg.n_layers = 1;
    cfg.heads = 2;
    Params p;
    auto attn = make_window_attention(p, "a", cfg);
    TensorT<float> tok({4, 9});
    CHECK_THROWS_AS(multi_head(constant(tok), attn), ValidationError);
}

// ====== window partition and shift masks ======

TEST_CASE("shift masks block exactly the wrapped versus tail token pairs") {
    // Independent rule: inside one shifted window, a token whose original
    // coordinate wrapped past the end of an axis may only mix with tokens
    // that wrapped on the same axes.
    const std::array<int, 3> ext{4, 4, 4}, win{2, 2, 2}, shf{1, 1, 1};
    auto part = make_window_partition(ext, 1, win, shf);
    auto masks = window_masks<float>(part);
    REQUIRE(part.tokens_per_window == 8);
    REQUIRE(part.num_windows == 8);

    for (int k = 0; k < part.num_windows; ++k) {
        for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < 8; ++c) {
                const auto& a = part.coords[size_t(k * 8 + r)];
                const auto& b = part.coords[size_t(k * 8 + c)];
                bool allowed = true;
                for (int axis = 0; axis < 3; ++axis) {
                    // Window origin in shifted coordinates, then whether each
                    // token's original coordinate wrapped around the axis.
                    const int L = ext[size_t(axis)], w = win[size_t(axis)];
                    const int s = part.shift[size_t(axis)];
                    const int qa = (a[size_t(axis)] - s + L) % L;
                    const int qb = (b[size_t(axis)] - s + L) % L;
                    REQUIRE(qa / w == qb / w);  // same window by construction
                    const bool wrap_a = qa + s >= L;
                    const bool wrap_b = qb + s >= L;
                    allowed = allowed && wrap_a == wrap_b;
                }
                const float got =
                    masks[size_t(k)].numel() > 0 ? masks[size_t(k)].at2(r, c) : 0.0f;
                CHECK(got == (allowed ? 0.0f : -1e9f));
            }
        }
    }
}

TEST_CASE("a full-extent axis drops its shift instead of masking neighbors") {
    // One cyclic window covers the whole axis; every token pair is adjacent
    // there, so no blocking may happen.
    auto part = make_window_partition({2, 4, 4}, 1, {2, 2, 2}, {1, 1, 1});
    CHECK(part.shift == std::array<int, 3>{0, 1, 1});
}

// ====== shifted translator block ======

TEST_CASE("zero shift makes the odd layer identical to the even layer") {
    VistConfig cfg;
    cfg.base_channels = 8;
    cfg.n_layers = 1;
    cfg.heads = 2;
    cfg.window = {2, 2, 2};
    cfg.shift = {1, 1, 1};
    Params p;
    auto block = make_translator_block(p, "b", cfg);
    p.randomize(51, 0.3f);
    std::mt19937_64 rng(53);
    auto latent = constant(TensorT<float>::randn({4, 8, 4, 4}, rng));
    auto even = shifted_block(latent, block, 0)->val;
    block.attn.shift = {0, 0, 0};
    auto odd = shifted_block(latent, block, 1)->val;
    CHECK(max_abs_diff_t(even, odd) == 0.0);
}

TEST_CASE("a block with a zero output projection is the identity map") {
    // The residual carries the input through untouched, so the shift and its
    // inverse must cancel exactly.
    VistConfig cfg;
    cfg.base_channels = 8;
    cfg.n_layers = 1;
    cfg.heads = 2;
    cfg.window = {2, 2, 2};
    cfg.shift = {1, 1, 1};
    Params p;
    auto block = make_translator_block(p, "b", cfg);  // W^O starts at zero
    std::mt19937_64 rng(59);
    auto x = TensorT<float>::randn({4, 8, 4, 4}, rng);
    for (int layer : {0, 1}) {
        auto y = shifted_block(constant(x), block, layer)->val;
        CHECK(max_abs_diff_t(y, x) == 0.0);
    }
}

TEST_CASE("the shifted block matches a dense masked attention evaluation") {
    VistConfig cfg;
    cfg.base_channels = 8;
    cfg.n_layers = 1;
    cfg.heads = 2;
    cfg.window = {2, 2, 2};
    cfg.shift = {1, 1, 1};
    Params p;
    auto block = make_translator_block(p, "b", cfg);
    p.randomize(61, 0.3f);
    std::mt19937_64 rng(67);
    const int T = 4, C = 8, H = 4, W = 4, N = T * H * W, dk = 4;
    auto latent = TensorT<float>::randn({T, C, H, W}, rng, 0.5f);
    auto got = shifted_block(constant(latent), block, 1)->val;

    // Dense oracle over all 64 tokens in natural order: pairs may attend only
    // when they share a shifted window and wrapped on the same axes.
    const std::array<int, 3> ext{T, H, W}, win{2, 2, 2}, shf{1, 1, 1};
    auto coord = [&](int i) { return std::array<int, 3>{i / (H * W), (i / W) % H, i % W}; };
    auto allowed = [&](int i, int j) {
        for (int axis = 0; axis < 3; ++axis) {
            const int L = ext[size_t(axis)], w = win[size_t(axis)], s = shf[size_t(axis)];
            const int qa = (coord(i)[size_t(axis)] - s + L) % L;
            const int qb = (coord(j)[size_t(axis)] - s + L) % L;
            if (qa / w != qb / w) return false;
            if ((qa + s >= L) != (qb + s >= L)) return false;
        }
        return true;
    };

    // Row-normalized tokens in double, straight from the parameters.
    auto g = p.find("b.ln.g")->val.cast<double>();
    auto bb = p.find("b.ln.b")->val.cast<double>();
    TensorT<double> X({N, C});
    for (int i = 0; i < N; ++i) {
        const auto [t, h, w] = coord(i);
        double mu = 0, var = 0;
        std::vector<double> row(static_cast<size_t>(C));
        for (int c = 0; c < C; ++c) {
            row[size_t(c)] = double(latent.data[size_t(((int64_t(t) * C + c) * H + h) * W + w)]);
            mu += row[size_t(c)];
        }
        mu /= C;
        for (int c = 0; c < C; ++c) var += (row[size_t(c)] - mu) * (row[size_t(c)] - mu);
        var /= C;
        for (int c = 0; c < C; ++c)
            X.at2(i, c) = (row[size_t(c)] - mu) / std::sqrt(var + 1e-5) * g.data[size_t(c)] +
                          bb.data[size_t(c)];
    }
    TensorT<double> cat({N, C});
    for (int head = 0; head < 2; ++head) {
        auto wq = p.find("b.at.q" + std::to_string(head) + ".w")->val.cast<double>();
        auto wk = p.find("b.at.k" + std::to_string(head) + ".w")->val.cast<double>();
        auto wv = p.find("b.at.v" + std::to_string(head) + ".w")->val.cast<double>();
        TensorT<double> Q({N, dk}), K({N, dk}), V({N, dk});
        for (int i = 0; i < N; ++i)
            for (int o = 0; o < dk; ++o)
                for (int c = 0; c < C; ++c) {
                    Q.at2(i, o) += X.at2(i, c) * wq.at2(o, c);
                    K.at2(i, o) += X.at2(i, c) * wk.at2(o, c);
                    V.at2(i, o) += X.at2(i, c) * wv.at2(o, c);
                }
        for (int i = 0; i < N; ++i) {
            double mx = -1e300;
            std::vector<double> logits(size_t(N), -1e300);
            for (int j = 0; j < N; ++j) {
                if (!allowed(i, j)) continue;
                double dot = 0;
                for (int c = 0; c < dk; ++c) dot += Q.at2(i, c) * K.at2(j, c);
                logits[size_t(j)] = dot / std::sqrt(double(dk));
                mx = std::max(mx, logits[size_t(j)]);
            }
            double Z = 0;
            for (int j = 0; j < N; ++j)
                if (allowed(i, j)) Z += std::exp(logits[size_t(j)] - mx);
            for (int j = 0; j < N; ++j) {
                if (!allowed(i, j)) continue;
                const double w = std::exp(logits[size_t(j)] - mx) / Z;
                for (int c = 0; c < dk; ++c) cat.at2(i, head * dk + c) += w * V.at2(j, c);
            }
        }
    }
    auto wo = p.find("b.at.o.w")->val.cast<double>();
    TensorT<double> want = latent.cast<double>();
    for (int i = 0; i < N; ++i) {
        const auto [t, h, w] = coord(i);
        for (int o = 0; o < C; ++o) {
            double acc = 0;
            for (int c = 0; c < C; ++c) acc += cat.at2(i, c) * wo.at2(o, c);
            want.data[size_t(((int64_t(t) * C + o) * H + h) * W + w)] += acc;
        }
    }
    CHECK(max_abs_diff_t(got.cast<double>(), want) < 1e-6);
}

TEST_CASE("a window larger than the latent extent is rejected") {
    VistConfig cfg;
    cfg.base_channels = 8;
    cfg.n_layers = 1;
    cfg.heads = 2;
    cfg.window = {4, 2, 2};
    cfg.shift = {1, 1, 1};
    Params p;
    auto block = make_translator_block(p, "b", cfg);
    TensorT<float> latent({2, 8, 4, 4});
    CHECK_THROWS_AS(shifted_block(constant(latent), block, 0), ValidationError);
}

// ====== prediction ======

TEST_CASE("a fresh stub model repeats the last observed frame") {
    VistConfig cfg;
    cfg.in_channels = 1;
    cfg.n_layers = 0;  // encoder and decoder are identity maps
    cfg.blocks = 0;
    cfg.heads = 1;
    cfg.t_in = 4;
    cfg.t_out = 3;
    auto m = make_vist_model<float>(cfg);
    std::mt19937_64 rng(71);
    video::VideoClip clip;
    clip.fps = 20.0;
    for (int t = 0; t < 4; ++t)
        clip.frames.push_back(TensorT<float>::uniform({1, 8, 8}, rng));
    auto out = predict(clip, 3, m);
    REQUIRE(out.T() == 3);
    CHECK(out.fps == 20.0);
    for (int t = 0; t < 3; ++t)
        CHECK(max_abs_diff_t(out.frames[size_t(t)], clip.frames[3]) == 0.0);
}

TEST_CASE("prediction validates clip length and horizon") {
    VistConfig cfg;
    cfg.in_channels = 1;
    cfg.n_layers = 0;
    cfg.blocks = 0;
    cfg.heads = 1;
    cfg.t_in = 4;
    cfg.t_out = 2;
    auto m = make_vist_model<float>(cfg);
    std::mt19937_64 rng(73);
    video::VideoClip clip;
    for (int t = 0; t < 3; ++t)
        clip.frames.push_back(TensorT<float>::uniform({1, 8, 8}, rng));
    CHECK_THROWS_AS(predict(clip, 2, m), ValidationError);
    clip.frames.push_back(TensorT<float>::uniform({1, 8, 8}, rng));
    CHECK_THROWS_AS(predict(clip, 3, m), ValidationError);
    CHECK(predict(clip, 2, m).T() == 2);
}

TEST_CASE("the full predictor keeps the frame geometry on the future horizon") {
    VistConfig cfg;
    cfg.in_channels = 1;
    cfg.base_channels = 4;
    cfg.n_layers = 1;
    cfg.heads = 2;
    cfg.window = {2, 4, 4};
    cfg.shift = {1, 2, 2};
    cfg.blocks = 2;
    cfg.t_in = 4;
    cfg.t_out = 2;
    auto m = make_vist_model<float>(cfg);
    std::mt19937_64 rng(79);
    auto clip = constant(TensorT<float>::randn({4, 1, 16, 16}, rng));
    auto out = predict_nodes(m, clip);
    CHECK(out->val.shape == std::vector<int>{2, 1, 16, 16});
}

TEST_CASE("training on moving squares beats the repeat-last-frame baseline") {
    VistConfig cfg;
    cfg.in_channels = 1;
    cfg.base_channels = 16;
    cfg.n_layers = 1;
    cfg.heads = 2;
    cfg.window = {2, 4, 4};
    cfg.shift = {1, 2, 2};
    cfg.blocks = 2;
    cfg.t_in = 4;
    cfg.t_out = 2;
    auto m = make_vist_model<float>(cfg, 0x90d);

    // Squares drift one pixel down-right per frame; starts keep the whole
    // 6-frame path inside the 16x16 canvas.
    const int side = 4, H = 16, W = 16;
    auto sample = [&](std::mt19937_64& r) {
        std::uniform_int_distribution<int> pos(0, H - side - (cfg.t_in + cfg.t_out - 1));
        const int y0 = pos(r), x0 = pos(r);
        auto full = square_clip(cfg.t_in + cfg.t_out, H, W, y0, x0, 1, 1, side);
        TensorT<float> past({cfg.t_in, 1, H, W}), future({cfg.t_out, 1, H, W});
        const int64_t per = int64_t(H) * W;
        std::copy_n(full.data.begin(), size_t(cfg.t_in * per), past.data.begin());
        std::copy_n(full.data.begin() + cfg.t_in * per, size_t(cfg.t_out * per),
                    future.data.begin());
        return std::pair{past, future};
    };

    std::mt19937_64 train_rng(83);
    AdamT<float> opt(m.params);
    for (int step = 0; step < 300; ++step) {
        auto [past, future] = sample(train_rng);
        auto loss = predictor_loss_nodes(m, constant(past), constant(future));
        backward(loss);
        opt.step(m.params, 3e-3f);
    }

    std::mt19937_64 eval_rng(89);
    double model_mse = 0, persist_mse = 0;
    const int eval_clips = 20;
    for (int e = 0; e < eval_clips; ++e) {
        auto [past, future] = sample(eval_rng);
        auto pred = predict_nodes(m, constant(past))->val;
        const int64_t per = int64_t(H) * W;
        for (int64_t i = 0; i < future.numel(); ++i) {
            const double dm = double(pred.data[size_t(i)]) - double(future.data[size_t(i)]);
            // Persistence repeats the last observed frame across the horizon.
            const double dp = double(past.data[size_t((cfg.t_in - 1) * per + i % per)]) -
                              double(future.data[size_t(i)]);
            model_mse += dm * dm;
            persist_mse += dp * dp;
        }
    }
    model_mse /= double(eval_clips);
    persist_mse /= double(eval_clips);
    CHECK(persist_mse > 0);
    CHECK(model_mse < persist_mse);
}

// ====== gradients and checkpoints ======

TEST_CASE("one translator block passes a finite-difference gradient check") {
    VistConfig cfg;
    cfg.in_channels = 1;
    cfg.base_channels = 8;
    cfg.n_layers = 1;
    cfg.heads = 2;
    cfg.window = {2, 2, 2};
    cfg.shift = {1, 1, 1};
    cfg.blocks = 1;
    ParamsT<double> p;
    auto block = make_translator_block(p, "b", cfg);
    p.randomize(97, 0.25);
    std::mt19937_64 rng(101);
    auto latent = TensorT<double>::randn({2, 8, 4, 4}, rng, 0.5);
    auto build = [&]() { return sum_all(square(shifted_block(constant(latent), block, 1))); };
    auto res = grad_check(p, build, 4, rng);
    INFO(res.worst_param);
    CHECK(res.max_rel < 1e-3);
}

TEST_CASE("predictor parameters survive a checkpoint round trip") {
    VistConfig cfg;
    cfg.in_channels = 1;
    cfg.base_channels = 4;
    cfg.n_layers = 1;
    cfg.heads = 2;
    cfg.window = {2, 2, 2};
    cfg.shift = {1, 1, 1};
    cfg.blocks = 1;
    cfg.t_in = 4;
    cfg.t_out = 2;
    auto a = make_vist_model<float>(cfg, 1);
    a.params.randomize(103, 0.2f);
    std::array<uint8_t, 32> hash{};
    hash[0] = 0x7e;
    const std::string path = "vist_ckpt_test.bin";
    save_checkpoint(path, a.params, hash);
    auto b = make_vist_model<float>(cfg, 2);
    load_checkpoint(path, b.params, hash);
    std::remove(path.c_str());
    for (size_t i = 0; i < a.params.items.size(); ++i)
        CHECK(max_abs_diff_t(a.params.items[i].second->val, b.params.items[i].second->val) ==
              0.0);
}
