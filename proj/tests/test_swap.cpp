#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "util/grad_check.hpp"
#include "veil/diffusion/swap.hpp"
#include "veil/nn/adam.hpp"

using namespace veil;
using namespace veil::diffusion;
using testutil::grad_check;

namespace {

double mse(const TensorT<float>& a, const TensorT<float>& b) {
    double s = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        s += d * d;
    }
    return s / double(a.numel());
}

double cos_of(const TensorT<float>& u, const TensorT<float>& v) {
    double d = 0, nu = 0, nv = 0;
    for (int64_t i = 0; i < u.numel(); ++i) {
        d += double(u.data[i]) * double(v.data[i]);
        nu += double(u.data[i]) * double(u.data[i]);
        nv += double(v.data[i]) * double(v.data[i]);
    }
    return d / std::sqrt(nu * nv);
}

// Gray frame with a soft bright blob; the blob position is the "identity".
TensorT<float> blob_frame(int H, int W, double ch, double cw, uint64_t jitter_seed) {
    std::mt19937_64 rng(jitter_seed);
    std::normal_distribution<double> j(0.0, 0.4);
    const double bh = ch + j(rng), bw = cw + j(rng);
    TensorT<float> f({1, H, W});
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            const double d2 = (h - bh) * (h - bh) + (w - bw) * (w - bw);
            f.at3(0, h, w) = float(0.1 + 0.85 * std::exp(-d2 / 18.0));
        }
    return f;
}

}  // namespace

// ====== schedules ======

TEST_CASE("noise schedule validation") {
    CHECK_THROWS_AS(make_noise_schedule({}), ValidationError);
    CHECK_THROWS_AS(make_noise_schedule({0.5, 0.3}), ValidationError);
    CHECK_THROWS_AS(make_noise_schedule({1.0}), ValidationError);
    CHECK_THROWS_AS(make_noise_schedule({-0.1}), ValidationError);

    auto s = linear_schedule(100);
    CHECK(s.betas.front() == doctest::Approx(1e-4));
    CHECK(s.betas.back() == doctest::Approx(2e-2));
    for (size_t i = 1; i < s.alpha_bar.size(); ++i) CHECK(s.alpha_bar[i] < s.alpha_bar[i - 1]);

    auto frozen = make_noise_schedule({0.0, 0.0, 0.0});
    for (double ab : frozen.alpha_bar) CHECK(ab == 1.0);
}

TEST_CASE("q_sample closed form") {
    std::mt19937_64 rng(3);
    auto x0 = TensorT<float>::uniform({1, 6, 6}, rng);
    auto noise = TensorT<float>::randn({1, 6, 6}, rng);

    auto frozen = make_noise_schedule({0.0, 0.0});
    for (int t = 1; t <= 2; ++t) CHECK(max_abs_diff(q_sample(x0, t, noise, frozen), x0) == 0.0);

    // abar = 0.25 with a single step of beta = 0.75; zero noise halves x0.
    auto quarter = make_noise_schedule({0.75});
    TensorT<float> ones({1, 6, 6}, 1.0f);
    TensorT<float> zeros({1, 6, 6});
    auto xt = q_sample(ones, 1, zeros, quarter);
    CHECK(xt.data[0] == doctest::Approx(0.5f));

    // Deep schedule: x_T is the noise up to a sqrt(abar_T) remnant of x0.
    auto deep = make_noise_schedule(std::vector<double>(40, 0.5));
    const double remnant = std::sqrt(deep.alpha_bar.back());
    auto xT = q_sample(x0, 40, noise, deep);
    double worst = 0;
    for (int64_t i = 0; i < xT.numel(); ++i)
        worst = std::max(worst, std::abs(double(xT.data[i]) - double(noise.data[i])));
    CHECK(worst <= remnant * 1.0 + 1e-6);

    CHECK_THROWS_AS(q_sample(x0, 0, noise, frozen), ValidationError);
    CHECK_THROWS_AS(q_sample(x0, 3, noise, frozen), ValidationError);
}

TEST_CASE("q_sample marginal variance matches the closed form") {
    auto s = linear_schedule(100);
    const int t = 60;
    const double ab = s.alpha_bar[t - 1];
    std::mt19937_64 rng(9);
    auto x0 = TensorT<double>::randn({1, 100, 100}, rng, 2.0);
    auto noise = TensorT<double>::randn({1, 100, 100}, rng, 1.0);
    auto xt = q_sample(x0, t, noise, s);
    double mean = 0;
    for (double v : xt.data) mean += v;
    mean /= double(xt.numel());
    double var = 0;
    for (double v : xt.data) var += (v - mean) * (v - mean);
    var /= double(xt.numel() - 1);
    const double expect = ab * 4.0 + (1.0 - ab);
    CHECK(var == doctest::Approx(expect).epsilon(0.05));
}

// ====== reverse step ======

TEST_CASE("p_step freezes when beta and sigma vanish") {
    auto frozen = make_noise_schedule({0.0, 0.0});
    std::mt19937_64 rng(5);
    auto x = TensorT<float>::randn({1, 4, 4}, rng);
    auto eps = TensorT<float>::randn({1, 4, 4}, rng);
    CHECK(max_abs_diff(p_step(x, 2, eps, frozen), x) == 0.0);
}

TEST_CASE("reverse trajectory with a perfect denoiser returns to the clean image") {
    // Oracle denoiser: report exactly the noise content of the current state,
    // (x_t - sqrt(abar_t) x0) / sqrt(1 - abar_t). Deterministic steps then
    // contract the noise component to zero by t = 1.
    auto s = linear_schedule(50, 1e-3, 0.08);
    std::mt19937_64 rng(11);
    auto x0 = TensorT<float>::uniform({1, 8, 8}, rng);
    auto eps = TensorT<float>::randn({1, 8, 8}, rng);
    auto x = q_sample(x0, 50, eps, s);
    const double start_mse = mse(x, x0);
    CHECK(start_mse > 0.1);
    for (int t = 50; t >= 1; --t) {
        const double ab = s.alpha_bar[static_cast<size_t>(t - 1)];
        TensorT<float> oracle(x.shape);
        for (int64_t i = 0; i < x.numel(); ++i)
            oracle.data[i] = float((double(x.data[i]) - std::sqrt(ab) * double(x0.data[i])) /
                                   std::sqrt(1.0 - ab));
        x = p_step(x, t, oracle, s);
    }
    CHECK(mse(x, x0) < start_mse);
    CHECK(mse(x, x0) < 1e-8);
}

TEST_CASE("p_step rejects non-finite denoiser output") {
    auto s = linear_schedule(10);
    TensorT<float> x({1, 2, 2});
    TensorT<float> eps({1, 2, 2});
    eps.data[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(p_step(x, 4, eps, s), NumericError);
}

// ====== mask schedule ======

TEST_CASE("mask ramp endpoints, interior value and cap") {
    auto ms = make_mask_schedule(TensorT<float>({8, 8}, 1.0f), 100, 50);
    CHECK(mask_at(ms, 100).data[0] == 0.0f);
    CHECK(mask_at(ms, 60).data[0] == doctest::Approx(0.8f));
    CHECK(mask_at(ms, 25).data[0] == 1.0f);
    CHECK_THROWS_AS(mask_at(ms, 101), ValidationError);
    CHECK_THROWS_AS(mask_at(ms, -1), ValidationError);
    CHECK_THROWS_AS(make_mask_schedule(TensorT<float>({8, 8}, 1.0f), 100, 0), ValidationError);
    CHECK_THROWS_AS(make_mask_schedule(TensorT<float>({8, 8}, 2.0f), 100, 50), ValidationError);
}

TEST_CASE("mask ramp is monotone in reverse time and stays in the unit box") {
    std::mt19937_64 rng(13);
    auto U = TensorT<float>::uniform({1, 6, 6}, rng);
    auto ms = make_mask_schedule(U, 80, 30);
    auto prev = mask_at(ms, 80);
    for (int t = 79; t >= 0; t -= 7) {
        auto cur = mask_at(ms, t);
        for (int64_t i = 0; i < cur.numel(); ++i) {
            CHECK(cur.data[i] >= prev.data[i]);
            CHECK(cur.data[i] >= 0.0f);
            CHECK(cur.data[i] <= 1.0f);
        }
        prev = cur;
    }
}

TEST_CASE("blended step interpolates the two pathways under the mask") {
    auto ms = make_mask_schedule(TensorT<float>({4, 4}, 1.0f), 100, 50);
    TensorT<float> x({2, 4, 4}, 0.3f);
    auto zeros_path = [](const TensorT<float>& xt, int) { return TensorT<float>(xt.shape); };
    auto ones_path = [](const TensorT<float>& xt, int) {
        return TensorT<float>(xt.shape, 1.0f);
    };

    auto at_T = blended_step<float>(x, 100, zeros_path, ones_path, ms);
    CHECK(max_abs_diff(at_T, TensorT<float>({2, 4, 4})) == 0.0);
    auto capped = blended_step<float>(x, 25, zeros_path, ones_path, ms);
    CHECK(max_abs_diff(capped, TensorT<float>({2, 4, 4}, 1.0f)) == 0.0);
    auto mid = blended_step<float>(x, 75, zeros_path, ones_path, ms);
    for (float v : mid.data) CHECK(v == doctest::Approx(0.5f));

    auto bad_path = [](const TensorT<float>& xt, int) {
        return TensorT<float>({2, 2, 2});
    };
    CHECK_THROWS_AS(blended_step<float>(x, 75, bad_path, ones_path, ms), ValidationError);
}

// ====== embedder ======

TEST_CASE("identity embedding is unit norm, including on degenerate frames") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 5; ++i) {
        auto f = TensorT<float>::uniform({3, 16, 16}, rng);
        auto e = embed(f);
        CHECK(e.numel() == 64);
        double n = 0;
        for (float v : e.data) n += double(v) * double(v);
        CHECK(n == doctest::Approx(1.0).epsilon(1e-5));
    }
    auto z = embed(TensorT<float>({1, 8, 8}));
    double n = 0;
    for (float v : z.data) n += double(v) * double(v);
    CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(embed(TensorT<float>({1, 12, 12})), ValidationError);
}

// ====== cover-image loss ======

TEST_CASE("cover-image loss hand values") {
    TensorT<float> eps({1, 4, 4}, 0.25f);
    TensorT<float> u({4});
    TensorT<float> v({4});
    u.data = {1, 0, 0, 0};
    v.data = {1, 0, 0, 0};
    CHECK(cover_image_loss(eps, eps, u, v) == doctest::Approx(0.0f));

    v.data = {0, 1, 0, 0};  // orthogonal
    CHECK(cover_image_loss(eps, eps, u, v) == doctest::Approx(1.0f));

    v.data = {-1, 0, 0, 0};  // opposite
    CHECK(cover_image_loss(eps, eps, u, v) == doctest::Approx(2.0f));

    TensorT<float> zero({4});
    CHECK_THROWS_AS(cover_image_loss(eps, eps, u, zero), ValidationError);
    CHECK_THROWS_AS(cover_image_loss(eps, eps, zero, v), ValidationError);
}

// ====== denoiser ======

TEST_CASE("fresh denoiser ignores the identity embedding") {
    DenoiserConfig cfg;
    cfg.channels = 1;
    cfg.base = 4;
    cfg.t_steps = 10;
    auto net = make_denoiser<float>(cfg, 23);
    std::mt19937_64 rng(29);
    auto x = TensorT<float>::uniform({1, 8, 8}, rng);
    auto emb = embed(TensorT<float>::uniform({1, 8, 8}, rng));
    auto a = denoise(net, x, 5, TensorT<float>({64}));
    auto b = denoise(net, x, 5, emb);
    CHECK(max_abs_diff(a, b) == 0.0);
    CHECK_THROWS_AS(denoise(net, x, 11, emb), ValidationError);
    CHECK_THROWS_AS(denoise(net, TensorT<float>({1, 6, 6}), 5, emb), ValidationError);
}

TEST_CASE("combined noise and identity objective passes the gradient check") {
    DenoiserConfig cfg;
    cfg.channels = 1;
    cfg.base = 3;
    cfg.t_steps = 10;
    auto net = make_denoiser<double>(cfg, 31);
    net.params.randomize(37, 0.05);

    auto s = linear_schedule(10, 1e-3, 0.2);
    const int t = 6;
    const double ab = s.alpha_bar[t - 1];
    std::mt19937_64 rng(41);
    auto x0 = TensorT<double>::uniform({1, 8, 8}, rng);
    auto noise = TensorT<double>::randn({1, 8, 8}, rng);
    auto x_t = q_sample(x0, t, noise, s);
    auto emb_src = embed(x0);
    TensorT<double> row = emb_src;
    row.shape = {1, kEmbedDim};

    auto build = [&]() {
        auto pred = denoise_nodes(net, constant(x_t), t, constant(row));
        // x0 estimate from the noise prediction keeps the identity term live.
        auto x0_hat = scale(sub(constant(x_t), scale(pred, std::sqrt(1.0 - ab))),
                            1.0 / std::sqrt(ab));
        return cover_image_loss_nodes(pred, constant(noise), constant(emb_src),
                                      embed_nodes(x0_hat));
    };
    std::mt19937_64 grng(43);
    auto res = grad_check(net.params, build, 2, grng);
    CHECK(res.max_rel < 1e-3);
}

// ====== end-to-end swap ======

TEST_CASE("mask-off swap reproduces the unconditioned chain and is deterministic") {
    DenoiserConfig cfg;
    cfg.channels = 1;
    cfg.base = 4;
    cfg.t_steps = 12;
    auto net = make_denoiser<float>(cfg, 47);
    net.params.randomize(53, 0.05f);
    auto s = linear_schedule(12, 1e-3, 0.15);
    auto target = blob_frame(16, 16, 8, 8, 1);
    auto source = blob_frame(16, 16, 8, 12, 2);

    auto ms_off = make_mask_schedule(TensorT<float>({16, 16}), 12, 6);
    auto swapped = swap_face(net, source, target, s, ms_off, 99);
    auto again = swap_face(net, source, target, s, ms_off, 99);
    CHECK(max_abs_diff(swapped, again) == 0.0);

    // The same chain run by hand with only the unconditioned pathway.
    std::mt19937_64 rng(99);
    TensorT<float> zero_emb({kEmbedDim});
    auto x = q_sample(target, 12, TensorT<float>::randn(target.shape, rng), s);
    for (int t = 12; t >= 1; --t) {
        TensorT<float> z = t > 1 ? TensorT<float>::randn(x.shape, rng) : TensorT<float>(x.shape);
        x = p_step(x, t, denoise(net, x, t, zero_emb), s, &z);
    }
    CHECK(max_abs_diff(swapped, x) <= 1e-6);

    auto ms_wrong = make_mask_schedule(TensorT<float>({16, 16}), 10, 5);
    CHECK_THROWS_AS(swap_face(net, source, target, s, ms_wrong, 99), ValidationError);
}

TEST_CASE("trained toy swapper moves the masked identity toward the source") {
    // Two synthetic identities: a bright blob on the left (source) or right
    // (target). Overfit the conditional denoiser on both, then swap.
    const int T = 20, H = 32, W = 32;
    auto s = linear_schedule(T, 1e-3, 0.3);
    DenoiserConfig cfg;
    cfg.channels = 1;
    cfg.base = 8;
    cfg.t_steps = T;
    auto net = make_denoiser<float>(cfg, 61);

    auto id_a = blob_frame(H, W, 16, 8, 0);   // source identity
    auto id_b = blob_frame(H, W, 16, 24, 0);  // target identity
    auto emb_a = embed(id_a);
    auto emb_b = embed(id_b);

    // Curriculum: matched pairs anchor reconstruction; cross pairs at noisy
    // steps (image from one identity, conditioning from the other, identity
    // target = conditioning) force the embedding to control blob placement.
    // Occasional zero-embedding passes keep the bare pathway usable.
    AdamT<float> opt(net.params);
    std::mt19937_64 rng(67);
    std::uniform_int_distribution<int> pick_t(1, T);
    std::bernoulli_distribution half(0.5);
    TensorT<float> zero_row({1, kEmbedDim});
    for (int step = 0; step < 600; ++step) {
        const bool cond_a = (step % 2 == 0);
        const int t = pick_t(rng);
        const bool cross = t >= 8 && half(rng);
        const bool uncond = !cross && step % 8 == 7;
        const auto& cond_emb = cond_a ? emb_a : emb_b;
        const auto& img = (cond_a != cross) ? id_a : id_b;
        const double ab = s.alpha_bar[static_cast<size_t>(t - 1)];
        auto noise = TensorT<float>::randn(img.shape, rng);
        auto x_t = q_sample(img, t, noise, s);
        TensorT<float> row = cond_emb;
        row.shape = {1, kEmbedDim};

        auto pred = denoise_nodes(net, constant(x_t), t, constant(uncond ? zero_row : row));
        auto loss = scale(sum_all(square(sub(pred, constant(noise)))), 1.0f / float(H * W));
        if (!uncond) {
            auto x0_hat = scale(sub(constant(x_t), scale(pred, float(std::sqrt(1.0 - ab)))),
                                float(1.0 / std::sqrt(ab)));
            auto cosv = sum_all(mul(constant(cond_emb), embed_nodes(x0_hat)));
            loss = add(loss, scale(add_const(neg(cosv), 1.0f), 3.0f));
        }
        backward(loss);
        opt.step(net.params, 2e-3f);
    }

    // Wide elliptical mask covering both blob positions.
    TensorT<float> U({H, W});
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            const double e = (h - 16.0) * (h - 16.0) / 196.0 + (w - 16.0) * (w - 16.0) / 196.0;
            U.data[static_cast<size_t>(h) * W + w] = e <= 1.0 ? 1.0f : 0.0f;
        }
    auto ms = make_mask_schedule(U, T, T / 2);

    const auto swapped = swap_face(net, id_a, id_b, s, ms, 71);
    const double swapped_vs_src = cos_of(embed(swapped), emb_a);
    const double target_vs_src = cos_of(emb_b, emb_a);
    CHECK(swapped_vs_src > target_vs_src);
}
