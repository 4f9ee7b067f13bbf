#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "veil/eval/lsb.hpp"
#include "veil/eval/metrics.hpp"

using namespace veil;
using namespace veil::eval;

TEST_CASE("psnr sentinel, known uniform differences, symmetry") {
    std::mt19937_64 rng(1);
    Tensor a = Tensor::uniform({1, 8, 8}, rng);
    CHECK(std::isinf(psnr(a, a)));

    Tensor b = a;
    for (auto& v : b.data) v += 16.0f / 255.0f;
    CHECK(psnr(a, b) == doctest::Approx(20.0 * std::log10(255.0 / 16.0)).epsilon(1e-5));

    Tensor c = a;
    for (auto& v : c.data) v += 1.0f / 255.0f;
    CHECK(psnr(a, c) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-5));
    CHECK(psnr(c, a) == doctest::Approx(psnr(a, c)).epsilon(1e-12));

    CHECK_THROWS_AS(psnr(a, Tensor::zeros({1, 4, 4})), ValidationError);
}

TEST_CASE("ssim identity, closed-form constant case, negative on inverted structure") {
    std::mt19937_64 rng(2);
    Tensor a = Tensor::uniform({1, 16, 16}, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    // Constant windows: variance terms vanish, luminance term remains.
    const double v = 0.4, c = 0.2, C1 = 1e-4;
    Tensor ca = Tensor::full({1, 16, 16}, float(v));
    Tensor cb = Tensor::full({1, 16, 16}, float(v + c));
    const double expect = (2 * v * (v + c) + C1) / (v * v + (v + c) * (v + c) + C1);
    CHECK(ssim(ca, cb) == doctest::Approx(expect).epsilon(1e-6));

    // Gradient image against its contrast inversion around 0.5.
    Tensor g({1, 16, 16});
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) g.at3(0, y, x) = float(x) / 15.0f;
    Tensor inv = g;
    for (auto& p : inv.data) p = 1.0f - p;
    CHECK(ssim(g, inv) < 0.0);
}

TEST_CASE("mae and rmse in 255 scale") {
    Tensor a = Tensor::full({1, 8, 8}, 0.5f);
    auto [mae0, rmse0] = mae_rmse(a, a);
    CHECK(mae0 == 0.0);
    CHECK(rmse0 == 0.0);

    Tensor b = a;
    for (auto& v : b.data) v += 1.0f / 255.0f;
    auto [mae1, rmse1] = mae_rmse(a, b);
    CHECK(mae1 == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(rmse1 == doctest::Approx(1.0).epsilon(1e-5));

    Tensor c = a;
    for (size_t i = 0; i < c.data.size(); ++i)
        c.data[i] += ((i % 2) ? 1.0f : -1.0f) / 255.0f;
    auto [mae2, rmse2] = mae_rmse(a, c);
    CHECK(mae2 == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(rmse2 == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(rmse2 >= mae2 - 1e-12);
}

TEST_CASE("rmse dominates mae on uneven errors") {
    std::mt19937_64 rng(3);
    Tensor a = Tensor::uniform({1, 8, 8}, rng);
    Tensor b = Tensor::uniform({1, 8, 8}, rng);
    auto [mae, rmse] = mae_rmse(a, b);
    CHECK(rmse >= mae);
}

TEST_CASE("cosine similarity on the three canonical cases") {
    std::vector<float> u = {1, 2, 3};
    CHECK(cos_sim(u, u) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<float> a = {1, 0}, b = {0, 1};
    CHECK(cos_sim(a, b) == doctest::Approx(0.0));
    std::vector<float> neg = {-1, -2, -3};
    CHECK(cos_sim(u, neg) == doctest::Approx(-1.0).epsilon(1e-12));
    std::vector<float> zero = {0, 0, 0};
    CHECK_THROWS_AS(cos_sim(u, zero), ValidationError);
}

TEST_CASE("lsb4 hand example and nibble properties") {
    CHECK(lsb4_stego_byte(181, 214) == 189);
    CHECK(lsb4_recover_byte(189) == 208);

    // secret == cover: recovery zeroes the low nibble.
    for (int v : {0, 7, 100, 181, 255}) {
        const uint8_t st = lsb4_stego_byte(uint8_t(v), uint8_t(v));
        CHECK(lsb4_recover_byte(st) == (v & 0xF0));
    }
}

TEST_CASE("lsb4 exhaustive over all byte pairs") {
    for (int c = 0; c < 256; ++c)
        for (int s = 0; s < 256; ++s) {
            const uint8_t st = lsb4_stego_byte(uint8_t(c), uint8_t(s));
            CHECK((st & 0xF0) == (c & 0xF0));
            CHECK(lsb4_recover_byte(st) == (s & 0xF0));
        }
}

TEST_CASE("lsb4 clip path validates quantization and round-trips nibbles") {
    std::mt19937_64 rng(4);
    Tensor cover = Tensor::uniform({1, 8, 8}, rng);
    Tensor secret = Tensor::uniform({1, 8, 8}, rng);
    CHECK_THROWS_AS(lsb4_hide(cover, secret), ValidationError);

    for (auto& v : cover.data) v = video::from_u8(video::to_u8(v));
    for (auto& v : secret.data) v = video::from_u8(video::to_u8(v));
    Tensor stego = lsb4_hide(cover, secret);
    Tensor rec = lsb4_recover(stego);
    for (size_t i = 0; i < rec.data.size(); ++i) {
        const uint8_t s = video::to_u8(secret.data[i]);
        CHECK(video::to_u8(rec.data[i]) == (s & 0xF0));
    }
}

TEST_CASE("metrics report aggregates and csv output") {
    MetricsReport rep;
    rep.rows.push_back({"a", 30.0, 0.9, 1.0, 2.0});
    rep.rows.push_back({"b", 34.0, 0.8, 3.0, 4.0});
    auto mean = rep.aggregate_mean();
    CHECK(mean.psnr_db == doctest::Approx(32.0));
    CHECK(mean.ssim == doctest::Approx(0.85));
    auto sd = rep.aggregate_std();
    CHECK(sd.psnr_db == doctest::Approx(2.0));

    const std::string path = "metrics_test.csv";
    rep.write_csv(path);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "pair,psnr_db,ssim,mae,rmse");
    int lines = 0;
    for (std::string line; std::getline(is, line);) ++lines;
    CHECK(lines == 4);  // 2 rows + mean + std
    std::filesystem::remove(path);
}
