#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "veil/wavelet/haar.hpp"

using namespace veil;
using namespace veil::wavelet;

TEST_CASE("constant frame concentrates all energy in LL") {
    Tensor f = Tensor::full({1, 8, 8}, 0.25f);
    Bands b = dwt2(f);
    for (int i = 0; i < b.ll.numel(); ++i) {
        CHECK(b.ll[i] == doctest::Approx(0.5f));  // 2v for v = 0.25
        CHECK(b.hl[i] == 0.0f);
        CHECK(b.lh[i] == 0.0f);
        CHECK(b.hh[i] == 0.0f);
    }
}

TEST_CASE("hand-evaluated 2x2 block") {
    Tensor f({1, 2, 2});
    f.at3(0, 0, 0) = 1;
    f.at3(0, 0, 1) = 2;
    f.at3(0, 1, 0) = 3;
    f.at3(0, 1, 1) = 4;
    Bands b = dwt2(f);
    CHECK(b.ll[0] == doctest::Approx(5.0f));
    CHECK(b.hl[0] == doctest::Approx(-2.0f));
    CHECK(b.lh[0] == doctest::Approx(-1.0f));
    CHECK(b.hh[0] == doctest::Approx(0.0f));
}

TEST_CASE("round trip and energy preservation on random frames") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const int C = (trial % 2) ? 3 : 1;
        Tensor f = Tensor::uniform({C, 16, 16}, rng);
        Bands b = dwt2(f);
        Tensor back = idwt2(b);
        CHECK(max_abs_diff(f, back) <= 1e-6);

        const double e_in = sum_squares(f);
        const double e_out =
            sum_squares(b.ll) + sum_squares(b.hl) + sum_squares(b.lh) + sum_squares(b.hh);
        CHECK(std::abs(e_in - e_out) <= 1e-5 * e_in);
    }
}

TEST_CASE("inverse of the constant case") {
    Bands b;
    b.ll = Tensor::full({1, 4, 4}, 0.8f);
    b.hl = Tensor::zeros({1, 4, 4});
    b.lh = Tensor::zeros({1, 4, 4});
    b.hh = Tensor::zeros({1, 4, 4});
    Tensor f = idwt2(b);
    for (float v : f.data) CHECK(v == doctest::Approx(0.4f));
}

TEST_CASE("all-zero bands give zero output and odd sizes are rejected") {
    Bands b;
    b.ll = b.hl = b.lh = b.hh = Tensor::zeros({1, 4, 4});
    CHECK(sum_squares(idwt2(b)) == 0.0);
    CHECK_THROWS_AS(dwt2(Tensor::zeros({1, 7, 8})), ValidationError);
    b.hh = Tensor::zeros({1, 4, 5});
    CHECK_THROWS_AS(idwt2(b), ValidationError);
}

TEST_CASE("band stack shape and LL placement") {
    std::mt19937_64 rng(78);
    std::vector<Tensor> frames;
    for (int g = 0; g < 3; ++g) frames.push_back(Tensor::uniform({3, 8, 8}, rng));
    Tensor stack = band_pack(frames);
    CHECK(stack.shape == std::vector<int>({36, 4, 4}));

    // Channels 0..8 hold LL of frames 0..2: channel g*3+c equals dwt2 LL.
    for (int g = 0; g < 3; ++g) {
        Bands b = dwt2(frames[size_t(g)]);
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    CHECK(stack.at3(g * 3 + c, i, j) == b.ll.at3(c, i, j));
    }

    std::vector<Tensor> single = {Tensor::uniform({3, 8, 8}, rng)};
    CHECK(band_pack(single).shape == std::vector<int>({12, 4, 4}));
}

TEST_CASE("coefficient pack/unpack is a bit-exact bijection") {
    std::mt19937_64 rng(79);
    std::vector<Bands> groups;
    for (int g = 0; g < 3; ++g) groups.push_back(dwt2(Tensor::uniform({3, 16, 16}, rng)));
    Tensor stack = pack_bands(groups);
    auto back = unpack_bands(stack, 3, 3);
    REQUIRE(back.size() == 3);
    for (int g = 0; g < 3; ++g) {
        CHECK(max_abs_diff(groups[size_t(g)].ll, back[size_t(g)].ll) == 0.0);
        CHECK(max_abs_diff(groups[size_t(g)].hl, back[size_t(g)].hl) == 0.0);
        CHECK(max_abs_diff(groups[size_t(g)].lh, back[size_t(g)].lh) == 0.0);
        CHECK(max_abs_diff(groups[size_t(g)].hh, back[size_t(g)].hh) == 0.0);
    }
    // Repacking reproduces the stack bitwise.
    CHECK(max_abs_diff(stack, pack_bands(back)) == 0.0);
}

TEST_CASE("frame-level pack/unpack round trip within transform tolerance") {
    std::mt19937_64 rng(80);
    std::vector<Tensor> frames;
    for (int g = 0; g < 3; ++g) frames.push_back(Tensor::uniform({1, 16, 16}, rng));
    auto back = band_unpack(band_pack(frames), 3, 1);
    REQUIRE(back.size() == 3);
    for (int g = 0; g < 3; ++g) CHECK(max_abs_diff(frames[size_t(g)], back[size_t(g)]) <= 1e-6);
    CHECK_THROWS_AS(band_unpack(band_pack(frames), 2, 1), ValidationError);
}

TEST_CASE("double precision round trip is tighter than 1e-12") {
    std::mt19937_64 rng(81);
    TensorD f = TensorD::uniform({1, 16, 16}, rng);
    CHECK(max_abs_diff(f, idwt2(dwt2(f))) <= 1e-12);
}
