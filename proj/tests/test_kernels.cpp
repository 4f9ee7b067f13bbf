#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "veil/kernels.hpp"

using veil::Tensor;
using veil::TensorD;
namespace K = veil::kernels;

static bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (size_t i = 0; i < a.data.size(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

TEST_CASE("conv2d parallel matches serial reference bitwise") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 4; ++trial) {
        const int cin = 1 + trial, cout = 2 + trial, hw = 9 + 3 * trial, k = (trial % 2) ? 1 : 3;
        Tensor x = Tensor::randn({cin, hw, hw}, rng);
        Tensor w = Tensor::randn({cout, cin, k, k}, rng);
        Tensor b = Tensor::randn({cout}, rng);
        const int pad = k / 2;
        Tensor y_p = K::conv2d_forward(x, w, b, pad);
        Tensor y_s = K::ref::conv2d_forward(x, w, b, pad);
        CHECK(bitwise_equal(y_p, y_s));

        Tensor gy = Tensor::randn({cout, hw, hw}, rng);
        CHECK(bitwise_equal(K::conv2d_backward_input(gy, w, hw, hw, pad),
                            K::ref::conv2d_backward_input(gy, w, hw, hw, pad)));
        CHECK(bitwise_equal(K::conv2d_backward_weight(gy, x, k, k, pad),
                            K::ref::conv2d_backward_weight(gy, x, k, k, pad)));
        CHECK(bitwise_equal(K::conv2d_backward_bias(gy), K::ref::conv2d_backward_bias(gy)));
    }
}

TEST_CASE("matmul parallel matches serial reference bitwise for all flag pairs") {
    std::mt19937_64 rng(12);
    const int M = 7, Kd = 5, N = 9;
    for (int ta = 0; ta < 2; ++ta)
        for (int tb = 0; tb < 2; ++tb) {
            Tensor a = ta ? Tensor::randn({Kd, M}, rng) : Tensor::randn({M, Kd}, rng);
            Tensor b = tb ? Tensor::randn({N, Kd}, rng) : Tensor::randn({Kd, N}, rng);
            Tensor p = K::matmul(a, b, ta, tb);
            Tensor s = K::ref::matmul(a, b, ta, tb);
            CHECK(bitwise_equal(p, s));
        }
}

TEST_CASE("matmul transpose flags agree with explicit transposition") {
    std::mt19937_64 rng(13);
    const int M = 4, Kd = 6, N = 3;
    Tensor a = Tensor::randn({M, Kd}, rng);
    Tensor b = Tensor::randn({Kd, N}, rng);
    Tensor at({Kd, M}), bt({N, Kd});
    for (int i = 0; i < M; ++i)
        for (int k = 0; k < Kd; ++k) at.at2(k, i) = a.at2(i, k);
    for (int k = 0; k < Kd; ++k)
        for (int j = 0; j < N; ++j) bt.at2(j, k) = b.at2(k, j);
    Tensor base = K::matmul(a, b);
    CHECK(veil::max_abs_diff(base, K::matmul(at, b, true, false)) == 0.0);
    CHECK(veil::max_abs_diff(base, K::matmul(a, bt, false, true)) == 0.0);
    CHECK(veil::max_abs_diff(base, K::matmul(at, bt, true, true)) == 0.0);
}

TEST_CASE("conv2d 1x1 kernel with identity weight is a passthrough") {
    std::mt19937_64 rng(14);
    Tensor x = Tensor::randn({3, 5, 5}, rng);
    Tensor w = Tensor::zeros({3, 3, 1, 1});
    for (int c = 0; c < 3; ++c) w.at4(c, c, 0, 0) = 1.0f;
    Tensor y = K::conv2d_forward(x, w, Tensor::zeros({3}), 0);
    CHECK(veil::max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv2d hand example with zero padding") {
    // 1x3x3 input, single 3x3 averaging-like kernel of ones, pad 1.
    Tensor x({1, 3, 3});
    for (int i = 0; i < 9; ++i) x[i] = float(i + 1);
    Tensor w = Tensor::ones({1, 1, 3, 3});
    Tensor y = K::conv2d_forward(x, w, Tensor(), 1);
    // Center output sums the whole input: 45. Corner (0,0) sums the 2x2
    // top-left block: 1+2+4+5 = 12.
    CHECK(y.at3(0, 1, 1) == doctest::Approx(45.0));
    CHECK(y.at3(0, 0, 0) == doctest::Approx(12.0));
}

TEST_CASE("conv2d backward passes finite difference check in double") {
    std::mt19937_64 rng(15);
    const int cin = 2, cout = 3, hw = 6, k = 3, pad = 1;
    TensorD x = TensorD::randn({cin, hw, hw}, rng);
    TensorD w = TensorD::randn({cout, cin, k, k}, rng);
    TensorD b = TensorD::randn({cout}, rng);
    TensorD gy = TensorD::randn({cout, hw, hw}, rng);

    auto loss = [&](const TensorD& xx, const TensorD& ww, const TensorD& bb) {
        TensorD y = K::ref::conv2d_forward(xx, ww, bb, pad);
        double s = 0.0;
        for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * gy.data[i];
        return s;
    };

    TensorD gx = K::ref::conv2d_backward_input(gy, w, hw, hw, pad);
    TensorD gw = K::ref::conv2d_backward_weight(gy, x, k, k, pad);
    TensorD gb = K::ref::conv2d_backward_bias(gy);

    const double eps = 1e-6;
    std::uniform_int_distribution<int> pick_x(0, int(x.numel()) - 1),
        pick_w(0, int(w.numel()) - 1);
    for (int t = 0; t < 10; ++t) {
        int ix = pick_x(rng);
        TensorD xp = x, xm = x;
        xp[ix] += eps;
        xm[ix] -= eps;
        double fd = (loss(xp, w, b) - loss(xm, w, b)) / (2 * eps);
        CHECK(gx[ix] == doctest::Approx(fd).epsilon(1e-6));

        int iw = pick_w(rng);
        TensorD wp = w, wm = w;
        wp[iw] += eps;
        wm[iw] -= eps;
        fd = (loss(x, wp, b) - loss(x, wm, b)) / (2 * eps);
        CHECK(gw[iw] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (int cb = 0; cb < cout; ++cb) {
        TensorD bp = b, bm = b;
        bp[cb] += eps;
        bm[cb] -= eps;
        double fd = (loss(x, w, bp) - loss(x, w, bm)) / (2 * eps);
        CHECK(gb[cb] == doctest::Approx(fd).epsilon(1e-6));
    }
}
