// Minimal dense row-major tensor. Float for training/inference, double for
// the high-precision inversion and gradient-check paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "veil/common.hpp"

namespace veil {

template <class T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), T(0));
    }
    TensorT(std::vector<int> s, T fill) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), fill);
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw ValidationError("negative tensor dimension");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // Index helpers for the layouts used throughout: [C,H,W] and [N,C,H,W].
    T& at3(int c, int h, int w) {
        return data[(static_cast<size_t>(c) * dim(1) + h) * dim(2) + w];
    }
    const T& at3(int c, int h, int w) const {
        return data[(static_cast<size_t>(c) * dim(1) + h) * dim(2) + w];
    }
    T& at4(int n, int c, int h, int w) {
        return data[((static_cast<size_t>(n) * dim(1) + c) * dim(2) + h) * dim(3) + w];
    }
    const T& at4(int n, int c, int h, int w) const {
        return data[((static_cast<size_t>(n) * dim(1) + c) * dim(2) + h) * dim(3) + w];
    }
    T& at2(int r, int c) { return data[static_cast<size_t>(r) * dim(1) + c]; }
    const T& at2(int r, int c) const { return data[static_cast<size_t>(r) * dim(1) + c]; }

    static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }
    static TensorT full(std::vector<int> s, T v) { return TensorT(std::move(s), v); }
    static TensorT ones(std::vector<int> s) { return full(std::move(s), T(1)); }

    static TensorT randn(std::vector<int> s, std::mt19937_64& rng, T stddev = T(1)) {
        TensorT t(std::move(s));
        std::normal_distribution<double> d(0.0, 1.0);
        for (auto& v : t.data) v = static_cast<T>(d(rng)) * stddev;
        return t;
    }
    static TensorT uniform(std::vector<int> s, std::mt19937_64& rng, T lo = T(0), T hi = T(1)) {
        TensorT t(std::move(s));
        std::uniform_real_distribution<double> d(lo, hi);
        for (auto& v : t.data) v = static_cast<T>(d(rng));
        return t;
    }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <class T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
    if (!a.same_shape(b)) throw ValidationError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
    return m;
}

template <class T>
double sum_squares(const TensorT<T>& a) {
    double s = 0.0;
    for (T v : a.data) s += static_cast<double>(v) * static_cast<double>(v);
    return s;
}

}  // namespace veil
