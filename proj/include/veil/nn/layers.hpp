// Parameter registry and the small set of trainable layers the nets share.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "veil/nn/autograd.hpp"

namespace veil::nn {

// Ordered name -> node registry. Creation order is the optimizer's state
// order; checkpoints re-sort by name on disk.
template <class T>
struct ParamsT {
    std::vector<std::pair<std::string, NodePtrT<T>>> items;
    std::mt19937_64 rng{0x5eed};

    NodePtrT<T> make(const std::string& name, TensorT<T> init) {
        for (auto& [n, _] : items) require(n != name, "duplicate parameter name: " + name);
        auto node = constant(std::move(init));
        node->is_param = true;
        items.push_back({name, node});
        return node;
    }

    NodePtrT<T> make_randn(const std::string& name, std::vector<int> shape, T stddev) {
        return make(name, TensorT<T>::randn(std::move(shape), rng, stddev));
    }

    NodePtrT<T> make_zeros(const std::string& name, std::vector<int> shape) {
        return make(name, TensorT<T>(std::move(shape)));
    }

    NodePtrT<T> find(const std::string& name) const {
        for (auto& [n, node] : items)
            if (n == name) return node;
        throw ValidationError("parameter not found: " + name);
    }

    int64_t total_count() const {
        int64_t n = 0;
        for (auto& [_, node] : items) n += node->val.numel();
        return n;
    }

    // Overwrites every parameter with fresh gaussian values. Zero-init layers
    // lose their zeros too; used where "arbitrary parameters" is the point.
    void randomize(uint64_t seed, T stddev) {
        std::mt19937_64 r(seed);
        for (auto& [_, node] : items)
            node->val = TensorT<T>::randn(node->val.shape, r, stddev);
    }

    template <class U>
    ParamsT<U> cast() const {
        ParamsT<U> out;
        for (auto& [n, node] : items) out.make(n, node->val.template cast<U>());
        return out;
    }
};

using Params = ParamsT<float>;

template <class T>
struct LinearT {
    NodePtrT<T> w;  // [out,in]
    NodePtrT<T> b;  // [out] or empty when bias is off

    LinearT() = default;
    LinearT(ParamsT<T>& p, const std::string& prefix, int in, int out, bool bias = true,
            bool zero_init = false) {
        const T std = zero_init ? T(0) : T(std::sqrt(2.0 / in));
        w = p.make_randn(prefix + ".w", {out, in}, std);
        if (bias) b = p.make_zeros(prefix + ".b", {out});
    }

    // x: [N,in] -> [N,out]
    NodePtrT<T> operator()(const NodePtrT<T>& x) const {
        auto y = matmul(x, w, false, true);
        return b ? bias_add_rows(y, b) : y;
    }
};

template <class T>
struct Conv2dT {
    NodePtrT<T> w;  // [cout,cin,k,k]
    NodePtrT<T> b;  // [cout] or empty
    int pad = 0;

    Conv2dT() = default;
    Conv2dT(ParamsT<T>& p, const std::string& prefix, int cin, int cout, int k, bool bias = true,
            bool zero_init = false)
        : pad(k / 2) {
        const T std = zero_init ? T(0) : T(std::sqrt(2.0 / (cin * k * k)));
        w = p.make_randn(prefix + ".w", {cout, cin, k, k}, std);
        b = bias ? p.make_zeros(prefix + ".b", {cout}) : constant(TensorT<T>({0}));
    }

    NodePtrT<T> operator()(const NodePtrT<T>& x) const { return conv2d(x, w, b, pad); }
};

template <class T>
struct LayerNormRowsT {
    NodePtrT<T> g, b;
    LayerNormRowsT() = default;
    LayerNormRowsT(ParamsT<T>& p, const std::string& prefix, int d) {
        g = p.make(prefix + ".g", TensorT<T>({d}, T(1)));
        b = p.make_zeros(prefix + ".b", {d});
    }
    NodePtrT<T> operator()(const NodePtrT<T>& x) const { return layernorm_rows(x, g, b); }
};

template <class T>
struct LayerNormChannelT {
    NodePtrT<T> g, b;
    LayerNormChannelT() = default;
    LayerNormChannelT(ParamsT<T>& p, const std::string& prefix, int c) {
        g = p.make(prefix + ".g", TensorT<T>({c}, T(1)));
        b = p.make_zeros(prefix + ".b", {c});
    }
    NodePtrT<T> operator()(const NodePtrT<T>& x) const { return layernorm_channel(x, g, b); }
};

// Five-conv dense block: each layer sees the concatenation of the input and
// all previous layer outputs. Final layer maps to cout; zero_final makes the
// whole block an exact zero function at init.
template <class T>
struct DenseBlockT {
    std::vector<Conv2dT<T>> convs;
    int n_layers = 5;

    DenseBlockT() = default;
    DenseBlockT(ParamsT<T>& p, const std::string& prefix, int cin, int growth, int cout,
                bool zero_final = true, int layers = 5) {
        n_layers = layers;
        int c = cin;
        for (int i = 0; i < layers - 1; ++i) {
            convs.emplace_back(p, prefix + ".conv" + std::to_string(i), c, growth, 3);
            c += growth;
        }
        convs.emplace_back(p, prefix + ".conv" + std::to_string(layers - 1), c, cout, 3, true,
                           zero_final);
    }

    NodePtrT<T> operator()(const NodePtrT<T>& x) const {
        NodePtrT<T> cat = x;
        for (int i = 0; i + 1 < n_layers; ++i) {
            auto f = relu(convs[size_t(i)](cat));
            cat = concat_dim0(cat, f);
        }
        return convs.back()(cat);
    }
};

}  // namespace veil::nn
