// Adam with the step-decay learning-rate schedule used by every training
// stage: the base rate halves after each fixed step interval.
#pragma once

#include <cmath>

#include "veil/nn/layers.hpp"

namespace veil::nn {

template <class T>
T halving_lr(T base_lr, int64_t halve_every, int64_t step) {
    if (halve_every <= 0) return base_lr;
    return base_lr * T(std::pow(2.0, -double(step / halve_every)));
}

template <class T>
struct AdamT {
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    int64_t t = 0;
    std::vector<TensorT<T>> m, v;

    explicit AdamT(const ParamsT<T>& params) {
        for (auto& [_, node] : params.items) {
            m.push_back(TensorT<T>(node->val.shape));
            v.push_back(TensorT<T>(node->val.shape));
        }
    }

    // Applies one update from the grads currently on the parameter nodes.
    void step(ParamsT<T>& params, T lr) {
        ++t;
        const T bc1 = T(1) - T(std::pow(double(beta1), double(t)));
        const T bc2 = T(1) - T(std::pow(double(beta2), double(t)));
        for (size_t i = 0; i < params.items.size(); ++i) {
            auto& node = params.items[i].second;
            node->ensure_grad();
            for (size_t k = 0; k < node->val.data.size(); ++k) {
                const T g = node->grad.data[k];
                m[i].data[k] = beta1 * m[i].data[k] + (T(1) - beta1) * g;
                v[i].data[k] = beta2 * v[i].data[k] + (T(1) - beta2) * g * g;
                const T mhat = m[i].data[k] / bc1;
                const T vhat = v[i].data[k] / bc2;
                node->val.data[k] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

using Adam = AdamT<float>;

}  // namespace veil::nn
