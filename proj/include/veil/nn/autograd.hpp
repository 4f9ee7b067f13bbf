// Reverse-mode autodiff on a dynamically built tape of shared_ptr nodes.
// Templated on scalar so training runs in float while gradient checks and the
// high-precision inversion path run in double.
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "veil/kernels.hpp"
#include "veil/tensor.hpp"

namespace veil::nn {

template <class T>
struct NodeT {
    TensorT<T> val;
    TensorT<T> grad;  // allocated lazily, same shape as val
    std::vector<std::shared_ptr<NodeT>> parents;
    std::function<void()> backfn;  // pushes this->grad into parents' grads
    bool is_param = false;

    void ensure_grad() {
        if (grad.shape != val.shape) grad = TensorT<T>(val.shape);
    }
};

template <class T>
using NodePtrT = std::shared_ptr<NodeT<T>>;

using Node = NodeT<float>;
using NodePtr = NodePtrT<float>;

template <class T>
NodePtrT<T> constant(TensorT<T> v) {
    auto n = std::make_shared<NodeT<T>>();
    n->val = std::move(v);
    return n;
}

template <class T>
NodePtrT<T> scalar_const(T v) {
    return constant(TensorT<T>({1}, v));
}

template <class T>
NodePtrT<T> detach(const NodePtrT<T>& x) {
    return constant(x->val);
}

// Runs one reverse sweep from root. Grads of every node reachable from root
// (parameters included) are zeroed first, so per-step accumulation happens
// inside a single graph, never across calls.
template <class T>
void backward(const NodePtrT<T>& root) {
    std::vector<NodeT<T>*> order;
    std::unordered_set<NodeT<T>*> seen;
    std::vector<std::pair<NodeT<T>*, size_t>> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            NodeT<T>* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (NodeT<T>* n : order) {
        n->ensure_grad();
        std::fill(n->grad.data.begin(), n->grad.data.end(), T(0));
    }
    std::fill(root->grad.data.begin(), root->grad.data.end(), T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backfn) (*it)->backfn();
}

namespace detail {

template <class T, class Fwd, class Bwd>
NodePtrT<T> unary(const NodePtrT<T>& x, Fwd fwd, Bwd bwd) {
    auto n = std::make_shared<NodeT<T>>();
    n->val = TensorT<T>(x->val.shape);
    for (size_t i = 0; i < x->val.data.size(); ++i) n->val.data[i] = fwd(x->val.data[i]);
    n->parents = {x};
    NodeT<T>* np = n.get();
    n->backfn = [np, x, bwd]() {
        for (size_t i = 0; i < x->val.data.size(); ++i)
            x->grad.data[i] += np->grad.data[i] * bwd(x->val.data[i], np->val.data[i]);
    };
    return n;
}

}  // namespace detail

// ====== elementwise ======

template <class T>
NodePtrT<T> add(const NodePtrT<T>& a, const NodePtrT<T>& b) {
    require(a->val.same_shape(b->val), "add: shape mismatch");
    auto n = std::make_shared<NodeT<T>>();
    n->val = TensorT<T>(a->val.shape);
    for (size_t i = 0; i < n->val.data.size(); ++i)
        n->val.data[i] = a->val.data[i] + b->val.data[i];
    n->parents = {a, b};
    NodeT<T>* np = n.get();
    n->backfn = [np, a, b]() {
        for (size_t i = 0; i < np->grad.data.size(); ++i) {
            a->grad.data[i] += np->grad.data[i];
            b->grad.data[i] += np->grad.data[i];
        }
    };
    return n;
}

template <class T>
NodePtrT<T> sub(const NodePtrT<T>& a, const NodePtrT<T>& b) {
    require(a->val.same_shape(b->val), "sub: shape mismatch");
    auto n = std::make_shared<NodeT<T>>();
    n->val = TensorT<T>(a->val.shape);
    for (size_t i = 0; i < n->val.data.size(); ++i)
        n->val.data[i] = a->val.data[i] - b->val.data[i];
    n->parents = {a, b};
    NodeT<T>* np = n.get();
    n->backfn = [np, a, b]() {
        for (size_t i = 0; i < np->grad.data.size(); ++i) {
            a->grad.data[i] += np->grad.data[i];
            b->grad.data[i] -= np->grad.data[i];
        }
    };
    return n;
}

template <class T>
NodePtrT<T> mul(const NodePtrT<T>& a, const NodePtrT<T>& b) {
    require(a->val.same_shape(b->val), "mul: shape mismatch");
    auto n = std::make_shared<NodeT<T>>();
    n->val = TensorT<T>(a->val.shape);
    for (size_t i = 0; i < n->val.data.size(); ++i)
        n->val.data[i] = a->val.data[i] * b->val.data[i];
    n->parents = {a, b};
    NodeT<T>* np = n.get();
    n->backfn = [np, a, b]() {
        for (size_t i = 0; i < np->grad.data.size(); ++i) {
            a->grad.data[i] += np->grad.data[i] * b->val.data[i];
            b->grad.data[i] += np->grad.data[i] * a->val.data[i];
        }
    };
    return n;
}

template <class T>
NodePtrT<T> scale(const NodePtrT<T>& x, T c) {
    return detail::unary(
        x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <class T>
NodePtrT<T> add_const(const NodePtrT<T>& x, T c) {
    return detail::unary(
        x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <class T>
NodePtrT<T> neg(const NodePtrT<T>& x) {
    return scale(x, T(-1));
}

template <class T>
NodePtrT<T> exp_(const NodePtrT<T>& x) {
    return detail::unary(
        x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
NodePtrT<T> log_(const NodePtrT<T>& x) {
    return detail::unary(
        x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
NodePtrT<T> tanh_(const NodePtrT<T>& x) {
    return detail::unary(
        x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
NodePtrT<T> relu(const NodePtrT<T>& x) {
    return detail::unary(
        x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
NodePtrT<T> sigmoid(const NodePtrT<T>& x) {
    return detail::unary(
        x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <class T>
NodePtrT<T> abs_(const NodePtrT<T>& x) {
    return detail::unary(
        x, [](T v) { return std::abs(v); },
        [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <class T>
NodePtrT<T> square(const NodePtrT<T>& x) {
    return detail::unary(
        x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <class T>
NodePtrT<T> sqrt_(const NodePtrT<T>& x) {
    return detail::unary(
        x, [](T v) { return std::sqrt(v); }, [](T, T y) { return T(0.5) / y; });
}

template <class T>
NodePtrT<T> rsqrt(const NodePtrT<T>& x) {
    return detail::unary(
        x, [](T v) { return T(1) / std::sqrt(v); },
        [](T, T y) { return T(-0.5) * y * y * y; });
}

// Gradient passes through strictly inside (lo, hi) and is zero where the
// value saturated, matching the subgradient convention.
template <class T>
NodePtrT<T> clamp(const NodePtrT<T>& x, T lo, T hi) {
    return detail::unary(
        x, [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); },
        [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

// ====== reductions and broadcasts ======

template <class T>
NodePtrT<T> sum_all(const NodePtrT<T>& x) {
    auto n = std::make_shared<NodeT<T>>();
    T s = T(0);
    for (T v : x->val.data) s += v;
    n->val = TensorT<T>({1}, s);
    n->parents = {x};
    NodeT<T>* np = n.get();
    n->backfn = [np, x]() {
        const T g = np->grad.data[0];
        for (auto& gv : x->grad.data) gv += g;
    };
    return n;
}

template <class T>
NodePtrT<T> mean_all(const NodePtrT<T>& x) {
    return scale(sum_all(x), T(1) / T(x->val.numel()));
}

// y_i = x_i * s where s is a [1] node.
template <class T>
NodePtrT<T> broadcast_mul(const NodePtrT<T>& x, const NodePtrT<T>& s) {
    require(s->val.numel() == 1, "broadcast_mul: scale must be scalar");
    auto n = std::make_shared<NodeT<T>>();
    n->val = TensorT<T>(x->val.shape);
    const T sv = s->val.data[0];
    for (size_t i = 0; i < n->val.data.size(); ++i) n->val.data[i] = x->val.data[i] * sv;
    n->parents = {x, s};
    NodeT<T>* np = n.get();
    n->backfn = [np, x, s]() {
        const T sv2 = s->val.data[0];
        T acc = T(0);
        for (size_t i = 0; i < np->grad.data.size(); ++i) {
            x->grad.data[i] += np->grad.data[i] * sv2;
            acc += np->grad.data[i] * x->val.data[i];
        }
        s->grad.data[0] += acc;
    };
    return n;
}

// x: [N,d], b: [d]; adds b to every row.
template <class T>
NodePtrT<T> bias_add_rows(const NodePtrT<T>& x, const NodePtrT<T>& b) {
    require(x->val.ndim() == 2 && b->val.ndim() == 1 && b->val.dim(0) == x->val.dim(1),
            "bias_add_rows: wrong shapes");
    auto n = std::make_shared<NodeT<T>>();
    n->val = x->val;
    const int N = x->val.dim(0), d = x->val.dim(1);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < d; ++j) n->val.at2(i, j) += b->val.data[j];
    n->parents = {x, b};
    NodeT<T>* np = n.get();
    n->backfn = [np, x, b, N, d]() {
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < d; ++j) {
                x->grad.at2(i, j) += np->grad.at2(i, j);
                b->grad.data[j] += np->grad.at2(i, j);
            }
    };
    return n;
}

// FiLM-style per-channel affine on [C,H,W]: y[c,h,w] = x[c,h,w]*s[c] + t[c].
template <class T>
NodePtrT<T> channel_affine(const NodePtrT<T>& x, const NodePtrT<T>& s, const NodePtrT<T>& t) {
    require(x->val.ndim() == 3, "channel_affine: input must be [C,H,W]");
    const int C = x->val.dim(0), H = x->val.dim(1), W = x->val.dim(2);
    require(s->val.numel() == C && t->val.numel() == C, "channel_affine: bad scale/shift");
    auto n = std::make_shared<NodeT<T>>();
    n->val = TensorT<T>(x->val.shape);
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                n->val.at3(c, h, w) = x->val.at3(c, h, w) * s->val.data[c] + t->val.data[c];
    n->parents = {x, s, t};
    NodeT<T>* np = n.get();
    n->backfn = [np, x, s, t, C, H, W]() {
        for (int c = 0; c < C; ++c) {
            T gs = T(0), gt = T(0);
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const T g = np->grad.at3(c, h, w);
                    x->grad.at3(c, h, w) += g * s->val.data[c];
                    gs += g * x->val.at3(c, h, w);
                    gt += g;
                }
            s->grad.data[c] += gs;
            t->grad.data[c] += gt;
        }
    };
    return n;
}

// ====== shape ops ======

template <class T>
NodePtrT<T> reshape(const NodePtrT<T>& x, std::vector<int> shape) {
    require(TensorT<T>::numel_of(shape) == x->val.numel(), "reshape: element count mismatch");
    auto n = std::make_shared<NodeT<T>>();
    n->val.shape = std::move(shape);
    n->val.data = x->val.data;
    n->parents = {x};
    NodeT<T>* np = n.get();
    n->backfn = [np, x]() {
        for (size_t i = 0; i < x->grad.data.size(); ++i) x->grad.data[i] += np->grad.data[i];
    };
    return n;
}

// out.data[i] = x.data[idx[i]]; backward scatter-adds. idx entries may repeat.
template <class T>
NodePtrT<T> gather(const NodePtrT<T>& x, std::vector<int64_t> idx, std::vector<int> shape) {
    require(TensorT<T>::numel_of(shape) == int64_t(idx.size()),
            "gather: index count must match output shape");
    auto n = std::make_shared<NodeT<T>>();
    n->val.shape = std::move(shape);
    n->val.data.resize(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] >= 0 && idx[i] < x->val.numel(), "gather: index out of range");
        n->val.data[i] = x->val.data[size_t(idx[i])];
    }
    n->parents = {x};
    NodeT<T>* np = n.get();
    auto ix = std::make_shared<std::vector<int64_t>>(std::move(idx));
    n->backfn = [np, x, ix]() {
        for (size_t i = 0; i < ix->size(); ++i)
            x->grad.data[size_t((*ix)[i])] += np->grad.data[i];
    };
    return n;
}

// Concatenates along dim 0; remaining dims must agree.
template <class T>
NodePtrT<T> concat_dim0(const NodePtrT<T>& a, const NodePtrT<T>& b) {
    require(a->val.ndim() == b->val.ndim(), "concat_dim0: rank mismatch");
    for (int i = 1; i < a->val.ndim(); ++i)
        require(a->val.dim(i) == b->val.dim(i), "concat_dim0: trailing dim mismatch");
    auto n = std::make_shared<NodeT<T>>();
    n->val.shape = a->val.shape;
    n->val.shape[0] += b->val.dim(0);
    n->val.data.resize(a->val.data.size() + b->val.data.size());
    std::copy(a->val.data.begin(), a->val.data.end(), n->val.data.begin());
    std::copy(b->val.data.begin(), b->val.data.end(), n->val.data.begin() + a->val.data.size());
    n->parents = {a, b};
    NodeT<T>* np = n.get();
    n->backfn = [np, a, b]() {
        const size_t na = a->grad.data.size();
        for (size_t i = 0; i < na; ++i) a->grad.data[i] += np->grad.data[i];
        for (size_t i = 0; i < b->grad.data.size(); ++i) b->grad.data[i] += np->grad.data[na + i];
    };
    return n;
}

template <class T>
NodePtrT<T> slice_dim0(const NodePtrT<T>& x, int d0, int d1) {
    require(0 <= d0 && d0 < d1 && d1 <= x->val.dim(0), "slice_dim0: bad range");
    int64_t stride = 1;
    for (int i = 1; i < x->val.ndim(); ++i) stride *= x->val.dim(i);
    auto n = std::make_shared<NodeT<T>>();
    n->val.shape = x->val.shape;
    n->val.shape[0] = d1 - d0;
    n->val.data.assign(x->val.data.begin() + d0 * stride, x->val.data.begin() + d1 * stride);
    n->parents = {x};
    NodeT<T>* np = n.get();
    n->backfn = [np, x, d0, stride]() {
        const size_t off = size_t(d0 * stride);
        for (size_t i = 0; i < np->grad.data.size(); ++i) x->grad.data[off + i] += np->grad.data[i];
    };
    return n;
}

// ====== matmul / conv / pooling ======

template <class T>
NodePtrT<T> matmul(const NodePtrT<T>& a, const NodePtrT<T>& b, bool ta = false,
                   bool tb = false) {
    auto n = std::make_shared<NodeT<T>>();
    n->val = kernels::matmul(a->val, b->val, ta, tb);
    n->parents = {a, b};
    NodeT<T>* np = n.get();
    n->backfn = [np, a, b, ta, tb]() {
        // dA and dB by the usual transpose bookkeeping for each flag pair.
        TensorT<T> ga = ta ? kernels::matmul(b->val, np->grad, tb, true)
                           : kernels::matmul(np->grad, b->val, false, !tb);
        TensorT<T> gb = tb ? kernels::matmul(np->grad, a->val, true, ta)
                           : kernels::matmul(a->val, np->grad, !ta, false);
        for (size_t i = 0; i < ga.data.size(); ++i) a->grad.data[i] += ga.data[i];
        for (size_t i = 0; i < gb.data.size(); ++i) b->grad.data[i] += gb.data[i];
    };
    return n;
}

template <class T>
NodePtrT<T> conv2d(const NodePtrT<T>& x, const NodePtrT<T>& w, const NodePtrT<T>& b, int pad) {
    auto n = std::make_shared<NodeT<T>>();
    n->val = kernels::conv2d_forward(x->val, w->val, b->val, pad);
    n->parents = {x, w, b};
    NodeT<T>* np = n.get();
    n->backfn = [np, x, w, b, pad]() {
        TensorT<T> gx = kernels::conv2d_backward_input(np->grad, w->val, x->val.dim(1),
                                                       x->val.dim(2), pad);
        TensorT<T> gw =
            kernels::conv2d_backward_weight(np->grad, x->val, w->val.dim(2), w->val.dim(3), pad);
        for (size_t i = 0; i < gx.data.size(); ++i) x->grad.data[i] += gx.data[i];
        for (size_t i = 0; i < gw.data.size(); ++i) w->grad.data[i] += gw.data[i];
        if (b->val.numel() > 0) {
            TensorT<T> gb = kernels::conv2d_backward_bias(np->grad);
            for (size_t i = 0; i < gb.data.size(); ++i) b->grad.data[i] += gb.data[i];
        }
    };
    return n;
}

// Non-overlapping average pooling, stride == kernel. Input [C,H,W].
template <class T>
NodePtrT<T> avgpool2d(const NodePtrT<T>& x, int kh, int kw) {
    require(x->val.ndim() == 3, "avgpool2d: input must be [C,H,W]");
    const int C = x->val.dim(0), H = x->val.dim(1), W = x->val.dim(2);
    require(H % kh == 0 && W % kw == 0, "avgpool2d: kernel must divide input");
    const int Ho = H / kh, Wo = W / kw;
    auto n = std::make_shared<NodeT<T>>();
    n->val = TensorT<T>({C, Ho, Wo});
    const T inv = T(1) / T(kh * kw);
    for (int c = 0; c < C; ++c)
        for (int oh = 0; oh < Ho; ++oh)
            for (int ow = 0; ow < Wo; ++ow) {
                T acc = T(0);
                for (int u = 0; u < kh; ++u)
                    for (int v = 0; v < kw; ++v) acc += x->val.at3(c, oh * kh + u, ow * kw + v);
                n->val.at3(c, oh, ow) = acc * inv;
            }
    n->parents = {x};
    NodeT<T>* np = n.get();
    n->backfn = [np, x, C, Ho, Wo, kh, kw, inv]() {
        for (int c = 0; c < C; ++c)
            for (int oh = 0; oh < Ho; ++oh)
                for (int ow = 0; ow < Wo; ++ow) {
                    const T g = np->grad.at3(c, oh, ow) * inv;
                    for (int u = 0; u < kh; ++u)
                        for (int v = 0; v < kw; ++v)
                            x->grad.at3(c, oh * kh + u, ow * kw + v) += g;
                }
    };
    return n;
}

// Nearest-neighbor 2x upsample on [C,H,W]; backward sums each 2x2 cell.
template <class T>
NodePtrT<T> upsample2x(const NodePtrT<T>& x) {
    require(x->val.ndim() == 3, "upsample2x: input must be [C,H,W]");
    const int C = x->val.dim(0), H = x->val.dim(1), W = x->val.dim(2);
    auto n = std::make_shared<NodeT<T>>();
    n->val = TensorT<T>({C, H * 2, W * 2});
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < H * 2; ++h)
            for (int w = 0; w < W * 2; ++w) n->val.at3(c, h, w) = x->val.at3(c, h / 2, w / 2);
    n->parents = {x};
    NodeT<T>* np = n.get();
    n->backfn = [np, x, C, H, W]() {
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H * 2; ++h)
                for (int w = 0; w < W * 2; ++w)
                    x->grad.at3(c, h / 2, w / 2) += np->grad.at3(c, h, w);
    };
    return n;
}

// ====== normalization / softmax ======

// Row-wise softmax on [N,d]. mask, when nonempty, is added to the logits
// first (use large negatives to knock out positions).
template <class T>
NodePtrT<T> softmax_rows(const NodePtrT<T>& x, const TensorT<T>* mask = nullptr) {
    require(x->val.ndim() == 2, "softmax_rows: input must be [N,d]");
    const int N = x->val.dim(0), d = x->val.dim(1);
    if (mask) require(mask->same_shape(x->val), "softmax_rows: mask shape mismatch");
    auto n = std::make_shared<NodeT<T>>();
    n->val = TensorT<T>(x->val.shape);
    for (int i = 0; i < N; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (int j = 0; j < d; ++j) {
            T v = x->val.at2(i, j) + (mask ? mask->at2(i, j) : T(0));
            mx = std::max(mx, v);
        }
        T Z = T(0);
        for (int j = 0; j < d; ++j) {
            T v = std::exp(x->val.at2(i, j) + (mask ? mask->at2(i, j) : T(0)) - mx);
            n->val.at2(i, j) = v;
            Z += v;
        }
        for (int j = 0; j < d; ++j) n->val.at2(i, j) /= Z;
    }
    n->parents = {x};
    NodeT<T>* np = n.get();
    n->backfn = [np, x, N, d]() {
        for (int i = 0; i < N; ++i) {
            T dot = T(0);
            for (int j = 0; j < d; ++j) dot += np->grad.at2(i, j) * np->val.at2(i, j);
            for (int j = 0; j < d; ++j)
                x->grad.at2(i, j) += np->val.at2(i, j) * (np->grad.at2(i, j) - dot);
        }
    };
    return n;
}

namespace detail {

// Generic layer norm over contiguous groups of length d. x viewed as [N,d];
// each group normalized to zero mean unit variance then scaled by g, shifted
// by b (both length d).
template <class T>
NodePtrT<T> layernorm_groups(const NodePtrT<T>& x, const NodePtrT<T>& g, const NodePtrT<T>& b,
                             int N, int d, T eps) {
    auto n = std::make_shared<NodeT<T>>();
    n->val = TensorT<T>(x->val.shape);
    auto xhat = std::make_shared<std::vector<T>>(size_t(N) * d);
    auto rstd = std::make_shared<std::vector<T>>(size_t(N));
    for (int i = 0; i < N; ++i) {
        T mu = T(0);
        for (int j = 0; j < d; ++j) mu += x->val.data[size_t(i) * d + j];
        mu /= T(d);
        T var = T(0);
        for (int j = 0; j < d; ++j) {
            T c = x->val.data[size_t(i) * d + j] - mu;
            var += c * c;
        }
        var /= T(d);
        const T rs = T(1) / std::sqrt(var + eps);
        (*rstd)[size_t(i)] = rs;
        for (int j = 0; j < d; ++j) {
            T xh = (x->val.data[size_t(i) * d + j] - mu) * rs;
            (*xhat)[size_t(i) * d + j] = xh;
            n->val.data[size_t(i) * d + j] = xh * g->val.data[size_t(j)] + b->val.data[size_t(j)];
        }
    }
    n->parents = {x, g, b};
    NodeT<T>* np = n.get();
    n->backfn = [np, x, g, b, N, d, xhat, rstd]() {
        for (int i = 0; i < N; ++i) {
            T sum_gy = T(0), sum_gyx = T(0);
            for (int j = 0; j < d; ++j) {
                const size_t k = size_t(i) * d + j;
                const T gy = np->grad.data[k] * g->val.data[size_t(j)];
                sum_gy += gy;
                sum_gyx += gy * (*xhat)[k];
            }
            const T rs = (*rstd)[size_t(i)];
            for (int j = 0; j < d; ++j) {
                const size_t k = size_t(i) * d + j;
                const T gy = np->grad.data[k] * g->val.data[size_t(j)];
                x->grad.data[k] += rs * (gy - sum_gy / T(d) - (*xhat)[k] * sum_gyx / T(d));
                g->grad.data[size_t(j)] += np->grad.data[k] * (*xhat)[k];
                b->grad.data[size_t(j)] += np->grad.data[k];
            }
        }
    };
    return n;
}

}  // namespace detail

// Layer norm across the last dim of [N,d].
template <class T>
NodePtrT<T> layernorm_rows(const NodePtrT<T>& x, const NodePtrT<T>& g, const NodePtrT<T>& b,
                           T eps = T(1e-5)) {
    require(x->val.ndim() == 2, "layernorm_rows: input must be [N,d]");
    const int d = x->val.dim(1);
    require(g->val.numel() == d && b->val.numel() == d, "layernorm_rows: bad gain/bias");
    return detail::layernorm_groups(x, g, b, x->val.dim(0), d, eps);
}

// Layer norm across channels of [C,H,W] at each spatial position. Implemented
// by permuting to [H*W, C] groups and permuting back.
template <class T>
NodePtrT<T> layernorm_channel(const NodePtrT<T>& x, const NodePtrT<T>& g, const NodePtrT<T>& b,
                              T eps = T(1e-5)) {
    require(x->val.ndim() == 3, "layernorm_channel: input must be [C,H,W]");
    const int C = x->val.dim(0), H = x->val.dim(1), W = x->val.dim(2);
    require(g->val.numel() == C && b->val.numel() == C, "layernorm_channel: bad gain/bias");
    std::vector<int64_t> to_hwc(size_t(C) * H * W), to_chw(size_t(C) * H * W);
    for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const int64_t chw = (int64_t(c) * H + h) * W + w;
                const int64_t hwc = (int64_t(h) * W + w) * C + c;
                to_hwc[size_t(hwc)] = chw;
                to_chw[size_t(chw)] = hwc;
            }
    auto rows = gather(x, std::move(to_hwc), {H * W, C});
    auto normed = detail::layernorm_groups(rows, g, b, H * W, C, eps);
    return gather(normed, std::move(to_chw), {C, H, W});
}

}  // namespace veil::nn
