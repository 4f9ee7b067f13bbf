// Hot numeric kernels. veil::kernels is OpenMP-parallel over output elements;
// veil::kernels::ref holds serial twins with the identical per-element
// reduction order, so results are bitwise equal and tests can diff them.
#pragma once

#include "veil/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace veil::kernels {

// ====== conv2d (stride 1, zero padding) ======
// x: [Cin,H,W]  w: [Cout,Cin,kh,kw]  b: [Cout]  ->  y: [Cout,Hout,Wout]
// Hout = H + 2*pad - kh + 1. pad = k/2 keeps spatial size for odd k.

template <class T>
inline void conv2d_shape_check(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    require(x.ndim() == 3, "conv2d: input must be [C,H,W]");
    require(w.ndim() == 4, "conv2d: weight must be [Cout,Cin,kh,kw]");
    require(w.dim(1) == x.dim(0), "conv2d: channel mismatch");
    require(b.numel() == 0 || (b.ndim() == 1 && b.dim(0) == w.dim(0)),
            "conv2d: bias must be [Cout]");
}

template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                          int pad) {
    conv2d_shape_check(x, w, b);
    const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int Hout = H + 2 * pad - kh + 1, Wout = W + 2 * pad - kw + 1;
    require(Hout > 0 && Wout > 0, "conv2d: kernel larger than padded input");
    TensorT<T> y({Cout, Hout, Wout});
    const bool has_b = b.numel() > 0;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) if (Cout * Hout > 8)
#endif
    for (int co = 0; co < Cout; ++co) {
        for (int oh = 0; oh < Hout; ++oh) {
            for (int ow = 0; ow < Wout; ++ow) {
                T acc = has_b ? b[co] : T(0);
                for (int ci = 0; ci < Cin; ++ci) {
                    for (int u = 0; u < kh; ++u) {
                        const int ih = oh - pad + u;
                        if (ih < 0 || ih >= H) continue;
                        for (int v = 0; v < kw; ++v) {
                            const int iw = ow - pad + v;
                            if (iw < 0 || iw >= W) continue;
                            acc += x.at3(ci, ih, iw) * w.at4(co, ci, u, v);
                        }
                    }
                }
                y.at3(co, oh, ow) = acc;
            }
        }
    }
    return y;
}

template <class T>
TensorT<T> conv2d_backward_input(const TensorT<T>& gy, const TensorT<T>& w, int H, int W,
                                 int pad) {
    const int Cout = w.dim(0), Cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int Hout = gy.dim(1), Wout = gy.dim(2);
    require(gy.dim(0) == Cout, "conv2d_backward_input: grad channel mismatch");
    TensorT<T> gx({Cin, H, W});
#ifdef _OPENMP
#pragma omp parallel for collapse(2) if (Cin * H > 8)
#endif
    for (int ci = 0; ci < Cin; ++ci) {
        for (int ih = 0; ih < H; ++ih) {
            for (int iw = 0; iw < W; ++iw) {
                T acc = T(0);
                for (int co = 0; co < Cout; ++co) {
                    for (int u = 0; u < kh; ++u) {
                        const int oh = ih + pad - u;
                        if (oh < 0 || oh >= Hout) continue;
                        for (int v = 0; v < kw; ++v) {
                            const int ow = iw + pad - v;
                            if (ow < 0 || ow >= Wout) continue;
                            acc += gy.at3(co, oh, ow) * w.at4(co, ci, u, v);
                        }
                    }
                }
                gx.at3(ci, ih, iw) = acc;
            }
        }
    }
    return gx;
}

template <class T>
TensorT<T> conv2d_backward_weight(const TensorT<T>& gy, const TensorT<T>& x, int kh, int kw,
                                  int pad) {
    const int Cout = gy.dim(0), Hout = gy.dim(1), Wout = gy.dim(2);
    const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
    TensorT<T> gw({Cout, Cin, kh, kw});
#ifdef _OPENMP
#pragma omp parallel for collapse(2) if (Cout * Cin > 4)
#endif
    for (int co = 0; co < Cout; ++co) {
        for (int ci = 0; ci < Cin; ++ci) {
            for (int u = 0; u < kh; ++u) {
                for (int v = 0; v < kw; ++v) {
                    T acc = T(0);
                    for (int oh = 0; oh < Hout; ++oh) {
                        const int ih = oh - pad + u;
                        if (ih < 0 || ih >= H) continue;
                        for (int ow = 0; ow < Wout; ++ow) {
                            const int iw = ow - pad + v;
                            if (iw < 0 || iw >= W) continue;
                            acc += gy.at3(co, oh, ow) * x.at3(ci, ih, iw);
                        }
                    }
                    gw.at4(co, ci, u, v) = acc;
                }
            }
        }
    }
    return gw;
}

template <class T>
TensorT<T> conv2d_backward_bias(const TensorT<T>& gy) {
    const int Cout = gy.dim(0);
    TensorT<T> gb({Cout});
#ifdef _OPENMP
#pragma omp parallel for if (Cout > 8)
#endif
    for (int co = 0; co < Cout; ++co) {
        T acc = T(0);
        for (int oh = 0; oh < gy.dim(1); ++oh)
            for (int ow = 0; ow < gy.dim(2); ++ow) acc += gy.at3(co, oh, ow);
        gb[co] = acc;
    }
    return gb;
}

// ====== matmul ======
// out[M,N] = opA(a) * opB(b); transpose flags select the operand layout.

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b, bool ta = false, bool tb = false) {
    require(a.ndim() == 2 && b.ndim() == 2, "matmul: operands must be 2D");
    const int M = ta ? a.dim(1) : a.dim(0);
    const int K = ta ? a.dim(0) : a.dim(1);
    const int Kb = tb ? b.dim(1) : b.dim(0);
    const int N = tb ? b.dim(0) : b.dim(1);
    require(K == Kb, "matmul: inner dimension mismatch");
    TensorT<T> out({M, N});
#ifdef _OPENMP
#pragma omp parallel for if (M > 4)
#endif
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < N; ++j) {
            T acc = T(0);
            for (int k = 0; k < K; ++k) {
                const T av = ta ? a.at2(k, i) : a.at2(i, k);
                const T bv = tb ? b.at2(j, k) : b.at2(k, j);
                acc += av * bv;
            }
            out.at2(i, j) = acc;
        }
    }
    return out;
}

// ====== serial reference twins ======
// Same loop nests minus the pragmas. Kept separate (not a template flag) so a
// miscompiled or misordered parallel path cannot silently shadow the oracle.
namespace ref {

template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                          int pad) {
    conv2d_shape_check(x, w, b);
    const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int Hout = H + 2 * pad - kh + 1, Wout = W + 2 * pad - kw + 1;
    require(Hout > 0 && Wout > 0, "conv2d: kernel larger than padded input");
    TensorT<T> y({Cout, Hout, Wout});
    const bool has_b = b.numel() > 0;
    for (int co = 0; co < Cout; ++co)
        for (int oh = 0; oh < Hout; ++oh)
            for (int ow = 0; ow < Wout; ++ow) {
                T acc = has_b ? b[co] : T(0);
                for (int ci = 0; ci < Cin; ++ci)
                    for (int u = 0; u < kh; ++u) {
                        const int ih = oh - pad + u;
                        if (ih < 0 || ih >= H) continue;
                        for (int v = 0; v < kw; ++v) {
                            const int iw = ow - pad + v;
                            if (iw < 0 || iw >= W) continue;
                            acc += x.at3(ci, ih, iw) * w.at4(co, ci, u, v);
                        }
                    }
                y.at3(co, oh, ow) = acc;
            }
    return y;
}

template <class T>
TensorT<T> conv2d_backward_input(const TensorT<T>& gy, const TensorT<T>& w, int H, int W,
                                 int pad) {
    const int Cout = w.dim(0), Cin = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int Hout = gy.dim(1), Wout = gy.dim(2);
    require(gy.dim(0) == Cout, "conv2d_backward_input: grad channel mismatch");
    TensorT<T> gx({Cin, H, W});
    for (int ci = 0; ci < Cin; ++ci)
        for (int ih = 0; ih < H; ++ih)
            for (int iw = 0; iw < W; ++iw) {
                T acc = T(0);
                for (int co = 0; co < Cout; ++co)
                    for (int u = 0; u < kh; ++u) {
                        const int oh = ih + pad - u;
                        if (oh < 0 || oh >= Hout) continue;
                        for (int v = 0; v < kw; ++v) {
                            const int ow = iw + pad - v;
                            if (ow < 0 || ow >= Wout) continue;
                            acc += gy.at3(co, oh, ow) * w.at4(co, ci, u, v);
                        }
                    }
                gx.at3(ci, ih, iw) = acc;
            }
    return gx;
}

template <class T>
TensorT<T> conv2d_backward_weight(const TensorT<T>& gy, const TensorT<T>& x, int kh, int kw,
                                  int pad) {
    const int Cout = gy.dim(0), Hout = gy.dim(1), Wout = gy.dim(2);
    const int Cin = x.dim(0), H = x.dim(1), W = x.dim(2);
    TensorT<T> gw({Cout, Cin, kh, kw});
    for (int co = 0; co < Cout; ++co)
        for (int ci = 0; ci < Cin; ++ci)
            for (int u = 0; u < kh; ++u)
                for (int v = 0; v < kw; ++v) {
                    T acc = T(0);
                    for (int oh = 0; oh < Hout; ++oh) {
                        const int ih = oh - pad + u;
                        if (ih < 0 || ih >= H) continue;
                        for (int ow = 0; ow < Wout; ++ow) {
                            const int iw = ow - pad + v;
                            if (iw < 0 || iw >= W) continue;
                            acc += gy.at3(co, oh, ow) * x.at3(ci, ih, iw);
                        }
                    }
                    gw.at4(co, ci, u, v) = acc;
                }
    return gw;
}

template <class T>
TensorT<T> conv2d_backward_bias(const TensorT<T>& gy) {
    const int Cout = gy.dim(0);
    TensorT<T> gb({Cout});
    for (int co = 0; co < Cout; ++co) {
        T acc = T(0);
        for (int oh = 0; oh < gy.dim(1); ++oh)
            for (int ow = 0; ow < gy.dim(2); ++ow) acc += gy.at3(co, oh, ow);
        gb[co] = acc;
    }
    return gb;
}

template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b, bool ta = false, bool tb = false) {
    require(a.ndim() == 2 && b.ndim() == 2, "matmul: operands must be 2D");
    const int M = ta ? a.dim(1) : a.dim(0);
    const int K = ta ? a.dim(0) : a.dim(1);
    const int Kb = tb ? b.dim(1) : b.dim(0);
    const int N = tb ? b.dim(0) : b.dim(1);
    require(K == Kb, "matmul: inner dimension mismatch");
    TensorT<T> out({M, N});
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            T acc = T(0);
            for (int k = 0; k < K; ++k) {
                const T av = ta ? a.at2(k, i) : a.at2(i, k);
                const T bv = tb ? b.at2(j, k) : b.at2(k, j);
                acc += av * bv;
            }
            out.at2(i, j) = acc;
        }
    return out;
}

}  // namespace ref
}  // namespace veil::kernels
