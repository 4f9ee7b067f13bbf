// One-level orthonormal Haar DWT per frame plus the cross-frame band packing
// used before hiding. Transforms accumulate in double and round once, so the
// float32 round trip stays well inside 1e-6; the pack/unpack bookkeeping is a
// pure reindexing and bit-exact.
#pragma once

#include <array>
#include <vector>

#include "veil/tensor.hpp"

namespace veil::wavelet {

template <class T>
struct BandsT {
    TensorT<T> ll, hl, lh, hh;  // each [C,H/2,W/2]
};

using Bands = BandsT<float>;

// Per 2x2 block [[a,b],[c,d]] and channel:
//   LL=(a+b+c+d)/2  HL=(a+b-c-d)/2  LH=(a-b+c-d)/2  HH=(a-b-c+d)/2
template <class T>
BandsT<T> dwt2(const TensorT<T>& frame) {
    require(frame.ndim() == 3, "dwt2: frame must be [C,H,W]");
    const int C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
    require(H % 2 == 0 && W % 2 == 0, "dwt2: H and W must be even");
    BandsT<T> out;
    out.ll = TensorT<T>({C, H / 2, W / 2});
    out.hl = TensorT<T>({C, H / 2, W / 2});
    out.lh = TensorT<T>({C, H / 2, W / 2});
    out.hh = TensorT<T>({C, H / 2, W / 2});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H / 2; ++i)
            for (int j = 0; j < W / 2; ++j) {
                const double a = frame.at3(c, 2 * i, 2 * j);
                const double b = frame.at3(c, 2 * i, 2 * j + 1);
                const double cc = frame.at3(c, 2 * i + 1, 2 * j);
                const double d = frame.at3(c, 2 * i + 1, 2 * j + 1);
                out.ll.at3(c, i, j) = T((a + b + cc + d) * 0.5);
                out.hl.at3(c, i, j) = T((a + b - cc - d) * 0.5);
                out.lh.at3(c, i, j) = T((a - b + cc - d) * 0.5);
                out.hh.at3(c, i, j) = T((a - b - cc + d) * 0.5);
            }
    return out;
}

template <class T>
TensorT<T> idwt2(const BandsT<T>& bands) {
    const auto& s = bands.ll.shape;
    require(bands.ll.ndim() == 3, "idwt2: bands must be [C,H/2,W/2]");
    require(bands.hl.shape == s && bands.lh.shape == s && bands.hh.shape == s,
            "idwt2: band shape mismatch");
    const int C = s[0], Hh = s[1], Wh = s[2];
    TensorT<T> out({C, Hh * 2, Wh * 2});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < Hh; ++i)
            for (int j = 0; j < Wh; ++j) {
                const double ll = bands.ll.at3(c, i, j);
                const double hl = bands.hl.at3(c, i, j);
                const double lh = bands.lh.at3(c, i, j);
                const double hh = bands.hh.at3(c, i, j);
                out.at3(c, 2 * i, 2 * j) = T((ll + hl + lh + hh) * 0.5);
                out.at3(c, 2 * i, 2 * j + 1) = T((ll + hl - lh - hh) * 0.5);
                out.at3(c, 2 * i + 1, 2 * j) = T((ll - hl + lh - hh) * 0.5);
                out.at3(c, 2 * i + 1, 2 * j + 1) = T((ll - hl - lh + hh) * 0.5);
            }
    return out;
}

// Stack layout [4*G*C, H/2, W/2]: band-major (LL,HL,LH,HH), then frame within
// the group, then channel. Channel index = band*(G*C) + g*C + c.
template <class T>
TensorT<T> pack_bands(const std::vector<BandsT<T>>& groups) {
    require(!groups.empty(), "pack_bands: empty group");
    const int G = int(groups.size());
    const int C = groups[0].ll.dim(0), Hh = groups[0].ll.dim(1), Wh = groups[0].ll.dim(2);
    TensorT<T> stack({4 * G * C, Hh, Wh});
    const int64_t plane = int64_t(Hh) * Wh;
    for (int g = 0; g < G; ++g) {
        const BandsT<T>& b = groups[size_t(g)];
        require(b.ll.dim(0) == C && b.ll.dim(1) == Hh && b.ll.dim(2) == Wh,
                "pack_bands: group shape mismatch");
        const TensorT<T>* bands[4] = {&b.ll, &b.hl, &b.lh, &b.hh};
        for (int band = 0; band < 4; ++band)
            for (int c = 0; c < C; ++c) {
                const int ch = band * (G * C) + g * C + c;
                std::copy(bands[band]->data.begin() + c * plane,
                          bands[band]->data.begin() + (c + 1) * plane,
                          stack.data.begin() + ch * plane);
            }
    }
    return stack;
}

template <class T>
std::vector<BandsT<T>> unpack_bands(const TensorT<T>& stack, int G, int C) {
    require(stack.ndim() == 3, "unpack_bands: stack must be 3D");
    require(G >= 1 && C >= 1 && stack.dim(0) == 4 * G * C,
            "unpack_bands: first dim must equal 4*G*C");
    const int Hh = stack.dim(1), Wh = stack.dim(2);
    const int64_t plane = int64_t(Hh) * Wh;
    std::vector<BandsT<T>> groups(static_cast<size_t>(G));
    for (int g = 0; g < G; ++g) {
        BandsT<T>& b = groups[size_t(g)];
        TensorT<T>* bands[4] = {&b.ll, &b.hl, &b.lh, &b.hh};
        for (int band = 0; band < 4; ++band) {
            *bands[band] = TensorT<T>({C, Hh, Wh});
            for (int c = 0; c < C; ++c) {
                const int ch = band * (G * C) + g * C + c;
                std::copy(stack.data.begin() + ch * plane, stack.data.begin() + (ch + 1) * plane,
                          bands[band]->data.begin() + c * plane);
            }
        }
    }
    return groups;
}

template <class T>
TensorT<T> band_pack(const std::vector<TensorT<T>>& frames) {
    std::vector<BandsT<T>> groups;
    groups.reserve(frames.size());
    for (const auto& f : frames) groups.push_back(dwt2(f));
    return pack_bands(groups);
}

template <class T>
std::vector<TensorT<T>> band_unpack(const TensorT<T>& stack, int G, int C) {
    auto groups = unpack_bands(stack, G, C);
    std::vector<TensorT<T>> frames;
    frames.reserve(groups.size());
    for (const auto& b : groups) frames.push_back(idwt2(b));
    return frames;
}

}  // namespace veil::wavelet
