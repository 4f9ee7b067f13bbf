// 4-bit LSB baseline: the secret's high nibble replaces the cover's low
// nibble. Recovery restores the secret to nibble precision exactly.
#pragma once

#include "veil/video/clip.hpp"

namespace veil::eval {

inline uint8_t lsb4_stego_byte(uint8_t cover, uint8_t secret) {
    return uint8_t((cover & 0xF0) | (secret >> 4));
}

inline uint8_t lsb4_recover_byte(uint8_t stego) { return uint8_t((stego & 0x0F) << 4); }

namespace detail {

inline void require_quantized(const Tensor& t, const char* what) {
    for (float v : t.data)
        if (v != video::from_u8(video::to_u8(v)))
            throw ValidationError(std::string(what) + ": values must lie on the 8-bit grid");
}

}  // namespace detail

inline Tensor lsb4_hide(const Tensor& cover, const Tensor& secret) {
    require(cover.same_shape(secret), "lsb4_hide: shape mismatch");
    detail::require_quantized(cover, "lsb4_hide cover");
    detail::require_quantized(secret, "lsb4_hide secret");
    Tensor stego = cover;
    for (size_t i = 0; i < stego.data.size(); ++i)
        stego.data[i] = video::from_u8(
            lsb4_stego_byte(video::to_u8(cover.data[i]), video::to_u8(secret.data[i])));
    return stego;
}

inline Tensor lsb4_recover(const Tensor& stego) {
    detail::require_quantized(stego, "lsb4_recover stego");
    Tensor secret = stego;
    for (size_t i = 0; i < secret.data.size(); ++i)
        secret.data[i] = video::from_u8(lsb4_recover_byte(video::to_u8(stego.data[i])));
    return secret;
}

inline video::VideoClip lsb4_hide(const video::VideoClip& cover, const video::VideoClip& secret) {
    require(cover.T() == secret.T(), "lsb4_hide: clip length mismatch");
    video::VideoClip out;
    out.fps = cover.fps;
    for (int t = 0; t < cover.T(); ++t)
        out.frames.push_back(lsb4_hide(cover.frames[size_t(t)], secret.frames[size_t(t)]));
    return out;
}

inline video::VideoClip lsb4_recover(const video::VideoClip& stego) {
    video::VideoClip out;
    out.fps = stego.fps;
    for (const auto& f : stego.frames) out.frames.push_back(lsb4_recover(f));
    return out;
}

}  // namespace veil::eval
