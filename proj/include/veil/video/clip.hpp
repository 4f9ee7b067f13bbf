// Frame/clip data model. Frames are float [C,H,W] in [0,1], C is 1 or 3,
// H and W even so the one-level DWT never needs padding.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "veil/tensor.hpp"

namespace veil::video {

using Frame = Tensor;  // [C,H,W]

struct VideoClip {
    std::vector<Frame> frames;
    double fps = 25.0;
    Tensor audio;  // [T, n_mel] when present, empty otherwise
    std::map<std::string, std::string> meta;

    int T() const { return int(frames.size()); }
    int C() const { return frames.empty() ? 0 : frames[0].dim(0); }
    int H() const { return frames.empty() ? 0 : frames[0].dim(1); }
    int W() const { return frames.empty() ? 0 : frames[0].dim(2); }
};

inline void validate_frame(const Frame& f) {
    require(f.ndim() == 3, "frame must be [C,H,W]");
    require(f.dim(0) == 1 || f.dim(0) == 3, "frame channels must be 1 or 3");
    require(f.dim(1) > 0 && f.dim(1) % 2 == 0, "frame height must be positive even");
    require(f.dim(2) > 0 && f.dim(2) % 2 == 0, "frame width must be positive even");
    for (float v : f.data) {
        if (!std::isfinite(v)) throw ValidationError("frame value not finite");
        if (v < 0.0f || v > 1.0f) throw ValidationError("frame value outside [0,1]");
    }
}

inline void validate_clip(const VideoClip& clip) {
    require(!clip.frames.empty(), "clip must have at least one frame");
    require(clip.fps > 0.0, "fps must be positive");
    validate_frame(clip.frames[0]);
    for (size_t i = 1; i < clip.frames.size(); ++i) {
        require(clip.frames[i].shape == clip.frames[0].shape, "all frames must share a shape");
        validate_frame(clip.frames[i]);
    }
    if (clip.audio.numel() > 0) {
        require(clip.audio.ndim() == 2, "audio must be [T, n_mel]");
        require(clip.audio.dim(0) == clip.T(), "audio rows must match frame count");
    }
}

// 8-bit quantization helpers shared by PNG I/O and the LSB embedder.
inline uint8_t to_u8(float v) {
    float q = v * 255.0f + 0.5f;
    if (q < 0.0f) q = 0.0f;
    if (q > 255.0f) q = 255.0f;
    return uint8_t(q);
}
inline float from_u8(uint8_t b) { return float(b) / 255.0f; }

}  // namespace veil::video
