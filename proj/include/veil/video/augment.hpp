// Training-time augmentation: one random crop offset per clip plus optional
// horizontal/vertical flips, identical across frames.
#pragma once

#include <random>

#include "veil/video/clip.hpp"

namespace veil::video {

inline VideoClip augment(const VideoClip& clip, int crop_h, int crop_w, bool flip_h, bool flip_v,
                         uint64_t rng_seed) {
    validate_clip(clip);
    require(crop_h > 0 && crop_w > 0 && crop_h % 2 == 0 && crop_w % 2 == 0,
            "augment: crop must be positive even");
    require(crop_h <= clip.H() && crop_w <= clip.W(), "augment: crop larger than frame");
    std::mt19937_64 rng(rng_seed);
    const int oy = std::uniform_int_distribution<int>(0, clip.H() - crop_h)(rng);
    const int ox = std::uniform_int_distribution<int>(0, clip.W() - crop_w)(rng);

    VideoClip out;
    out.fps = clip.fps;
    out.audio = clip.audio;
    out.meta = clip.meta;
    for (const Frame& f : clip.frames) {
        Frame g({f.dim(0), crop_h, crop_w});
        for (int c = 0; c < f.dim(0); ++c)
            for (int y = 0; y < crop_h; ++y)
                for (int x = 0; x < crop_w; ++x) {
                    const int sy = flip_v ? crop_h - 1 - y : y;
                    const int sx = flip_h ? crop_w - 1 - x : x;
                    g.at3(c, y, x) = f.at3(c, oy + sy, ox + sx);
                }
        out.frames.push_back(std::move(g));
    }
    return out;
}

}  // namespace veil::video
