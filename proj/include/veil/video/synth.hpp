// Synthetic parametric-face clips with exact ground-truth motion tracks, plus
// generators for cover textures and audio feature matrices.
#pragma once

#include <array>
#include <random>

#include "veil/video/clip.hpp"

namespace veil::video {

struct SyntheticFaceParams {
    float head_cx = 0.5f;  // fractions of W/H so sizes transfer across resolutions
    float head_cy = 0.5f;
    float head_tilt = 0.0f;  // radians
    float eye_open_left = 1.0f;
    float eye_open_right = 1.0f;
    float mouth_open = 0.0f;
    uint64_t identity_seed = 0;
};

struct FaceTracks {
    std::vector<float> lip;              // [T] mouth_open
    std::vector<float> blink;            // [T] mean eye openness
    std::vector<std::array<float, 3>> pose;  // [T] (tilt, cx, cy)
};

// Renders ellipse head + eyes + mouth per frame. Tracks echo the input
// parameters exactly; they are the oracle for the animation losses.
std::pair<VideoClip, FaceTracks> synth_face_clip(const std::vector<SyntheticFaceParams>& track,
                                                 int H, int W, double fps, int channels = 1);

// Pixel count of the rendered mouth aperture; nested regions make this
// monotone in mouth_open.
int mouth_aperture_pixels(const Frame& frame, const SyntheticFaceParams& p);

// Eye landmark endpoints in unit image coordinates, rotated and translated
// with the head. Width spans are fixed by the eye geometry; height spans
// scale with per-eye openness.
struct EyeLandmarks {
    std::array<float, 2> left_w0, left_w1, left_h0, left_h1;
    std::array<float, 2> right_w0, right_w1, right_h0, right_h1;
};
EyeLandmarks eye_landmarks(const SyntheticFaceParams& p);

// Gaussian-dip blink signal: openness 1 minus a bump at each blink center.
std::vector<float> blink_signal(int T, const std::vector<int>& blink_centers, float sigma);

// Piecewise-smooth textures (flat toned regions plus grainy ones) quantized
// to 8 bits; stands in for natural cover footage in the steganalysis corpus.
VideoClip synth_cover_clip(int T, int C, int H, int W, double fps, uint64_t seed);

// Uniform-noise frames quantized to 8 bits. Models an encrypted payload: LSB
// steganalysis assumes the embedded bit stream is indistinguishable from
// random, which is what encryption or compression of a secret produces.
VideoClip synth_noise_clip(int T, int C, int H, int W, double fps, uint64_t seed);

// Mel-like feature matrix whose per-row energy follows the lip track, so the
// audio genuinely drives mouth motion in training.
Tensor audio_from_lip_track(const std::vector<float>& lip, int n_mel, uint64_t seed);

// Convenience talking-head parameter track: sinusoidal mouth, blinks, drift.
std::vector<SyntheticFaceParams> talking_track(int T, uint64_t identity_seed);

}  // namespace veil::video
