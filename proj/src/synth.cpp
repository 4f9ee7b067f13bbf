#include "veil/video/synth.hpp"

#include <cmath>

namespace veil::video {

namespace {

struct Ident {
    float skin, bg, tex_fx, tex_fy, tex_phase, tint_r, tint_g, tint_b;
};

Ident identity_style(uint64_t seed) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    Ident id;
    id.skin = 0.55f + 0.25f * u(rng);
    id.bg = 0.10f + 0.20f * u(rng);
    id.tex_fx = 6.0f + 10.0f * u(rng);
    id.tex_fy = 6.0f + 10.0f * u(rng);
    id.tex_phase = 6.2831853f * u(rng);
    id.tint_r = 0.85f + 0.15f * u(rng);
    id.tint_g = 0.70f + 0.20f * u(rng);
    id.tint_b = 0.55f + 0.20f * u(rng);
    return id;
}

struct LocalFrame {
    float cx, cy, cs, sn;  // rotation into head-local coordinates
    // Positions in unit coordinates; y grows downward.
    void to_local(float x, float y, float& u, float& v) const {
        const float dx = x - cx, dy = y - cy;
        u = cs * dx + sn * dy;
        v = -sn * dx + cs * dy;
    }
};

bool in_ellipse(float u, float v, float ecx, float ecy, float ea, float eb) {
    if (ea <= 0.0f || eb <= 0.0f) return false;
    const float du = (u - ecx) / ea, dv = (v - ecy) / eb;
    return du * du + dv * dv <= 1.0f;
}

// Geometry constants, in unit coordinates relative to the head center.
constexpr float kHeadA = 0.32f, kHeadB = 0.40f;
constexpr float kEyeDx = 0.13f, kEyeDy = -0.12f, kEyeA = 0.075f, kEyeBMax = 0.055f;
constexpr float kMouthDy = 0.20f, kLipA = 0.13f, kLipB = 0.045f;
constexpr float kApertureA = 0.10f, kApertureBMax = 0.065f;

}  // namespace

std::vector<float> blink_signal(int T, const std::vector<int>& blink_centers, float sigma) {
    std::vector<float> open(size_t(T), 1.0f);
    for (int t = 0; t < T; ++t) {
        float dip = 0.0f;
        for (int c : blink_centers) {
            const float d = float(t - c) / sigma;
            dip += std::exp(-0.5f * d * d);
        }
        open[size_t(t)] = std::clamp(1.0f - dip, 0.0f, 1.0f);
    }
    return open;
}

std::pair<VideoClip, FaceTracks> synth_face_clip(const std::vector<SyntheticFaceParams>& track,
                                                 int H, int W, double fps, int channels) {
    require(!track.empty(), "synth_face_clip: empty parameter track");
    require(H > 0 && W > 0 && H % 2 == 0 && W % 2 == 0, "synth_face_clip: H,W must be even");
    require(channels == 1 || channels == 3, "synth_face_clip: channels must be 1 or 3");

    VideoClip clip;
    clip.fps = fps;
    FaceTracks tracks;
    for (const auto& p : track) {
        const Ident id = identity_style(p.identity_seed);
        const float eo_l = std::clamp(p.eye_open_left, 0.0f, 1.0f);
        const float eo_r = std::clamp(p.eye_open_right, 0.0f, 1.0f);
        const float mo = std::clamp(p.mouth_open, 0.0f, 1.0f);
        LocalFrame lf{p.head_cx, p.head_cy, std::cos(p.head_tilt), std::sin(p.head_tilt)};

        Frame f({channels, H, W});
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const float px = (float(x) + 0.5f) / float(W);
                const float py = (float(y) + 0.5f) / float(H);
                float u, v;
                lf.to_local(px, py, u, v);

                float g = id.bg + 0.08f * py;  // backdrop with a soft vertical ramp
                if (in_ellipse(u, v, 0, 0, kHeadA, kHeadB)) {
                    const float r2 = (u / kHeadA) * (u / kHeadA) + (v / kHeadB) * (v / kHeadB);
                    g = id.skin * (1.0f - 0.18f * r2) +
                        0.05f * std::sin(id.tex_fx * u + id.tex_phase) *
                            std::cos(id.tex_fy * v - id.tex_phase);
                    const float eb_l = kEyeBMax * eo_l, eb_r = kEyeBMax * eo_r;
                    if (in_ellipse(u, v, -kEyeDx, kEyeDy, kEyeA, std::max(eb_l, 0.006f)))
                        g = eo_l <= 0.02f ? 0.30f : 0.08f;
                    else if (in_ellipse(u, v, kEyeDx, kEyeDy, kEyeA, std::max(eb_r, 0.006f)))
                        g = eo_r <= 0.02f ? 0.30f : 0.08f;
                    else if (in_ellipse(u, v, 0, kMouthDy, kApertureA, kApertureBMax * mo))
                        g = 0.05f;
                    else if (in_ellipse(u, v, 0, kMouthDy, kLipA, kLipB))
                        g = id.skin * 0.55f;
                }
                g = std::clamp(g, 0.0f, 1.0f);
                if (channels == 1) {
                    f.at3(0, y, x) = g;
                } else {
                    f.at3(0, y, x) = std::clamp(g * id.tint_r, 0.0f, 1.0f);
                    f.at3(1, y, x) = std::clamp(g * id.tint_g, 0.0f, 1.0f);
                    f.at3(2, y, x) = std::clamp(g * id.tint_b, 0.0f, 1.0f);
                }
            }
        }
        clip.frames.push_back(std::move(f));
        tracks.lip.push_back(mo);
        tracks.blink.push_back(0.5f * (eo_l + eo_r));
        tracks.pose.push_back({p.head_tilt, p.head_cx, p.head_cy});
    }
    validate_clip(clip);
    return {std::move(clip), std::move(tracks)};
}

EyeLandmarks eye_landmarks(const SyntheticFaceParams& p) {
    const float cs = std::cos(p.head_tilt), sn = std::sin(p.head_tilt);
    auto to_global = [&](float u, float v) -> std::array<float, 2> {
        return {p.head_cx + cs * u - sn * v, p.head_cy + sn * u + cs * v};
    };
    const float eb_l = kEyeBMax * std::clamp(p.eye_open_left, 0.0f, 1.0f);
    const float eb_r = kEyeBMax * std::clamp(p.eye_open_right, 0.0f, 1.0f);
    EyeLandmarks lm;
    lm.left_w0 = to_global(-kEyeDx - kEyeA, kEyeDy);
    lm.left_w1 = to_global(-kEyeDx + kEyeA, kEyeDy);
    lm.left_h0 = to_global(-kEyeDx, kEyeDy - eb_l);
    lm.left_h1 = to_global(-kEyeDx, kEyeDy + eb_l);
    lm.right_w0 = to_global(kEyeDx - kEyeA, kEyeDy);
    lm.right_w1 = to_global(kEyeDx + kEyeA, kEyeDy);
    lm.right_h0 = to_global(kEyeDx, kEyeDy - eb_r);
    lm.right_h1 = to_global(kEyeDx, kEyeDy + eb_r);
    return lm;
}

int mouth_aperture_pixels(const Frame& frame, const SyntheticFaceParams& p) {
    const int H = frame.dim(1), W = frame.dim(2);
    const float mo = std::clamp(p.mouth_open, 0.0f, 1.0f);
    LocalFrame lf{p.head_cx, p.head_cy, std::cos(p.head_tilt), std::sin(p.head_tilt)};
    int count = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const float px = (float(x) + 0.5f) / float(W);
            const float py = (float(y) + 0.5f) / float(H);
            float u, v;
            lf.to_local(px, py, u, v);
            if (in_ellipse(u, v, 0, kMouthDy, kApertureA, kApertureBMax * mo)) ++count;
        }
    return count;
}

VideoClip synth_cover_clip(int T, int C, int H, int W, double fps, uint64_t seed) {
    require(T >= 1 && (C == 1 || C == 3) && H % 2 == 0 && W % 2 == 0,
            "synth_cover_clip: bad dimensions");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u01(0.0f, 1.0f);
    std::normal_distribution<float> drift(0.0f, 0.02f);

    // Natural frames are piecewise smooth: flat regions (sky, walls, skin)
    // broken up by textured ones (hair, foliage). Both regimes matter to the
    // LSB detectors. Flat areas snap to a per-clip palette of unevenly spaced
    // tone levels plus ~1 byte of sensor noise, which concentrates neighbor
    // deltas near zero (pair-symmetry estimators need that mass to pin a
    // stable zero rate) and piles the histogram onto spiked levels (the
    // pair-of-values test needs unequal even/odd buckets). Textured areas add
    // strong per-pixel grain, so the high nibble of any clip used as an LSB
    // payload flickers at pixel scale. All noise is additive and symmetric,
    // which is exactly what keeps clean frames reading as rate zero.
    const int kStructG = 5, kRegionG = 4, kShadeG = 17;
    std::vector<float> structure(size_t(C) * kStructG * kStructG);
    std::vector<float> region(size_t(kRegionG) * kRegionG);
    std::vector<float> shade(size_t(C) * kShadeG * kShadeG);
    for (auto& g : structure) g = u01(rng);
    for (auto& g : region) g = u01(rng);
    for (auto& g : shade) g = u01(rng);

    const int levels = 12 + int(u01(rng) * 4.0f);
    std::vector<float> palette(static_cast<size_t>(levels));
    for (int i = 0; i < levels; ++i) {
        const float base = 0.08f + 0.84f * float(i) / float(levels - 1);
        palette[size_t(i)] = std::clamp(base + 0.05f * (u01(rng) - 0.5f), 0.02f, 0.98f);
    }
    std::normal_distribution<float> grain(0.0f, (22.0f + 8.0f * u01(rng)) / 255.0f);
    std::normal_distribution<float> sensor(0.0f, 1.0f / 255.0f);

    auto bilinear = [](const std::vector<float>& grid, int G, int c, float fx01, float fy01) {
        const float gx = fx01 * float(G - 1), gy = fy01 * float(G - 1);
        const int x0 = std::min(int(gx), G - 2), y0 = std::min(int(gy), G - 2);
        const float fx = gx - float(x0), fy = gy - float(y0);
        auto at = [&](int yy, int xx) {
            return grid[(size_t(c) * size_t(G) + size_t(yy)) * size_t(G) + size_t(xx)];
        };
        return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
               fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
    };

    VideoClip clip;
    clip.fps = fps;
    std::vector<float> rmap(size_t(H) * size_t(W));
    for (int t = 0; t < T; ++t) {
        Frame f({C, H, W});
        // Texture threshold sits at a fixed quantile of the region field, so
        // every frame keeps a majority of flat area regardless of where the
        // field happens to wander for this seed.
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                rmap[size_t(y) * size_t(W) + size_t(x)] =
                    bilinear(region, kRegionG, 0, float(x) / float(W - 1),
                             float(y) / float(H - 1));
        std::vector<float> sorted(rmap);
        const size_t q = sorted.size() * 3 / 5;
        std::nth_element(sorted.begin(), sorted.begin() + ptrdiff_t(q), sorted.end());
        const float threshold = sorted[q];
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const float fx01 = float(x) / float(W - 1);
                    const float fy01 = float(y) / float(H - 1);
                    const float field = 0.72f * bilinear(structure, kStructG, c, fx01, fy01) +
                                        0.28f * bilinear(shade, kShadeG, c, fx01, fy01);
                    const int idx = std::clamp(int(std::lround(field * float(levels - 1))), 0,
                                               levels - 1);
                    const float flat = palette[size_t(idx)];
                    const float busy = 0.08f + 0.84f * field + grain(rng);
                    const float r = rmap[size_t(y) * size_t(W) + size_t(x)];
                    const float m = std::clamp((r - threshold) / 0.12f, 0.0f, 1.0f);
                    const float v = (1 - m) * flat + m * busy + sensor(rng);
                    f.at3(c, y, x) = from_u8(to_u8(std::clamp(v, 0.0f, 1.0f)));
                }
        clip.frames.push_back(std::move(f));
        for (auto& g : structure) g = std::clamp(g + drift(rng), 0.05f, 0.95f);
        for (auto& g : region) g = std::clamp(g + 0.5f * drift(rng), 0.05f, 0.95f);
        for (auto& g : shade) g = std::clamp(g + drift(rng), 0.05f, 0.95f);
    }
    validate_clip(clip);
    return clip;
}

VideoClip synth_noise_clip(int T, int C, int H, int W, double fps, uint64_t seed) {
    require(T >= 1 && (C == 1 || C == 3) && H % 2 == 0 && W % 2 == 0,
            "synth_noise_clip: bad dimensions");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> byte(0, 255);
    VideoClip clip;
    clip.fps = fps;
    for (int t = 0; t < T; ++t) {
        Frame f({C, H, W});
        for (auto& v : f.data) v = from_u8(uint8_t(byte(rng)));
        clip.frames.push_back(std::move(f));
    }
    validate_clip(clip);
    return clip;
}

Tensor audio_from_lip_track(const std::vector<float>& lip, int n_mel, uint64_t seed) {
    require(!lip.empty() && n_mel > 0, "audio_from_lip_track: bad dimensions");
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> noise(0.0f, 0.02f);
    Tensor a({int(lip.size()), n_mel});
    for (size_t t = 0; t < lip.size(); ++t)
        for (int m = 0; m < n_mel; ++m) {
            const float profile = std::exp(-2.0f * float(m) / float(n_mel));
            a.at2(int(t), m) = std::max(0.0f, lip[t] * profile + 0.1f * profile + noise(rng));
        }
    return a;
}

std::vector<SyntheticFaceParams> talking_track(int T, uint64_t identity_seed) {
    std::mt19937_64 rng(identity_seed ^ 0xabcdef1234567890ull);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    const float mouth_phase = 6.2831853f * u(rng);
    const float mouth_rate = 0.7f + 0.6f * u(rng);
    const float drift_phase = 6.2831853f * u(rng);

    std::vector<int> blinks;
    for (int t = 3; t < T; t += 5 + int(u(rng) * 4)) blinks.push_back(t);
    auto open = blink_signal(T, blinks, 0.8f);

    std::vector<SyntheticFaceParams> track(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
        auto& p = track[size_t(t)];
        p.identity_seed = identity_seed;
        p.mouth_open = 0.5f + 0.5f * std::sin(mouth_rate * float(t) + mouth_phase);
        p.eye_open_left = p.eye_open_right = open[size_t(t)];
        p.head_cx = 0.5f + 0.03f * std::sin(0.4f * float(t) + drift_phase);
        p.head_cy = 0.5f + 0.02f * std::cos(0.3f * float(t) + drift_phase);
        p.head_tilt = 0.08f * std::sin(0.25f * float(t) + drift_phase * 0.5f);
    }
    return track;
}

}  // namespace veil::video
