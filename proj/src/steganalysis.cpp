#include "veil/eval/steganalysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "veil/video/io.hpp"

namespace veil::eval {

namespace {

std::vector<uint8_t> frame_bytes(const Tensor& frame) {
    require(frame.ndim() == 3, "steg_detectors: frame must be [C,H,W]");
    std::vector<uint8_t> bytes(frame.data.size());
    for (size_t i = 0; i < frame.data.size(); ++i) bytes[i] = video::to_u8(frame.data[i]);
    return bytes;
}

// Smaller-magnitude real root of a*x^2 + b*x + c = 0. Sampling noise in the
// trace counts can push the discriminant slightly negative; the vertex is
// then the closest real point to a root, so return it instead of bailing.
double quad_root_small(double a, double b, double c, double fallback) {
    if (std::abs(a) < 1e-12) {
        if (std::abs(b) < 1e-12) return fallback;
        return -c / b;
    }
    const double disc = b * b - 4 * a * c;
    if (disc < 0) return -b / (2 * a);
    const double sq = std::sqrt(disc);
    const double r1 = (-b + sq) / (2 * a);
    const double r2 = (-b - sq) / (2 * a);
    return std::abs(r1) <= std::abs(r2) ? r1 : r2;
}

// Sample-pair estimator over pixel pairs. Counts follow the trace-set
// bookkeeping: W = pairs inside one LSB bucket, Z = equal pairs, X/Y split by
// the parity of the second sample.
double sample_pair_estimate(const uint8_t* data, int C, int H, int W_, bool vertical) {
    int64_t P = 0, W = 0, Z = 0, X = 0, Y = 0;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < (vertical ? H - 1 : H); ++y)
            for (int x = 0; x < (vertical ? W_ : W_ - 1); ++x) {
                const int64_t base = (int64_t(c) * H + y) * W_ + x;
                const uint8_t u = data[size_t(base)];
                const uint8_t v =
                    data[size_t(vertical ? base + W_ : base + 1)];
                ++P;
                if ((u >> 1) == (v >> 1) && (u & 1) != (v & 1)) ++W;
                if (u == v) ++Z;
                const bool v_even = (v & 1) == 0;
                if ((v_even && u < v) || (!v_even && u > v)) ++X;
                if ((v_even && u > v) || (!v_even && u < v)) ++Y;
            }
    if (P == 0) return 0.0;
    const double a = 0.5 * double(W + Z);
    const double b = double(2 * X - P);
    const double c = double(Y - X);
    const double p = quad_root_small(a, b, c, 0.0);
    return std::clamp(p, 0.0, 1.0);
}

// RS estimator with mask [0,1,1,0] over non-overlapping horizontal groups.
double rs_estimate(const uint8_t* data, int C, int H, int W_) {
    static const int mask[4] = {0, 1, 1, 0};
    auto smoothness = [](const int g[4]) {
        return std::abs(g[1] - g[0]) + std::abs(g[2] - g[1]) + std::abs(g[3] - g[2]);
    };
    auto flip_pos = [](int v) { return v ^ 1; };
    auto flip_neg = [](int v) { return ((v + 1) ^ 1) - 1; };

    // counts[0]: original image; counts[1]: all LSBs flipped.
    double Rm[2] = {0, 0}, Sm[2] = {0, 0}, Rn[2] = {0, 0}, Sn[2] = {0, 0};
    int64_t groups = 0;
    for (int image = 0; image < 2; ++image) {
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x + 4 <= W_; x += 4) {
                    int g[4], gp[4], gn[4];
                    for (int i = 0; i < 4; ++i) {
                        int v = data[size_t((int64_t(c) * H + y) * W_ + x + i)];
                        if (image == 1) v = flip_pos(v);
                        g[i] = v;
                        gp[i] = mask[i] ? flip_pos(v) : v;
                        gn[i] = mask[i] ? flip_neg(v) : v;
                    }
                    const int f0 = smoothness(g), fp = smoothness(gp), fn = smoothness(gn);
                    if (fp > f0) Rm[image] += 1;
                    if (fp < f0) Sm[image] += 1;
                    if (fn > f0) Rn[image] += 1;
                    if (fn < f0) Sn[image] += 1;
                    if (image == 0) ++groups;
                }
    }
    if (groups == 0) return 0.0;
    for (int image = 0; image < 2; ++image) {
        Rm[image] /= double(groups);
        Sm[image] /= double(groups);
        Rn[image] /= double(groups);
        Sn[image] /= double(groups);
    }
    const double d0 = Rm[0] - Sm[0];
    const double d1 = Rm[1] - Sm[1];
    const double dn0 = Rn[0] - Sn[0];
    const double dn1 = Rn[1] - Sn[1];
    const double a = 2 * (d1 + d0);
    const double b = dn0 - dn1 - d1 - 3 * d0;
    const double c = d0 - dn0;
    const double z = quad_root_small(a, b, c, 0.0);
    if (!std::isfinite(z) || std::abs(z - 0.5) < 1e-12) return 0.0;
    const double p = z / (z - 0.5);
    return std::clamp(p, 0.0, 1.0);
}

// Chi-square attack on pairs-of-values: embedded LSBs even out each (2k,2k+1)
// bucket pair, so a small statistic means likely embedding. Returns the
// probability-of-embedding Q(dof/2, chi2/2).
double chi_square_pov(const uint8_t* data, size_t n) {
    int64_t hist[256] = {0};
    for (size_t i = 0; i < n; ++i) ++hist[data[i]];
    double chi2 = 0;
    int dof = 0;
    for (int k = 0; k < 128; ++k) {
        const double expected = 0.5 * double(hist[2 * k] + hist[2 * k + 1]);
        if (expected > 0.5) {
            const double d = double(hist[2 * k]) - expected;
            chi2 += d * d / expected;
            ++dof;
        }
    }
    if (dof <= 1) return 0.0;
    return gammq(0.5 * double(dof - 1), 0.5 * chi2);
}

}  // namespace

double gammq(double a, double x) {
    // Series for x < a+1, continued fraction otherwise (the usual split).
    if (x < 0 || a <= 0) throw ValidationError("gammq: bad arguments");
    if (x == 0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-12) break;
        }
        const double p = sum * std::exp(-x + a * std::log(x) - gln);
        return 1.0 - p;
    }
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-12) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

DetectorFeatures steg_detectors(const Tensor& frame) {
    const auto bytes = frame_bytes(frame);
    const int C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);

    DetectorFeatures f;
    const bool constant = std::all_of(bytes.begin(), bytes.end(),
                                      [&](uint8_t b) { return b == bytes[0]; });
    if (constant) {
        f.degenerate = true;
        return f;
    }
    f.sample_pair = sample_pair_estimate(bytes.data(), C, H, W, false);
    f.rs = rs_estimate(bytes.data(), C, H, W);
    f.chi_square = chi_square_pov(bytes.data(), bytes.size());
    f.primary_sets = sample_pair_estimate(bytes.data(), C, H, W, true);
    f.fusion = 0.25 * (f.sample_pair + f.rs + f.chi_square + f.primary_sets);
    return f;
}

RocCurve roc(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg) {
    require(!scores_pos.empty() && !scores_neg.empty(), "roc: empty score set");
    std::vector<double> all;
    all.reserve(scores_pos.size() + scores_neg.size());
    all.insert(all.end(), scores_pos.begin(), scores_pos.end());
    all.insert(all.end(), scores_neg.begin(), scores_neg.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    RocCurve curve;
    auto add_point = [&](double thr) {
        double tp = 0, fp = 0;
        for (double s : scores_pos)
            if (s >= thr) ++tp;
        for (double s : scores_neg)
            if (s >= thr) ++fp;
        curve.thresholds.push_back(thr);
        curve.tpr.push_back(tp / double(scores_pos.size()));
        curve.fpr.push_back(fp / double(scores_neg.size()));
    };
    // Sweep from above the max (nothing flagged) down to the min (everything
    // flagged), so fpr/tpr climb monotonically from (0,0) to (1,1).
    add_point(all.back() + 1.0);
    for (auto it = all.rbegin(); it != all.rend(); ++it) add_point(*it);

    double auc = 0;
    for (size_t i = 1; i < curve.fpr.size(); ++i)
        auc += 0.5 * (curve.tpr[i] + curve.tpr[i - 1]) * (curve.fpr[i] - curve.fpr[i - 1]);
    curve.auc = auc;
    return curve;
}

void write_roc_csv(const RocCurve& curve, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write ROC CSV: " + path);
    os << "# auc," << curve.auc << "\n";
    os << "threshold,fpr,tpr\n";
    for (size_t i = 0; i < curve.thresholds.size(); ++i)
        os << curve.thresholds[i] << "," << curve.fpr[i] << "," << curve.tpr[i] << "\n";
}

Tensor render_roc_plot(const RocCurve& curve, int size) {
    require(size >= 64 && size % 2 == 0, "roc plot: size must be even and at least 64");
    Tensor img = Tensor::full({3, size, size}, 1.0f);
    const int margin = size / 8;
    const int plot = size - 2 * margin;

    auto put = [&](int y, int x, float r, float g, float b) {
        if (y < 0 || y >= size || x < 0 || x >= size) return;
        img.at3(0, y, x) = r;
        img.at3(1, y, x) = g;
        img.at3(2, y, x) = b;
    };
    auto to_px = [&](double fx, double fy, int& x, int& y) {
        x = margin + int(std::lround(fx * plot));
        y = size - margin - int(std::lround(fy * plot));
    };

    // Axes and chance diagonal.
    for (int i = 0; i <= plot; ++i) {
        put(size - margin, margin + i, 0, 0, 0);
        put(size - margin - i, margin, 0, 0, 0);
        put(size - margin - i, margin + i, 0.75f, 0.75f, 0.75f);
    }
    // Curve: dense interpolation between consecutive points.
    for (size_t i = 1; i < curve.fpr.size(); ++i) {
        const int steps = 2 * plot;
        for (int s = 0; s <= steps; ++s) {
            const double t = double(s) / steps;
            const double fx = curve.fpr[i - 1] + t * (curve.fpr[i] - curve.fpr[i - 1]);
            const double fy = curve.tpr[i - 1] + t * (curve.tpr[i] - curve.tpr[i - 1]);
            int x, y;
            to_px(fx, fy, x, y);
            put(y, x, 0.85f, 0.15f, 0.15f);
            put(y + 1, x, 0.85f, 0.15f, 0.15f);
        }
    }
    return img;
}

}  // namespace veil::eval
