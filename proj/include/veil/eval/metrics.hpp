// Quality metrics for frame/clip pairs. Values live in [0,1]; PSNR uses
// MAX=1 (identical to 255-scale PSNR), MAE/RMSE are reported in 255 scale to
// match the usual 8-bit table magnitudes.
#pragma once

#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "veil/video/clip.hpp"

namespace veil::eval {

inline double mse(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "mse: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        s += d * d;
    }
    return s / double(a.numel());
}

inline double psnr(const Tensor& a, const Tensor& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

inline double psnr(const video::VideoClip& a, const video::VideoClip& b) {
    require(a.T() == b.T() && a.T() > 0, "psnr: clip length mismatch");
    double s = 0.0;
    int64_t n = 0;
    for (int t = 0; t < a.T(); ++t) {
        s += mse(a.frames[size_t(t)], b.frames[size_t(t)]) *
             double(a.frames[size_t(t)].numel());
        n += a.frames[size_t(t)].numel();
    }
    const double m = s / double(n);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

// Uniform 8x8 sliding-window SSIM, averaged over windows and channels.
inline double ssim(const Tensor& a, const Tensor& b, int window = 8, double K1 = 0.01,
                   double K2 = 0.03) {
    require(a.same_shape(b), "ssim: shape mismatch");
    require(a.ndim() == 3, "ssim: inputs must be [C,H,W]");
    const int C = a.dim(0), H = a.dim(1), W = a.dim(2);
    require(H >= window && W >= window, "ssim: image smaller than window");
    const double L = 1.0;
    const double C1 = (K1 * L) * (K1 * L), C2 = (K2 * L) * (K2 * L);
    const double N = double(window) * double(window);
    double total = 0.0;
    int64_t count = 0;
    for (int c = 0; c < C; ++c)
        for (int y = 0; y + window <= H; ++y)
            for (int x = 0; x + window <= W; ++x) {
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (int u = 0; u < window; ++u)
                    for (int v = 0; v < window; ++v) {
                        const double pa = a.at3(c, y + u, x + v);
                        const double pb = b.at3(c, y + u, x + v);
                        sx += pa;
                        sy += pb;
                        sxx += pa * pa;
                        syy += pb * pb;
                        sxy += pa * pb;
                    }
                const double mx = sx / N, my = sy / N;
                const double vx = sxx / N - mx * mx;
                const double vy = syy / N - my * my;
                const double cov = sxy / N - mx * my;
                total += ((2 * mx * my + C1) * (2 * cov + C2)) /
                         ((mx * mx + my * my + C1) * (vx + vy + C2));
                ++count;
            }
    return total / double(count);
}

inline double ssim(const video::VideoClip& a, const video::VideoClip& b, int window = 8) {
    require(a.T() == b.T() && a.T() > 0, "ssim: clip length mismatch");
    double s = 0.0;
    for (int t = 0; t < a.T(); ++t) s += ssim(a.frames[size_t(t)], b.frames[size_t(t)], window);
    return s / double(a.T());
}

// Returned in 255 scale.
inline std::pair<double, double> mae_rmse(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "mae_rmse: shape mismatch");
    double abs_sum = 0.0, sq_sum = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const double n = double(a.numel());
    return {255.0 * abs_sum / n, 255.0 * std::sqrt(sq_sum / n)};
}

inline std::pair<double, double> mae_rmse(const video::VideoClip& a, const video::VideoClip& b) {
    require(a.T() == b.T() && a.T() > 0, "mae_rmse: clip length mismatch");
    double abs_sum = 0.0, sq_sum = 0.0;
    int64_t n = 0;
    for (int t = 0; t < a.T(); ++t) {
        const auto& fa = a.frames[size_t(t)];
        const auto& fb = b.frames[size_t(t)];
        require(fa.same_shape(fb), "mae_rmse: shape mismatch");
        for (size_t i = 0; i < fa.data.size(); ++i) {
            const double d = double(fa.data[i]) - double(fb.data[i]);
            abs_sum += std::abs(d);
            sq_sum += d * d;
        }
        n += fa.numel();
    }
    return {255.0 * abs_sum / double(n), 255.0 * std::sqrt(sq_sum / double(n))};
}

template <class T>
double cos_sim(const std::vector<T>& u, const std::vector<T>& v) {
    require(u.size() == v.size() && !u.empty(), "cos_sim: size mismatch");
    double dot = 0, nu = 0, nv = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += double(u[i]) * double(v[i]);
        nu += double(u[i]) * double(u[i]);
        nv += double(v[i]) * double(v[i]);
    }
    require(nu > 0 && nv > 0, "cos_sim: zero vector");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

inline double cos_sim(const Tensor& u, const Tensor& v) {
    require(u.numel() == v.numel() && u.numel() > 0, "cos_sim: size mismatch");
    double dot = 0, nu = 0, nv = 0;
    for (size_t i = 0; i < u.data.size(); ++i) {
        dot += double(u.data[i]) * double(v.data[i]);
        nu += double(u.data[i]) * double(u.data[i]);
        nv += double(v.data[i]) * double(v.data[i]);
    }
    require(nu > 0 && nv > 0, "cos_sim: zero vector");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// Perceptual metrics are pluggable; none ships by default (they need
// pretrained feature nets).
struct PerceptualMetric {
    virtual ~PerceptualMetric() = default;
    virtual double operator()(const Tensor& a, const Tensor& b) const = 0;
};

struct PairMetrics {
    std::string id;
    double psnr_db = 0, ssim = 0, mae = 0, rmse = 0;
};

struct MetricsReport {
    std::vector<PairMetrics> rows;

    PairMetrics aggregate_mean() const {
        require(!rows.empty(), "metrics report: no rows");
        PairMetrics m;
        m.id = "mean";
        for (const auto& r : rows) {
            m.psnr_db += r.psnr_db;
            m.ssim += r.ssim;
            m.mae += r.mae;
            m.rmse += r.rmse;
        }
        const double n = double(rows.size());
        m.psnr_db /= n;
        m.ssim /= n;
        m.mae /= n;
        m.rmse /= n;
        return m;
    }

    PairMetrics aggregate_std() const {
        require(!rows.empty(), "metrics report: no rows");
        const PairMetrics mean = aggregate_mean();
        PairMetrics s;
        s.id = "std";
        for (const auto& r : rows) {
            s.psnr_db += (r.psnr_db - mean.psnr_db) * (r.psnr_db - mean.psnr_db);
            s.ssim += (r.ssim - mean.ssim) * (r.ssim - mean.ssim);
            s.mae += (r.mae - mean.mae) * (r.mae - mean.mae);
            s.rmse += (r.rmse - mean.rmse) * (r.rmse - mean.rmse);
        }
        const double n = double(rows.size());
        s.psnr_db = std::sqrt(s.psnr_db / n);
        s.ssim = std::sqrt(s.ssim / n);
        s.mae = std::sqrt(s.mae / n);
        s.rmse = std::sqrt(s.rmse / n);
        return s;
    }

    void write_csv(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw IoError("cannot write metrics CSV: " + path);
        os << "pair,psnr_db,ssim,mae,rmse\n";
        auto emit = [&os](const PairMetrics& r) {
            os << r.id << ",";
            if (std::isinf(r.psnr_db))
                os << "inf";
            else
                os << r.psnr_db;
            os << "," << r.ssim << "," << r.mae << "," << r.rmse << "\n";
        };
        for (const auto& r : rows) emit(r);
        if (!rows.empty()) {
            emit(aggregate_mean());
            emit(aggregate_std());
        }
    }
};

}  // namespace veil::eval
