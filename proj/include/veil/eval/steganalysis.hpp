// LSB steganalysis: sample-pair, RS, chi-square, and primary-sets estimators
// with mean fusion, plus ROC curve construction and rendering.
#pragma once

#include <string>
#include <vector>

#include "veil/video/clip.hpp"

namespace veil::eval {

struct DetectorFeatures {
    double sample_pair = 0;  // embedding-rate estimate in [0,1]
    double rs = 0;           // embedding-rate estimate in [0,1]
    double chi_square = 0;   // probability-of-embedding in [0,1]
    double primary_sets = 0; // embedding-rate estimate in [0,1]
    double fusion = 0;       // mean of the four
    bool degenerate = false; // constant frame: estimates forced to 0
};

// 8-bit quantized frame in, four detector statistics out.
DetectorFeatures steg_detectors(const Tensor& frame);

inline double fusion_score(const DetectorFeatures& f) { return f.fusion; }

inline constexpr double kFusionThreshold = 0.2;

struct RocCurve {
    std::vector<double> thresholds;
    std::vector<double> fpr;
    std::vector<double> tpr;
    double auc = 0;
};

// scores_pos: detector scores for true positives (stego); scores_neg: covers.
RocCurve roc(const std::vector<double>& scores_pos, const std::vector<double>& scores_neg);

void write_roc_csv(const RocCurve& curve, const std::string& path);

// Renders the curve with axes and the chance diagonal into an RGB frame.
Tensor render_roc_plot(const RocCurve& curve, int size = 256);

// Regularized upper incomplete gamma Q(a,x); exposed for the chi-square test.
double gammq(double a, double x);

}  // namespace veil::eval
