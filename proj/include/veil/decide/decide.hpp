// Causal decision machinery for the handover between audio-driven generation
// and latent re-prediction. Per-step margins over frame-candidate
// probabilities drive early-exit labels; three losses (exit BCE, frame
// classification cross-entropy, margin growth) accumulate over inference
// steps, and the first confident step routes later frames to the predictor.
#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "veil/common.hpp"
#include "veil/eval/metrics.hpp"
#include "veil/nn/layers.hpp"
#include "veil/tensor.hpp"

namespace veil::decide {

using namespace veil::nn;

inline constexpr double kProbEps = 1e-7;  // clamp for logs of degenerate probs

// ====== per-step scalar operations ======

// Margin between the best candidate and the runner-up.
inline double margin(const std::vector<double>& probs) {
    if (probs.size() < 2) throw ValidationError("margin: need at least two candidates");
    double sum = 0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0)
            throw ValidationError("margin: probabilities must lie in [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw ValidationError("margin: probabilities must sum to 1");
    double best = -1.0, second = -1.0;
    for (double p : probs) {
        if (p > best) {
            second = best;
            best = p;
        } else if (p > second) {
            second = p;
        }
    }
    return best - second;
}

// Margin-growth loss: negative when the margin grew this step.
inline double ce_margin_loss(double delta_prev, double delta_now) {
    return delta_prev - delta_now;
}

// 1 when the current margin is within mu of the final-step margin.
inline int exit_label(double delta_t, double delta_T, double mu_threshold) {
    require(mu_threshold > 0.0, "exit label: threshold must be positive");
    return std::abs(delta_T - delta_t) <= mu_threshold ? 1 : 0;
}

// Binary cross-entropy of the exit head; degenerate probabilities clamp to
// (eps, 1-eps) instead of producing infinities.
inline double fb_loss(int y_fb, double e_k) {
    require(y_fb == 0 || y_fb == 1, "exit loss: label must be 0 or 1");
    require(std::isfinite(e_k) && e_k >= 0.0 && e_k <= 1.0,
            "exit loss: exit probability must lie in [0,1]");
    const double e = std::min(std::max(e_k, kProbEps), 1.0 - kProbEps);
    return -(y_fb * std::log(e) + (1 - y_fb) * std::log(1.0 - e));
}

// Cross-entropy of the frame-consistency classifier against a label vector.
inline double prediction_loss(const std::vector<double>& y, const std::vector<double>& probs) {
    require(!y.empty() && y.size() == probs.size(),
            "prediction loss: label and probability sizes must match");
    double sy = 0, sp = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        require(std::isfinite(y[i]) && y[i] >= 0.0 && std::isfinite(probs[i]) && probs[i] >= 0.0,
                "prediction loss: inputs must be nonnegative and finite");
        sy += y[i];
        sp += probs[i];
    }
    require(std::abs(sy - 1.0) < 1e-6 && std::abs(sp - 1.0) < 1e-6,
            "prediction loss: inputs must be distributions");
    double loss = 0;
    for (size_t i = 0; i < y.size(); ++i)
        loss -= y[i] * std::log(std::max(probs[i], kProbEps));
    return loss;
}

// One step of the total decision objective.
inline double step_total(double fb, double pred, double ce, double lambda_ce) {
    return fb + pred + lambda_ce * ce;
}

// ====== decision traces ======

// Record of a full inference rollout. Labels, handover, and totals are
// derived deterministically from the margins, exit probabilities, and
// per-step prediction losses.
struct DecisionTrace {
    std::vector<double> deltas;       // delta_1..delta_k
    std::vector<double> exit_probs;   // e_k in (0,1)
    std::vector<double> pred_losses;  // per-step prediction cross-entropy
    std::vector<int> labels;          // y_fb per step
    std::vector<double> totals;       // per-step total loss
    int handover = 0;                 // x_i, 1-based frame index
    double mu_threshold = 0.05;
};

// Labels against the final-step margin: 1 where |delta_T - delta_t| <= mu.
inline std::vector<int> derive_labels(const std::vector<double>& deltas, double mu_threshold) {
    require(!deltas.empty(), "labels: empty margin sequence");
    std::vector<int> labels;
    for (double d : deltas) labels.push_back(exit_label(d, deltas.back(), mu_threshold));
    return labels;
}

// First step labeled 1, else the last step (never exit early without a
// confident label). 1-based.
inline int handover_from_labels(const std::vector<int>& labels) {
    require(!labels.empty(), "handover: empty label sequence");
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == 1) return int(i) + 1;
    return int(labels.size());
}

// Inference-time variant: the exit head replaces the unavailable labels.
inline int handover_from_exit_probs(const std::vector<double>& exit_probs) {
    require(!exit_probs.empty(), "handover: empty exit sequence");
    for (size_t i = 0; i < exit_probs.size(); ++i)
        if (exit_probs[i] > 0.5) return int(i) + 1;
    return int(exit_probs.size());
}

namespace detail {

inline void check_complete(const DecisionTrace& t) {
    const size_t n = t.deltas.size();
    if (n == 0 || t.exit_probs.size() != n || t.pred_losses.size() != n ||
        t.labels.size() != n || t.totals.size() != n)
        throw ValidationError("decision trace: incomplete trace");
    require(t.handover >= 1 && t.handover <= int(n), "decision trace: handover out of bounds");
    require(t.mu_threshold > 0.0, "decision trace: threshold must be positive");
}

}  // namespace detail

// Accumulated objective over all steps: sum of fb + prediction + lambda * ce,
// where the margin-growth term at step 1 has no predecessor and contributes 0.
inline double total_decision_loss(const DecisionTrace& trace, double lambda_ce = 3.0) {
    detail::check_complete(trace);
    double total = 0;
    for (size_t k = 0; k < trace.deltas.size(); ++k) {
        const double ce = k == 0 ? 0.0 : ce_margin_loss(trace.deltas[k - 1], trace.deltas[k]);
        total += step_total(fb_loss(trace.labels[k], trace.exit_probs[k]), trace.pred_losses[k],
                            ce, lambda_ce);
    }
    return total;
}

// Builds the full trace from a rollout's raw measurements: derives labels,
// per-step totals, and the handover index.
inline DecisionTrace make_decision_trace(std::vector<double> deltas,
                                         std::vector<double> exit_probs,
                                         std::vector<double> pred_losses,
                                         double mu_threshold = 0.05, double lambda_ce = 3.0) {
    const size_t n = deltas.size();
    if (n == 0 || exit_probs.size() != n || pred_losses.size() != n)
        throw ValidationError("decision trace: incomplete trace");
    DecisionTrace t;
    t.deltas = std::move(deltas);
    t.exit_probs = std::move(exit_probs);
    t.pred_losses = std::move(pred_losses);
    t.mu_threshold = mu_threshold;
    t.labels = derive_labels(t.deltas, mu_threshold);
    t.handover = handover_from_labels(t.labels);
    for (size_t k = 0; k < n; ++k) {
        const double ce = k == 0 ? 0.0 : ce_margin_loss(t.deltas[k - 1], t.deltas[k]);
        t.totals.push_back(step_total(fb_loss(t.labels[k], t.exit_probs[k]), t.pred_losses[k],
                                      ce, lambda_ce));
    }
    return t;
}

// ====== handover routing ======

enum class Route { generation, re_prediction };

// Frames up to and including the handover index stay audio-driven; later
// frames come from the predictor.
inline Route handover(int frame_index, int x_i) {
    require(frame_index >= 1, "handover: frame index must be 1-based");
    require(x_i >= 1, "handover: handover index must be 1-based");
    return frame_index <= x_i ? Route::generation : Route::re_prediction;
}

// ====== frame-consistency classifier ======

// Linear-softmax head over a per-frame latent row.
template <class T>
struct FrameClassifierT {
    LinearT<T> head;
    int classes = 4;
};

template <class T>
FrameClassifierT<T> make_frame_classifier(ParamsT<T>& p, const std::string& prefix, int d,
                                          int classes = 4) {
    require(d >= 1 && classes >= 2, "classifier: need a positive dim and at least 2 classes");
    FrameClassifierT<T> c;
    c.head = LinearT<T>(p, prefix, d, classes);
    c.classes = classes;
    return c;
}

// Class probabilities per latent row; rows sum to 1 by construction.
template <class T>
NodePtrT<T> classify_nodes(const FrameClassifierT<T>& c, const NodePtrT<T>& latent_rows) {
    require(latent_rows->val.ndim() == 2, "classifier: input must be [N,d]");
    return softmax_rows(c.head(latent_rows));
}

// Agreement class of a re-predicted frame against the generated frame:
// per-frame MSE quantized into K=4 bins, 0 meaning closest agreement.
inline int consistency_class(const Tensor& generated, const Tensor& predicted,
                             const std::array<double, 3>& bin_edges = {1e-4, 1e-3, 1e-2}) {
    const double m = eval::mse(generated, predicted);
    for (size_t i = 0; i < bin_edges.size(); ++i)
        if (m <= bin_edges[i]) return int(i);
    return int(bin_edges.size());
}

// ====== trace export ======

// Line-delimited JSON, one record per inference step.
inline std::string trace_to_jsonl(const DecisionTrace& trace) {
    detail::check_complete(trace);
    std::string out;
    char buf[320];
    for (size_t k = 0; k < trace.deltas.size(); ++k) {
        const double ce =
            k == 0 ? 0.0 : ce_margin_loss(trace.deltas[k - 1], trace.deltas[k]);
        std::snprintf(buf, sizeof buf,
                      "{\"step\":%d,\"delta\":%.17g,\"exit_prob\":%.17g,\"label\":%d,"
                      "\"loss_fb\":%.17g,\"loss_pred\":%.17g,\"loss_ce\":%.17g,"
                      "\"loss_total\":%.17g,\"handover\":%d}\n",
                      int(k) + 1, trace.deltas[k], trace.exit_probs[k], trace.labels[k],
                      fb_loss(trace.labels[k], trace.exit_probs[k]), trace.pred_losses[k], ce,
                      trace.totals[k], trace.handover);
        out += buf;
    }
    return out;
}

inline void save_trace(const DecisionTrace& trace, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("trace: cannot open for write: " + path);
    os << trace_to_jsonl(trace);
    if (!os) throw IoError("trace: write failed: " + path);
}

}  // namespace veil::decide
