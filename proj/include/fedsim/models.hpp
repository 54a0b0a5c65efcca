#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

struct Sample {
    std::vector<double> x;
    double y = 0.0; // +-1 for SVM, real target for regression, ignored by K-means
};

enum class ModelKind { squared_svm, linear_regression, k_means };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::squared_svm: return "svm";
        case ModelKind::linear_regression: return "linreg";
        case ModelKind::k_means: return "kmeans";
    }
    return "?";
}

// Loss family plus its hyperparameters. The parameter vector has dimension
// `features` for SVM/regression and `clusters * features` for K-means, where
// w is read as the concatenation of the cluster centers.
struct LossModel {
    ModelKind kind = ModelKind::squared_svm;
    double lambda = 0.1; // SVM regularizer, must be > 0
    int clusters = 1;    // K-means center count, must be >= 1
    int features = 0;

    int param_dim() const {
        return kind == ModelKind::k_means ? clusters * features : features;
    }

    void validate() const {
        if (features < 1) throw config_error("model: feature dimension must be >= 1");
        if (kind == ModelKind::squared_svm && !(lambda > 0.0))
            throw config_error("model.lambda: must be > 0 for svm");
        if (kind == ModelKind::k_means && clusters < 1)
            throw config_error("model.clusters: must be >= 1 for kmeans");
    }
};

namespace detail {

inline void check_dims(const LossModel& m, const ParamVector& w, const Sample& s) {
    if (static_cast<int>(s.x.size()) != m.features ||
        static_cast<int>(w.size()) != m.param_dim())
        throw config_error("loss evaluation: dimension mismatch (w=" +
                           std::to_string(w.size()) + ", x=" + std::to_string(s.x.size()) +
                           ", model expects d=" + std::to_string(m.features) + ")");
}

// Index of the center nearest to s.x; ties go to the lowest index.
inline int nearest_center(const LossModel& m, const ParamVector& w, const Sample& s,
                          double* sq_dist_out = nullptr) {
    const int d = m.features;
    int best = 0;
    double best_sq = 0.0;
    for (int c = 0; c < m.clusters; ++c) {
        double sq = 0.0;
        for (int j = 0; j < d; ++j) {
            const double diff = s.x[j] - w[c * d + j];
            sq += diff * diff;
        }
        if (c == 0 || sq < best_sq) {
            best = c;
            best_sq = sq;
        }
    }
    if (sq_dist_out) *sq_dist_out = best_sq;
    return best;
}

} // namespace detail

inline double sample_loss(const LossModel& m, const ParamVector& w, const Sample& s) {
    detail::check_dims(m, w, s);
    switch (m.kind) {
        case ModelKind::squared_svm: {
            const double margin = std::max(0.0, 1.0 - s.y * vec::dot(w, s.x));
            return 0.5 * m.lambda * vec::dot(w, w) + 0.5 * margin * margin;
        }
        case ModelKind::linear_regression: {
            const double r = s.y - vec::dot(w, s.x);
            return 0.5 * r * r;
        }
        case ModelKind::k_means: {
            double sq = 0.0;
            detail::nearest_center(m, w, s, &sq);
            return 0.5 * sq;
        }
    }
    return 0.0;
}

// acc += grad f_j(w). The squared hinge is C^1, so the SVM subgradient at the
// kink is simply the regularizer term. K-means touches only the block of the
// nearest center.
inline void accumulate_sample_gradient(const LossModel& m, const ParamVector& w,
                                       const Sample& s, ParamVector& acc) {
    detail::check_dims(m, w, s);
    switch (m.kind) {
        case ModelKind::squared_svm: {
            const double margin = std::max(0.0, 1.0 - s.y * vec::dot(w, s.x));
            vec::axpy(m.lambda, w, acc);
            if (margin > 0.0) vec::axpy(-s.y * margin, s.x, acc);
            break;
        }
        case ModelKind::linear_regression: {
            const double r = s.y - vec::dot(w, s.x);
            vec::axpy(-r, s.x, acc);
            break;
        }
        case ModelKind::k_means: {
            const int c = detail::nearest_center(m, w, s);
            const int d = m.features;
            for (int j = 0; j < d; ++j) acc[c * d + j] += w[c * d + j] - s.x[j];
            break;
        }
    }
}

inline ParamVector sample_gradient(const LossModel& m, const ParamVector& w, const Sample& s) {
    ParamVector g(w.size(), 0.0);
    accumulate_sample_gradient(m, w, s, g);
    return g;
}

// Mean loss over a whole sample collection: F_i(w).
inline double mean_loss(const LossModel& m, const ParamVector& w,
                        std::span<const Sample> samples) {
    if (samples.empty()) throw config_error("mean_loss: empty sample set");
    double s = 0.0;
    for (const Sample& smp : samples) s += sample_loss(m, w, smp);
    return s / static_cast<double>(samples.size());
}

inline ParamVector mean_gradient(const LossModel& m, const ParamVector& w,
                                 std::span<const Sample> samples) {
    if (samples.empty()) throw config_error("mean_gradient: empty sample set");
    ParamVector g(w.size(), 0.0);
    for (const Sample& smp : samples) accumulate_sample_gradient(m, w, smp, g);
    for (double& x : g) x /= static_cast<double>(samples.size());
    return g;
}

// Mini-batch variants: mean over the selected indices only.
inline double subset_loss(const LossModel& m, const ParamVector& w,
                          std::span<const Sample> samples, std::span<const std::size_t> idx) {
    if (idx.empty()) throw config_error("subset_loss: empty batch");
    double s = 0.0;
    for (std::size_t i : idx) s += sample_loss(m, w, samples[i]);
    return s / static_cast<double>(idx.size());
}

inline ParamVector subset_gradient(const LossModel& m, const ParamVector& w,
                                   std::span<const Sample> samples,
                                   std::span<const std::size_t> idx) {
    if (idx.empty()) throw config_error("subset_gradient: empty batch");
    ParamVector g(w.size(), 0.0);
    for (std::size_t i : idx) accumulate_sample_gradient(m, w, samples[i], g);
    for (double& x : g) x /= static_cast<double>(idx.size());
    return g;
}

} // namespace fedsim
