#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fedsim/errors.hpp"

namespace fedsim {

// Dense model parameter vector (w, w_i(t), gradients, ...).
using ParamVector = std::vector<double>;

namespace vec {

inline double dot(const ParamVector& a, const ParamVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const ParamVector& a) { return std::sqrt(dot(a, a)); }

inline double distance(const ParamVector& a, const ParamVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// y += alpha * x
inline void axpy(double alpha, const ParamVector& x, ParamVector& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(const ParamVector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// Weighted average sum_i weight_i * v_i / sum_i weight_i.
//
// When every input is bit-identical the inputs are returned unchanged instead
// of being recomputed. Aggregating N equal vectors must reproduce them exactly
// (not merely to rounding), since downstream parameter estimation treats
// "local equals global" as a hard degenerate case.
inline ParamVector weighted_average(const std::vector<ParamVector>& values,
                                    const std::vector<double>& weights) {
    if (values.empty() || values.size() != weights.size())
        throw config_error("weighted_average: need matching non-empty values/weights");
    const std::size_t dim = values.front().size();
    bool identical = true;
    for (const auto& v : values) {
        if (v.size() != dim) throw config_error("weighted_average: dimension mismatch");
        if (identical && v != values.front()) identical = false;
    }
    if (identical) return values.front();

    ParamVector out(dim, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        axpy(weights[i], values[i], out);
        total += weights[i];
    }
    for (double& x : out) x /= total;
    return out;
}

} // namespace vec
} // namespace fedsim
