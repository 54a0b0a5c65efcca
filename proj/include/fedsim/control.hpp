#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

// Knobs of the adaptive aggregation-period controller.
struct ControlConfig {
    double eta = 0.01;    // gradient step size
    double phi = 0.025;   // manually chosen control parameter
    double gamma = 10.0;  // search-range growth limit per round
    long long tau_max = 100;

    void validate() const {
        if (!(eta > 0.0)) throw config_error("control.eta: must be > 0");
        if (!(phi > 0.0)) throw config_error("control.phi: must be > 0");
        if (!(gamma > 0.0)) throw config_error("control.gamma: must be > 0");
        if (tau_max < 1) throw config_error("control.tau_max: must be >= 1");
    }
};

// Analytic gap between the distributed and centralized trajectories after x
// local steps: (delta/beta) ((eta beta + 1)^x - 1) - eta delta x.
// Defined as 0 when both beta and delta vanish (nodes with equal data).
// The gap is zero for x <= 1 and nonnegative for all larger x (Bernoulli),
// so the computed value is clamped against cancellation noise.
inline double divergence_gap(long long x, double eta, double beta, double delta) {
    if (delta == 0.0) return 0.0;
    if (beta == 0.0)
        throw config_error("divergence_gap: beta = 0 with delta > 0 is undefined");
    if (x <= 1) return 0.0;
    const double xd = static_cast<double>(x);
    const double growth = std::expm1(xd * std::log1p(eta * beta)); // (eta beta + 1)^x - 1
    return std::max(0.0, delta / beta * growth - eta * delta * xd);
}

// Optimality-gap upper bound after T iterations with aggregation period tau.
// Valid for eta <= 1/beta; the caller is responsible for that regime.
inline double convergence_bound(long long total_iterations, long long tau, double eta,
                                double phi, double rho, double beta, double delta) {
    if (!(eta > 0.0) || !(phi > 0.0))
        throw config_error("convergence_bound: eta and phi must be > 0");
    if (total_iterations < 1 || tau < 1)
        throw config_error("convergence_bound: T and tau must be >= 1");
    const double T = static_cast<double>(total_iterations);
    const double gap = rho * divergence_gap(tau, eta, beta, delta);
    const double lead = 1.0 / (2.0 * eta * phi * T);
    return lead + std::sqrt(lead * lead + gap / (eta * phi * static_cast<double>(tau))) + gap;
}

// Everything the control objective needs. res holds per-resource-type
// (c_m, b_m, R'_m) with R'_m = R_m - b_m - c_m.
struct ControlInputs {
    double eta = 0.0;
    double phi = 0.0;
    double rho = 0.0;
    double beta = 0.0;
    double delta = 0.0;
    struct Res {
        double c = 0.0;
        double b = 0.0;
        double r_prime = 0.0;
    };
    std::vector<Res> res;
};

// G(tau): the resource-normalized convergence-bound surrogate minimized by
// the controller.
inline double control_objective(long long tau, const ControlInputs& in) {
    if (tau < 1) throw config_error("control_objective: tau must be >= 1");
    if (in.res.empty()) throw config_error("control_objective: no resource types");
    double x = -std::numeric_limits<double>::infinity();
    for (const auto& r : in.res) {
        if (!(r.r_prime > 0.0))
            throw budget_error("control_objective: budget too small (R' <= 0)");
        x = std::max(x, (r.c * static_cast<double>(tau) + r.b) /
                            (r.r_prime * static_cast<double>(tau)));
    }
    const double gap = in.rho * divergence_gap(tau, in.eta, in.beta, in.delta);
    const double lead = x / (2.0 * in.eta * in.phi);
    return lead +
           std::sqrt(lead * lead + gap / (in.eta * in.phi * static_cast<double>(tau))) + gap;
}

// Linear search for argmin G over integers [1, min(gamma * current, tau_max)].
// Ties break toward the smaller tau, which carries the stronger guarantee.
inline long long search_optimal_tau(long long current_tau, const ControlInputs& in,
                                    double gamma, long long tau_max) {
    if (current_tau < 1) throw config_error("search_optimal_tau: current tau must be >= 1");
    long long hi = static_cast<long long>(std::floor(gamma * static_cast<double>(current_tau)));
    hi = std::max<long long>(1, std::min(hi, tau_max));
    long long best = 1;
    double best_val = control_objective(1, in);
    for (long long t = 2; t <= hi; ++t) {
        const double v = control_objective(t, in);
        if (v < best_val) {
            best_val = v;
            best = t;
        }
    }
    return best;
}

// Finite threshold above which G provably increases, so tau* never exceeds
// it. Requires eta <= 1/beta and strictly positive rho, beta, delta.
inline double tau_upper_bound(const ControlInputs& in) {
    if (!(in.rho > 0.0) || !(in.beta > 0.0) || !(in.delta > 0.0))
        throw config_error("tau_upper_bound: rho, beta, delta must be > 0");
    if (!(in.eta > 0.0) || in.eta > 1.0 / in.beta)
        throw config_error("tau_upper_bound: requires 0 < eta <= 1/beta");
    if (in.res.empty()) throw config_error("tau_upper_bound: no resource types");
    for (const auto& r : in.res)
        if (!(r.r_prime > 0.0)) throw budget_error("tau_upper_bound: R' <= 0");

    // nu = argmax_{m in V} b_m/R'_m over V = argmax_m c_m/R'_m.
    std::size_t nu = 0;
    double best_c = -std::numeric_limits<double>::infinity();
    double best_b = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < in.res.size(); ++m) {
        const double cr = in.res[m].c / in.res[m].r_prime;
        const double br = in.res[m].b / in.res[m].r_prime;
        if (cr > best_c || (cr == best_c && br > best_b)) {
            best_c = cr;
            best_b = br;
            nu = m;
        }
    }
    const double c_nu = in.res[nu].c, b_nu = in.res[nu].b, rp_nu = in.res[nu].r_prime;
    const double eb = in.eta * in.beta;
    const double big_b = eb + 1.0;
    const double c1 = 2.0 * in.eta * in.phi * rp_nu;
    const double c2 = 4.0 * in.eta * in.eta * in.phi * in.phi * rp_nu * rp_nu;

    // max_m (b_m R'_nu - b_nu R'_m) / (c_nu R'_m - c_m R'_nu), with 0/0 = 0;
    // a negative numerator over a zero denominator contributes nothing.
    double term1 = -std::numeric_limits<double>::infinity();
    for (const auto& r : in.res) {
        const double num = r.b * rp_nu - b_nu * r.r_prime;
        const double den = c_nu * r.r_prime - r.c * rp_nu;
        if (den == 0.0) {
            if (num == 0.0) term1 = std::max(term1, 0.0);
        } else {
            term1 = std::max(term1, num / den);
        }
    }
    const double term2 = in.phi * (2.0 + eb) / (2.0 * in.rho * in.delta) *
                         (2.0 * c_nu * b_nu / c2 + 2.0 * b_nu * b_nu / c2);
    const double term3 =
        (b_nu / c1 + in.rho * in.eta * in.delta) /
            (in.rho * in.delta * in.eta * std::log(big_b)) -
        1.0 / eb;
    const double term4 = 1.0 / eb + 0.5;
    return std::max(std::max(term1, term2), std::max(term3, term4));
}

// ---------------------------------------------------------------------------
// Online parameter estimation

struct NodeParamEstimate {
    double rho_i = 0.0;
    double beta_i = 0.0;
};

// Per-node estimates from the local and global views of the same iteration.
// Both ratios are defined as zero when the parameters coincide.
inline NodeParamEstimate estimate_node_params(const ParamVector& w_local,
                                              const ParamVector& w_global,
                                              double loss_local, double loss_global,
                                              const ParamVector& grad_local,
                                              const ParamVector& grad_global) {
    if (w_local.size() != w_global.size() || grad_local.size() != grad_global.size())
        throw config_error("estimate_node_params: dimension mismatch");
    const double dw = vec::distance(w_local, w_global);
    if (dw == 0.0) return {0.0, 0.0};
    return {std::abs(loss_local - loss_global) / dw,
            vec::distance(grad_local, grad_global) / dw};
}

struct EstimatedParams {
    double rho = 0.0;
    double beta = 0.0;
    double delta = 0.0;
    bool valid = false; // false until the second global aggregation
};

// Size-weighted global estimates; delta_i is each node's gradient distance to
// the weighted global gradient.
inline EstimatedParams estimate_global_params(std::span<const NodeParamEstimate> node_est,
                                              const std::vector<ParamVector>& node_grads,
                                              std::span<const double> sizes) {
    if (node_est.size() != node_grads.size() || node_est.size() != sizes.size() ||
        node_est.empty())
        throw config_error("estimate_global_params: inconsistent inputs");
    double total = 0.0;
    for (double s : sizes) total += s;
    const ParamVector grad_global =
        vec::weighted_average(node_grads, {sizes.begin(), sizes.end()});
    EstimatedParams out;
    for (std::size_t i = 0; i < node_est.size(); ++i) {
        out.rho += sizes[i] * node_est[i].rho_i;
        out.beta += sizes[i] * node_est[i].beta_i;
        out.delta += sizes[i] * vec::distance(node_grads[i], grad_global);
    }
    out.rho /= total;
    out.beta /= total;
    out.delta /= total;
    out.valid = true;
    return out;
}

} // namespace fedsim
