#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// How per-node costs combine into the system-wide per-step cost: time is
// gated by the slowest node, energy adds up.
enum class CostSemantics { time_max, energy_sum };

// One budgeted resource type m: per-local-update cost c_m, per-aggregation
// cost b_m, total budget R_m. Costs are either measured by the caller or
// synthesized from a truncated Gaussian.
struct ResourceType {
    std::string name = "time";
    CostSemantics semantics = CostSemantics::time_max;
    double mu_local = 0.0;
    double sigma_local = 0.0;
    double mu_global = 0.0;
    double sigma_global = 0.0;
    double budget = 15.0;

    void validate() const {
        if (!(budget > 0.0)) throw config_error("resources: budget must be > 0");
        if (sigma_local < 0.0 || sigma_global < 0.0)
            throw config_error("resources: sigma must be >= 0");
        if (!std::isfinite(mu_local) || !std::isfinite(mu_global))
            throw config_error("resources: cost means must be finite");
    }
};

// Gaussian consumption presets measured on the reference prototype.
namespace presets {

inline ResourceType dgd_distributed(int data_case) {
    ResourceType r;
    switch (data_case) {
        case 1: r.mu_local = 0.020613052; r.sigma_local = 0.008154439;
                r.mu_global = 0.137093837; r.sigma_global = 0.05548447; break;
        case 2: r.mu_local = 0.021810727; r.sigma_local = 0.008042984;
                r.mu_global = 0.12322071;  r.sigma_global = 0.048079171; break;
        case 3: r.mu_local = 0.095353094; r.sigma_local = 0.016688657;
                r.mu_global = 0.157255906; r.sigma_global = 0.066722225; break;
        case 4: r.mu_local = 0.022075891; r.sigma_local = 0.008528005;
                r.mu_global = 0.108598094; r.sigma_global = 0.044627335; break;
        default: throw config_error("dgd preset: case must be 1..4");
    }
    return r;
}

inline ResourceType sgd_distributed() {
    ResourceType r;
    r.mu_local = 0.013015156;
    r.sigma_local = 0.006946299;
    r.mu_global = 0.131604348;
    r.sigma_global = 0.053873234;
    return r;
}

inline ResourceType sgd_centralized() {
    ResourceType r;
    r.mu_local = 0.009974248;
    r.sigma_local = 0.011922926;
    r.mu_global = 0.0;
    r.sigma_global = 0.0;
    return r;
}

} // namespace presets

// Seeded source of simulated per-step consumptions. One draw per step per
// resource type; negative Gaussian samples are truncated at zero.
class ResourceModel {
public:
    explicit ResourceModel(std::uint64_t seed) : rng_(derive_seed(seed, 0x0C057)) {}

    double draw_local(const ResourceType& r) {
        return std::max(0.0, rng_.normal(r.mu_local, r.sigma_local));
    }
    double draw_global(const ResourceType& r) {
        return std::max(0.0, rng_.normal(r.mu_global, r.sigma_global));
    }

private:
    Rng rng_;
};

// Combine per-node cost reports into the system-wide per-step cost.
inline double aggregate_node_costs(std::span<const double> per_node, CostSemantics semantics) {
    if (per_node.empty()) throw config_error("aggregate_node_costs: no node reports");
    if (semantics == CostSemantics::energy_sum) {
        double s = 0.0;
        for (double v : per_node) s += v;
        return s;
    }
    return *std::max_element(per_node.begin(), per_node.end());
}

// Exponentially weighted moving average of observed per-step costs.
struct CostEstimator {
    double value = 0.0;
    bool ready = false;
    void observe(double x) {
        value = ready ? 0.5 * value + 0.5 * x : x;
        ready = true;
    }
};

struct BudgetDecision {
    bool stop = false;
    long long tau = 1;        // tau for the final training round when stopping
    bool final_round = true;  // false: not even tau = 1 fits, close immediately
};

// Aggregator-side budget check after a round: with counters s_m and the next
// round planned at `tau` local updates, the remaining work is one round of
// tau updates plus the closing loss evaluation (one more local update and two
// more aggregations). If any resource cannot cover that, shrink tau for one
// last round and stop. When even a single-update round does not fit, the
// caller must skip straight to the closing exchange, which the previous
// check's reserve always leaves room for.
inline BudgetDecision check_budget(std::span<const double> counters,
                                   std::span<const double> c_hat,
                                   std::span<const double> b_hat, long long tau,
                                   std::span<const double> budget) {
    const std::size_t m_count = counters.size();
    auto fits = [&](long long t) {
        for (std::size_t m = 0; m < m_count; ++m)
            if (counters[m] + c_hat[m] * static_cast<double>(t + 1) + 2.0 * b_hat[m] >
                budget[m])
                return false;
        return true;
    };
    bool trigger = false;
    for (std::size_t m = 0; m < m_count; ++m)
        if (counters[m] + c_hat[m] * static_cast<double>(tau + 1) + 2.0 * b_hat[m] >=
            budget[m])
            trigger = true;
    if (!trigger) return {false, tau, true};

    // Largest tau' >= 1 whose remaining consumption stays within every budget.
    for (long long t = tau; t >= 1; --t)
        if (fits(t)) return {true, t, true};
    return {true, 1, false};
}

} // namespace fedsim
