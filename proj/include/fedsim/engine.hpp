#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/models.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

enum class TrainMode { dgd, sgd };

inline const char* to_string(TrainMode m) { return m == TrainMode::dgd ? "dgd" : "sgd"; }

// Mini-batch sequence for one node. Batches are uniform draws without
// replacement from the local data; the iteration right after a global
// aggregation reuses the batch of the iteration right before it, so that the
// boundary estimates compare losses/gradients on identical data. With tau = 1
// that rule alone would freeze the batch forever, hence the two-uses cap.
class BatchScheduler {
public:
    BatchScheduler() = default;
    BatchScheduler(std::uint64_t seed, std::size_t data_size, std::size_t batch_size)
        : rng_(seed), data_size_(data_size), batch_size_(batch_size) {
        if (batch_size_ == 0) throw config_error("batch_size must be >= 1");
        if (batch_size_ > data_size_) {
            batch_size_ = data_size_;
            clamped_ = true;
        }
    }

    void note_aggregation() { boundary_ = true; }

    // Batch for the next local iteration.
    const std::vector<std::size_t>& next() {
        if (boundary_ && uses_ == 1) {
            uses_ = 2;
        } else {
            current_ = rng_.sample_without_replacement(data_size_, batch_size_);
            uses_ = 1;
            ++batch_id_;
        }
        boundary_ = false;
        return current_;
    }

    // Batch backing the most recent local update; boundary estimates are
    // evaluated on it.
    const std::vector<std::size_t>& current() const { return current_; }
    long long current_id() const { return batch_id_; }
    bool clamped() const { return clamped_; }

private:
    Rng rng_{0};
    std::size_t data_size_ = 0;
    std::size_t batch_size_ = 0;
    std::vector<std::size_t> current_;
    int uses_ = 0;
    long long batch_id_ = -1;
    bool boundary_ = false;
    bool clamped_ = false;
};

// One gradient-descent step w -= eta * grad on the given sample view.
inline void apply_local_update(ParamVector& w, const LossModel& model,
                               std::span<const Sample> data,
                               std::span<const std::size_t> batch, double eta,
                               long long iteration) {
    if (!(eta > 0.0)) throw config_error("local update: step size must be > 0");
    const ParamVector g =
        batch.empty() ? mean_gradient(model, w, data) : subset_gradient(model, w, data, batch);
    vec::axpy(-eta, g, w);
    if (!vec::all_finite(w))
        throw numerical_error("local update produced a non-finite parameter", iteration);
}

// ---------------------------------------------------------------------------
// Logical distributed gradient descent: T local iterations, aggregation every
// tau of them, no resource accounting. Losses at aggregation points are exact
// (full-data) values; the best of them defines w_f. A trailing partial block
// still closes with an aggregation.

struct LogicalRunConfig {
    long long tau = 1;
    long long total_iterations = 1;
    double eta = 0.01;
    TrainMode mode = TrainMode::dgd;
    std::size_t batch_size = 32;
    std::uint64_t batch_seed = 0; // same stream seed at every node
    ParamVector w0;
    bool record_trajectory = false;
};

struct LogicalRunResult {
    ParamVector w_final;
    ParamVector w_f;
    double loss_wf = 0.0;
    long long iterations = 0;
    long long aggregations = 0; // performed during training (t >= 1)
    std::vector<ParamVector> trajectory; // w(t) for t = 0..T when recorded
};

inline LogicalRunResult run_fixed_tau(const LogicalRunConfig& cfg,
                                      std::span<const NodePartition> parts,
                                      const LossModel& model) {
    if (cfg.tau < 1) throw config_error("run_fixed_tau: tau must be >= 1");
    if (cfg.total_iterations < 0) throw config_error("run_fixed_tau: T must be >= 0");
    if (parts.empty()) throw config_error("run_fixed_tau: no partitions");

    const std::size_t n = parts.size();
    std::vector<double> sizes(n);
    for (std::size_t i = 0; i < n; ++i) sizes[i] = static_cast<double>(parts[i].size());

    std::vector<ParamVector> w_node(n, cfg.w0), w_tilde(n, cfg.w0);
    std::vector<BatchScheduler> batches(n);
    if (cfg.mode == TrainMode::sgd)
        for (std::size_t i = 0; i < n; ++i)
            batches[i] = BatchScheduler(cfg.batch_seed, parts[i].size(), cfg.batch_size);

    LogicalRunResult out;
    out.w_f = cfg.w0;
    out.loss_wf = global_loss(model, cfg.w0, parts);
    if (cfg.record_trajectory) out.trajectory.push_back(cfg.w0);

    ParamVector w_global = cfg.w0;
    for (long long t = 1; t <= cfg.total_iterations; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            w_node[i] = w_tilde[i];
            std::span<const std::size_t> batch;
            if (cfg.mode == TrainMode::sgd) batch = batches[i].next();
            apply_local_update(w_node[i], model, parts[i].samples, batch, cfg.eta, t);
        }
        const bool aggregate = (t % cfg.tau == 0) || t == cfg.total_iterations;
        if (aggregate || cfg.record_trajectory) w_global = vec::weighted_average(w_node, sizes);
        if (aggregate) {
            for (std::size_t i = 0; i < n; ++i) w_tilde[i] = w_global;
            if (cfg.mode == TrainMode::sgd)
                for (auto& b : batches) b.note_aggregation();
            const double loss = global_loss(model, w_global, parts);
            if (loss < out.loss_wf) {
                out.loss_wf = loss;
                out.w_f = w_global;
            }
            ++out.aggregations;
        } else {
            for (std::size_t i = 0; i < n; ++i) w_tilde[i] = w_node[i];
        }
        if (cfg.record_trajectory) out.trajectory.push_back(w_global);
    }
    out.w_final = cfg.total_iterations == 0 ? cfg.w0 : w_global;
    out.iterations = cfg.total_iterations;
    return out;
}

} // namespace fedsim
