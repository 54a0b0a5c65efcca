#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/resources.hpp"
#include "fedsim/trace.hpp"

namespace fedsim {

// ---------------------------------------------------------------------------
// Centralized gradient descent on the pooled dataset.

struct CentralizedConfig {
    double eta = 0.01;
    TrainMode mode = TrainMode::sgd;
    std::size_t batch_size = 32;
    std::vector<ResourceType> resources;
    long long max_iterations = 0;
    ParamVector w0;
};

struct CentralizedResult {
    ParamVector w_final; // w(T); no w_f bookkeeping in the centralized case
    long long iterations = 0;
    std::vector<double> consumed;
    std::vector<TraceRecord> trace;
};

// Plain (S)GD stopping at the budget. Only local-update costs accrue; the
// result is the last parameter, so no extra loss-evaluation round is needed.
inline CentralizedResult run_centralized(const CentralizedConfig& cfg, const Dataset& data,
                                         const LossModel& model, std::uint64_t seed,
                                         const TraceTelemetry& telemetry = {}) {
    if (data.samples.empty()) throw config_error("run_centralized: empty dataset");
    if (cfg.resources.empty()) throw config_error("run_centralized: need >= 1 resource type");
    if (!(cfg.eta > 0.0)) throw config_error("run_centralized: eta must be > 0");
    const std::size_t m_count = cfg.resources.size();

    ResourceModel draws(seed);
    std::vector<CostEstimator> c_hat(m_count);
    std::vector<double> consumed(m_count, 0.0);
    BatchScheduler batches;
    if (cfg.mode == TrainMode::sgd)
        batches = BatchScheduler(derive_seed(seed, 0xBA7C), data.samples.size(), cfg.batch_size);

    CentralizedResult out;
    ParamVector w = cfg.w0;
    long long t = 0;
    NodePartition pooled{0, data.samples};
    std::vector<NodePartition> pooled_view{pooled};
    while (true) {
        if (cfg.max_iterations > 0 && t >= cfg.max_iterations) break;
        bool fits = true;
        for (std::size_t m = 0; m < m_count; ++m)
            if (c_hat[m].ready && consumed[m] + c_hat[m].value > cfg.resources[m].budget)
                fits = false;
        if (!fits) break;

        std::span<const std::size_t> batch;
        if (cfg.mode == TrainMode::sgd) batch = batches.next();
        apply_local_update(w, model, data.samples, batch, cfg.eta, t + 1);
        ++t;
        TraceRecord rec;
        rec.round = t;
        rec.iteration = t;
        rec.tau = 1;
        rec.loss = global_loss(model, w, pooled_view);
        if (telemetry.test_set && model.kind == ModelKind::squared_svm)
            rec.accuracy = compute_accuracy(model, w, *telemetry.test_set);
        for (std::size_t m = 0; m < m_count; ++m) {
            const double cost = draws.draw_local(cfg.resources[m]);
            consumed[m] += cost;
            c_hat[m].observe(cost);
            rec.c_hat.push_back(c_hat[m].value);
            rec.b_hat.push_back(0.0);
            rec.consumed.push_back(consumed[m]);
            rec.counters.push_back(consumed[m]);
        }
        out.trace.push_back(std::move(rec));
    }
    out.w_final = w;
    out.iterations = t;
    out.consumed = consumed;
    return out;
}

// ---------------------------------------------------------------------------
// Asynchronous distributed gradient descent.

struct AsyncConfig {
    double eta = 0.01;
    TrainMode mode = TrainMode::sgd;
    std::size_t batch_size = 32;
    std::vector<double> speed_factors; // per node, > 0; larger = faster compute
    std::vector<ResourceType> resources; // type 0 acts as the simulation clock
    ParamVector w0;
};

struct AsyncResult {
    ParamVector w_final;
    long long pushes = 0;
    double clock = 0.0;
    std::vector<TraceRecord> trace;
};

// Event-driven simulation. Each node independently cycles pull -> compute ->
// push against the shared parameter; the aggregator applies every pushed
// gradient in event order as a full step scaled by the node's relative
// dataset size (eta * D_i / mean D), so equal-size nodes take plain eta
// steps. Compute time is the node's local-update draw divided by its speed
// factor; a cycle's communication is one global-aggregation draw, split
// evenly between pull and push across the N nodes sharing the medium. A node
// only starts a cycle it can finish within the budget. Ties in event time
// resolve by node id.
inline AsyncResult run_async(const AsyncConfig& cfg, std::span<const NodePartition> parts,
                             const LossModel& model, std::uint64_t seed,
                             const TraceTelemetry& telemetry = {}) {
    if (parts.empty()) throw config_error("run_async: no partitions");
    if (cfg.resources.empty()) throw config_error("run_async: need >= 1 resource type");
    if (cfg.speed_factors.size() != parts.size())
        throw config_error("run_async: need one speed factor per node");
    for (double s : cfg.speed_factors)
        if (!(s > 0.0)) throw config_error("run_async: speed factors must be > 0");
    const ResourceType& clock_res = cfg.resources.front();
    const double budget = clock_res.budget;
    const std::size_t n = parts.size();

    double total_size = 0.0;
    std::vector<double> sizes(n);
    for (std::size_t i = 0; i < n; ++i) {
        sizes[i] = static_cast<double>(parts[i].size());
        total_size += sizes[i];
    }

    struct NodeRun {
        ResourceModel draws;
        BatchScheduler batches;
        double next_time = 0.0;   // completion time of the pending phase
        int phase = 0;            // 0 pull pending, 1 compute pending, 2 push pending
        bool active = true;
        ParamVector pulled;
        std::vector<std::size_t> batch;
        double compute_time = 0.0;
        double push_latency = 0.0;
    };

    std::vector<NodeRun> run;
    run.reserve(n);
    const std::uint64_t batch_seed = derive_seed(seed, 0xBA7C);
    for (std::size_t i = 0; i < n; ++i) {
        NodeRun nr{ResourceModel(derive_seed(seed, 0xA51C + i)),
                   cfg.mode == TrainMode::sgd
                       ? BatchScheduler(batch_seed, parts[i].size(), cfg.batch_size)
                       : BatchScheduler(),
                   0.0, 0, true, {}, {}, 0.0, 0.0};
        run.push_back(std::move(nr));
    }

    ParamVector w = cfg.w0;
    AsyncResult out;

    // Schedule the first cycle of every node.
    auto start_cycle = [&](std::size_t i, double now) {
        NodeRun& nr = run[i];
        const double comm = nr.draws.draw_global(clock_res) / static_cast<double>(n);
        const double comp = nr.draws.draw_local(clock_res) / cfg.speed_factors[i];
        if (now + comm + comp > budget) {
            nr.active = false;
            return;
        }
        nr.phase = 0;
        nr.next_time = now + comm / 2.0;
        nr.compute_time = comp;
        nr.push_latency = comm / 2.0;
    };
    for (std::size_t i = 0; i < n; ++i) start_cycle(i, 0.0);

    while (true) {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!run[i].active) continue;
            if (best == n || run[i].next_time < run[best].next_time) best = i;
        }
        if (best == n) break;
        NodeRun& nr = run[best];
        const double now = nr.next_time;
        switch (nr.phase) {
            case 0: // pull completed: snapshot the freshest parameter
                nr.pulled = w;
                if (cfg.mode == TrainMode::sgd) nr.batch = nr.batches.next();
                nr.phase = 1;
                nr.next_time = now + nr.compute_time;
                break;
            case 1: // compute completed
                nr.phase = 2;
                nr.next_time = now + nr.push_latency;
                break;
            case 2: { // push completed: apply the gradient
                const ParamVector g =
                    cfg.mode == TrainMode::sgd
                        ? subset_gradient(model, nr.pulled, parts[best].samples, nr.batch)
                        : mean_gradient(model, nr.pulled, parts[best].samples);
                const double weight = sizes[best] * static_cast<double>(n) / total_size;
                vec::axpy(-cfg.eta * weight, g, w);
                if (!vec::all_finite(w))
                    throw numerical_error("async update produced a non-finite parameter",
                                          out.pushes + 1);
                ++out.pushes;
                out.clock = now;
                TraceRecord rec;
                rec.round = out.pushes;
                rec.iteration = out.pushes;
                rec.tau = 1;
                rec.loss = global_loss(model, w, parts);
                if (telemetry.test_set && model.kind == ModelKind::squared_svm)
                    rec.accuracy = compute_accuracy(model, w, *telemetry.test_set);
                for (std::size_t m = 0; m < cfg.resources.size(); ++m) {
                    rec.c_hat.push_back(std::numeric_limits<double>::quiet_NaN());
                    rec.b_hat.push_back(std::numeric_limits<double>::quiet_NaN());
                    rec.consumed.push_back(now);
                    rec.counters.push_back(now);
                }
                out.trace.push_back(std::move(rec));
                start_cycle(best, now);
                break;
            }
        }
    }
    out.w_final = w;
    return out;
}

} // namespace fedsim
