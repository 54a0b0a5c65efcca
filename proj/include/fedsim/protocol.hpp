#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/control.hpp"
#include "fedsim/data.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/resources.hpp"
#include "fedsim/trace.hpp"

namespace fedsim {

// Round message from the aggregator to every edge node.
struct RoundMessage {
    ParamVector w;        // w(t) at the start of the round
    long long tau = 1;    // local updates to run this round
    bool stop = false;    // this is the last training round
    bool wf_selected = false; // the previously broadcast parameter became w_f
};

// Edge-node reply at the end of a round.
struct NodeReply {
    ParamVector w;            // w_i(t) after the local updates
    bool has_estimates = false;
    double rho_i = 0.0;
    double beta_i = 0.0;
    double loss_at_received = 0.0;      // F_i(w(t0))
    double loss_at_wf = 0.0;            // F_i(w_f) on the same data view (SGD)
    ParamVector grad_at_received;       // grad F_i(w(t0))
    bool batch_clamped = false;
};

// Procedure at one edge node. Each round: compute the boundary estimates
// against the freshly received global parameter, then run tau local updates.
// Estimates and the loss/gradient at w(t0) are returned with the reply, i.e.
// they reach the aggregator one round after the parameter they refer to.
//
// In SGD mode every quantity is evaluated on the mini-batch of the most
// recent local update (which is also the batch the first update of the new
// round reuses); the node additionally re-evaluates its stored w_f copy on
// that batch so the aggregator can compare like with like.
class EdgeNode {
public:
    EdgeNode(int id, const NodePartition* part, const LossModel* model, TrainMode mode,
             double eta, std::size_t batch_size, std::uint64_t batch_seed,
             const ParamVector& w0)
        : id_(id), part_(part), model_(model), mode_(mode), eta_(eta), w_(w0),
          w_tilde_(w0), last_received_(w0), wf_copy_(w0) {
        if (mode_ == TrainMode::sgd)
            batches_ = BatchScheduler(batch_seed, part_->size(), batch_size);
    }

    NodeReply run_round(const RoundMessage& msg) {
        if (phase_ != Phase::awaiting_round)
            throw protocol_error("edge node " + std::to_string(id_) + ": round out of order");
        if (msg.wf_selected) wf_copy_ = last_received_;

        NodeReply reply;
        if (t_ > 0) {
            const double loss_local = eval_loss(w_);
            const double loss_global = eval_loss(msg.w);
            const ParamVector grad_local = eval_gradient(w_);
            ParamVector grad_global = eval_gradient(msg.w);
            const NodeParamEstimate est = estimate_node_params(
                w_, msg.w, loss_local, loss_global, grad_local, grad_global);
            reply.has_estimates = true;
            reply.rho_i = est.rho_i;
            reply.beta_i = est.beta_i;
            reply.loss_at_received = loss_global;
            reply.grad_at_received = std::move(grad_global);
            reply.loss_at_wf =
                mode_ == TrainMode::sgd ? eval_loss(wf_copy_) : 0.0;
        }
        last_received_ = msg.w;
        w_tilde_ = msg.w;
        if (mode_ == TrainMode::sgd && t_ > 0) batches_.note_aggregation();

        for (long long mu = 0; mu < msg.tau; ++mu) {
            ++t_;
            w_ = w_tilde_;
            std::span<const std::size_t> batch;
            if (mode_ == TrainMode::sgd) batch = batches_.next();
            apply_local_update(w_, *model_, part_->samples, batch, eta_, t_);
            if (mu + 1 < msg.tau) w_tilde_ = w_;
        }
        reply.w = w_;
        reply.batch_clamped = mode_ == TrainMode::sgd && batches_.clamped();
        phase_ = msg.stop ? Phase::awaiting_final : Phase::awaiting_round;
        return reply;
    }

    // Closing exchange: one more loss evaluation at the final parameter.
    // Returns F_i(w_final) and, for SGD, F_i(w_f) on the same batch.
    std::pair<double, double> run_final(const ParamVector& w_final, bool wf_selected) {
        if (phase_ == Phase::done)
            throw protocol_error("edge node " + std::to_string(id_) + ": already finalized");
        if (wf_selected) wf_copy_ = last_received_;
        phase_ = Phase::done;
        const double loss = eval_loss(w_final);
        const double loss_wf = mode_ == TrainMode::sgd ? eval_loss(wf_copy_) : 0.0;
        return {loss, loss_wf};
    }

    const ParamVector& local_param() const { return w_; }
    long long iteration() const { return t_; }

private:
    double eval_loss(const ParamVector& w) const {
        if (mode_ == TrainMode::sgd)
            return subset_loss(*model_, w, part_->samples, batches_.current());
        return mean_loss(*model_, w, part_->samples);
    }
    ParamVector eval_gradient(const ParamVector& w) const {
        if (mode_ == TrainMode::sgd)
            return subset_gradient(*model_, w, part_->samples, batches_.current());
        return mean_gradient(*model_, w, part_->samples);
    }

    enum class Phase { awaiting_round, awaiting_final, done };

    int id_;
    const NodePartition* part_;
    const LossModel* model_;
    TrainMode mode_;
    double eta_;
    ParamVector w_;             // w_i(t)
    ParamVector w_tilde_;       // parameter after possible aggregation
    ParamVector last_received_; // global parameter from the current round
    ParamVector wf_copy_;       // node-side w_f (SGD bookkeeping)
    BatchScheduler batches_;
    long long t_ = 0;
    Phase phase_ = Phase::awaiting_round;
};

enum class TauPolicy { adaptive, fixed };

struct ProtocolConfig {
    TauPolicy policy = TauPolicy::adaptive;
    long long fixed_tau = 10; // used by TauPolicy::fixed
    TrainMode mode = TrainMode::dgd;
    std::size_t batch_size = 32;
    ControlConfig control;
    std::vector<ResourceType> resources;
    long long max_iterations = 0; // 0: stop on budget only
    ParamVector w0;
};

struct ProtocolResult {
    ParamVector w_f;
    ParamVector w_final;
    double loss_wf = std::numeric_limits<double>::quiet_NaN(); // as seen by the protocol
    long long iterations = 0;
    long long rounds = 0;
    double mean_tau = 0.0;
    bool stopped_on_budget = false;
    std::vector<double> consumed; // actual totals per resource type
    std::vector<double> counters; // aggregator counters s_m
    std::vector<TraceRecord> trace;
};

// Telemetry-only hook: lets the runner attach test-set accuracy to the trace
// without touching the protocol itself.
struct TraceTelemetry {
    const Dataset* test_set = nullptr; // SVM accuracy when present
};

inline double compute_accuracy(const LossModel& model, const ParamVector& w,
                               const Dataset& test);

// Procedure at the aggregator, driving the edge nodes round by round.
//
// Per round: broadcast (w, tau*, STOP?); collect local parameters and the
// lagged estimates; fold the loss at the previously broadcast parameter into
// w_f; re-estimate (rho, beta, delta) and re-search tau* when adaptive;
// update resource counters and run the budget check, which may shrink tau*
// for one final round and raise STOP. After the loop a closing exchange
// evaluates the loss at the last parameter.
inline ProtocolResult run_protocol(const ProtocolConfig& cfg,
                                   std::span<const NodePartition> parts,
                                   const LossModel& model, std::uint64_t seed,
                                   const TraceTelemetry& telemetry = {}) {
    if (parts.empty()) throw config_error("run_protocol: no partitions");
    if (cfg.resources.empty()) throw config_error("run_protocol: need >= 1 resource type");
    for (const auto& r : cfg.resources) {
        r.validate();
        if (r.budget - r.mu_local - r.mu_global <= 0.0)
            throw budget_error("run_protocol: budget for '" + r.name +
                               "' cannot cover even one round (R' <= 0)");
    }
    cfg.control.validate();
    const std::size_t m_count = cfg.resources.size();
    const std::size_t n = parts.size();

    std::vector<double> sizes(n);
    for (std::size_t i = 0; i < n; ++i) sizes[i] = static_cast<double>(parts[i].size());

    const std::uint64_t batch_seed = derive_seed(seed, 0xBA7C); // shared by all nodes
    std::vector<EdgeNode> nodes;
    nodes.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        nodes.emplace_back(static_cast<int>(i), &parts[i], &model, cfg.mode, cfg.control.eta,
                           cfg.batch_size, batch_seed, cfg.w0);

    ResourceModel draws(seed);
    std::vector<CostEstimator> c_hat(m_count), b_hat(m_count);
    std::vector<double> counters(m_count, 0.0), consumed(m_count, 0.0);

    ProtocolResult out;
    out.w_f = cfg.w0;
    ParamVector w_global = cfg.w0;
    double loss_wf = std::numeric_limits<double>::infinity(); // F(w(0)) is never evaluated
    long long tau_star = cfg.policy == TauPolicy::fixed ? cfg.fixed_tau : 1;
    if (tau_star < 1) throw config_error("run_protocol: fixed tau must be >= 1");
    bool stop = false, wf_flag = false, eta_beta_flag = false, hzero_flag = false;
    long long t = 0;
    double tau_sum = 0.0;

    while (true) {
        ++out.rounds;
        const long long tau_used = tau_star;
        tau_sum += static_cast<double>(tau_used);
        RoundMessage msg{w_global, tau_used, stop, wf_flag};
        wf_flag = false;
        const ParamVector sent_w = w_global;
        const long long t0 = t;
        t += tau_used;

        std::vector<NodeReply> replies;
        replies.reserve(n);
        for (auto& node : nodes) replies.push_back(node.run_round(msg));

        // Simulated consumption for this round: one draw per local update
        // step and one per aggregation, per resource type.
        std::vector<double> round_local(m_count, 0.0), round_global(m_count, 0.0);
        for (std::size_t m = 0; m < m_count; ++m) {
            for (long long s = 0; s < tau_used; ++s)
                round_local[m] += draws.draw_local(cfg.resources[m]);
            round_global[m] = draws.draw_global(cfg.resources[m]);
        }

        std::vector<ParamVector> node_params;
        node_params.reserve(n);
        for (const auto& r : replies) node_params.push_back(r.w);
        w_global = vec::weighted_average(node_params, sizes);

        TraceRecord rec;
        rec.round = out.rounds;
        rec.iteration = t;
        rec.tau = tau_used;
        std::string flags;
        auto add_flag = [&flags](const char* f) {
            if (!flags.empty()) flags += '|';
            flags += f;
        };
        if (stop) add_flag("stop");
        for (const auto& r : replies)
            if (r.batch_clamped) {
                add_flag("batch_clamped");
                break;
            }

        bool done = false;
        if (t0 > 0) {
            double loss_t0 = 0.0, total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                loss_t0 += sizes[i] * replies[i].loss_at_received;
                total += sizes[i];
            }
            loss_t0 /= total;
            double wf_reference = loss_wf;
            if (cfg.mode == TrainMode::sgd) {
                // Recompute F(w_f) from the same mini-batches as F(w(t0)).
                double v = 0.0;
                for (std::size_t i = 0; i < n; ++i) v += sizes[i] * replies[i].loss_at_wf;
                wf_reference = std::isinf(loss_wf)
                                   ? loss_wf
                                   : v / total;
            }
            rec.loss = loss_t0;
            if (telemetry.test_set && model.kind == ModelKind::squared_svm)
                rec.accuracy = compute_accuracy(model, sent_w, *telemetry.test_set);
            if (loss_t0 < wf_reference) {
                out.w_f = sent_w;
                loss_wf = loss_t0;
                wf_flag = true;
                add_flag("wf");
            }
            if (stop) {
                done = true;
            } else if (cfg.policy == TauPolicy::adaptive) {
                std::vector<NodeParamEstimate> est(n);
                std::vector<ParamVector> grads;
                grads.reserve(n);
                for (std::size_t i = 0; i < n; ++i) {
                    est[i] = {replies[i].rho_i, replies[i].beta_i};
                    grads.push_back(replies[i].grad_at_received);
                }
                EstimatedParams global = estimate_global_params(est, grads, sizes);
                rec.rho_hat = global.rho;
                rec.beta_hat = global.beta;
                rec.delta_hat = global.delta;
                if (global.beta > 0.0 && cfg.control.eta > 1.0 / global.beta) {
                    eta_beta_flag = true;
                    add_flag("eta_beta");
                }
                if (global.beta == 0.0 && global.delta > 0.0) {
                    // Continuous limit of the gap expression as beta -> 0 is
                    // zero; treat the degenerate estimate that way.
                    global.delta = 0.0;
                    hzero_flag = true;
                    add_flag("hzero");
                }
                ControlInputs in;
                in.eta = cfg.control.eta;
                in.phi = cfg.control.phi;
                in.rho = global.rho;
                in.beta = global.beta;
                in.delta = global.delta;
                for (std::size_t m = 0; m < m_count; ++m) {
                    const double c = c_hat[m].value, b = b_hat[m].value;
                    const double r_prime = cfg.resources[m].budget - b - c;
                    if (!(r_prime > 0.0))
                        throw budget_error("run_protocol: budget too small (R' <= 0)");
                    in.res.push_back({c, b, r_prime});
                }
                tau_star =
                    search_optimal_tau(tau_star, in, cfg.control.gamma, cfg.control.tau_max);
            }
        }

        for (std::size_t m = 0; m < m_count; ++m) {
            c_hat[m].observe(round_local[m] / static_cast<double>(tau_used));
            b_hat[m].observe(round_global[m]);
            counters[m] += c_hat[m].value * static_cast<double>(tau_used) + b_hat[m].value;
            consumed[m] += round_local[m] + round_global[m];
            rec.c_hat.push_back(c_hat[m].value);
            rec.b_hat.push_back(b_hat[m].value);
            rec.consumed.push_back(consumed[m]);
            rec.counters.push_back(counters[m]);
        }
        rec.flags = flags;
        out.trace.push_back(std::move(rec));
        if (done) break;

        std::vector<double> ch(m_count), bh(m_count), budgets(m_count);
        for (std::size_t m = 0; m < m_count; ++m) {
            ch[m] = c_hat[m].value;
            bh[m] = b_hat[m].value;
            budgets[m] = cfg.resources[m].budget;
        }
        const BudgetDecision decision = check_budget(counters, ch, bh, tau_star, budgets);
        if (decision.stop) {
            out.stopped_on_budget = true;
            if (!decision.final_round) break; // only the closing exchange still fits
            tau_star = decision.tau;
            stop = true;
        }
        if (cfg.max_iterations > 0) {
            if (t >= cfg.max_iterations) break;
            tau_star = std::min(tau_star, cfg.max_iterations - t);
        }
    }

    // Closing exchange: w(t) goes out once more, the nodes answer with its
    // loss, and w_f takes it if it is better. This costs one more local
    // update and one more aggregation per resource type.
    for (std::size_t m = 0; m < m_count; ++m)
        consumed[m] += draws.draw_local(cfg.resources[m]) + draws.draw_global(cfg.resources[m]);
    double loss_final = 0.0, loss_wf_ref = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto [l, lw] = nodes[i].run_final(w_global, wf_flag);
        loss_final += sizes[i] * l;
        loss_wf_ref += sizes[i] * lw;
        total += sizes[i];
    }
    loss_final /= total;
    loss_wf_ref /= total;
    const double wf_reference =
        cfg.mode == TrainMode::sgd && !std::isinf(loss_wf) ? loss_wf_ref : loss_wf;
    if (loss_final < wf_reference) {
        out.w_f = w_global;
        loss_wf = loss_final;
    }

    out.w_final = w_global;
    out.loss_wf = loss_wf;
    out.iterations = t;
    out.mean_tau = tau_sum / static_cast<double>(out.rounds);
    out.consumed = consumed;
    out.counters = counters;
    (void)eta_beta_flag;
    (void)hzero_flag;
    return out;
}

// Fraction of test samples whose predicted sign matches the label;
// sign(0) counts as +1.
inline double compute_accuracy(const LossModel& model, const ParamVector& w,
                               const Dataset& test) {
    if (model.kind != ModelKind::squared_svm)
        throw config_error("compute_accuracy: only defined for the SVM model");
    if (test.samples.empty()) throw config_error("compute_accuracy: empty test set");
    std::size_t hits = 0;
    for (const Sample& s : test.samples) {
        const double pred = vec::dot(w, s.x) >= 0.0 ? 1.0 : -1.0;
        if (pred == s.y) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test.samples.size());
}

} // namespace fedsim
