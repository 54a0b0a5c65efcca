#include <catch2/catch_amalgamated.hpp>

#include "fedsim/baselines.hpp"
#include "fedsim/data.hpp"
#include "fedsim/engine.hpp"

using namespace fedsim;

namespace {

LossModel regression1d() {
    LossModel m;
    m.kind = ModelKind::linear_regression;
    m.features = 1;
    return m;
}

std::vector<NodePartition> svm_parts(int nodes, int n, std::uint64_t seed) {
    const Dataset ds = generate_synthetic(ModelKind::squared_svm, n, 3, 0, seed);
    return partition(ds, nodes, 1, seed + 1);
}

} // namespace

TEST_CASE("a single local update follows the gradient step") {
    const LossModel m = regression1d();
    NodePartition p;
    p.samples = {Sample{{1.0}, 1.0}};
    ParamVector w{0.0};
    apply_local_update(w, m, p.samples, {}, 0.1, 1);
    CHECK(w[0] == Catch::Approx(0.1)); // gradient at 0 is -1

    // zero gradient leaves the parameter unchanged
    ParamVector fixed{1.0};
    apply_local_update(fixed, m, p.samples, {}, 0.01, 1);
    CHECK(fixed[0] == Catch::Approx(1.0));
}

TEST_CASE("two consecutive updates compose into the two step trajectory") {
    const LossModel m = regression1d();
    NodePartition p;
    p.samples = {Sample{{1.0}, 2.0}};
    ParamVector w{0.0};
    apply_local_update(w, m, p.samples, {}, 0.5, 1);
    apply_local_update(w, m, p.samples, {}, 0.5, 2);
    // 0 -> 1 -> 1.5 on the quadratic 0.5 (2 - w)^2
    CHECK(w[0] == Catch::Approx(1.5));
}

TEST_CASE("weighted aggregation") {
    CHECK(vec::weighted_average({{1.0}, {3.0}}, {1.0, 1.0})[0] == Catch::Approx(2.0));
    CHECK(vec::weighted_average({{0.0}, {4.0}}, {1.0, 3.0})[0] == Catch::Approx(3.0));
    CHECK(vec::weighted_average({{7.0, -1.0}}, {5.0}) == ParamVector{7.0, -1.0});
}

TEST_CASE("non finite updates raise a numerical error with the iteration") {
    const LossModel m = regression1d();
    NodePartition p;
    p.samples = {Sample{{1e308}, 0.0}};
    ParamVector w{1.0};
    try {
        apply_local_update(w, m, p.samples, {}, 10.0, 42);
        FAIL("expected numerical_error");
    } catch (const numerical_error& e) {
        CHECK(e.iteration() == 42);
    }
}

TEST_CASE("tau=1 distributed run matches centralized gradient descent") {
    const auto parts = svm_parts(5, 120, 99);
    LossModel m;
    m.kind = ModelKind::squared_svm;
    m.lambda = 0.1;
    m.features = 3;

    std::vector<Sample> pooled;
    for (const auto& p : parts) pooled.insert(pooled.end(), p.samples.begin(), p.samples.end());

    LogicalRunConfig cfg;
    cfg.tau = 1;
    cfg.total_iterations = 60;
    cfg.eta = 0.05;
    cfg.w0 = ParamVector(3, 0.0);
    cfg.record_trajectory = true;
    const LogicalRunResult dist = run_fixed_tau(cfg, parts, m);

    ParamVector w(3, 0.0);
    for (long long t = 1; t <= cfg.total_iterations; ++t) {
        const ParamVector g = mean_gradient(m, w, pooled);
        vec::axpy(-cfg.eta, g, w);
        for (std::size_t k = 0; k < w.size(); ++k)
            REQUIRE(std::abs(dist.trajectory[static_cast<std::size_t>(t)][k] - w[k]) <= 1e-12);
    }
}

TEST_CASE("zero iterations returns the initial state") {
    const auto parts = svm_parts(3, 30, 7);
    LossModel m;
    m.kind = ModelKind::squared_svm;
    m.lambda = 0.1;
    m.features = 3;
    LogicalRunConfig cfg;
    cfg.tau = 1;
    cfg.total_iterations = 0;
    cfg.w0 = ParamVector(3, 0.0);
    const LogicalRunResult res = run_fixed_tau(cfg, parts, m);
    CHECK(res.w_final == cfg.w0);
    CHECK(res.loss_wf == Catch::Approx(global_loss(m, cfg.w0, parts)));
    CHECK(res.aggregations == 0);
}

TEST_CASE("tau=T performs exactly one aggregation during training") {
    const auto parts = svm_parts(3, 30, 8);
    LossModel m;
    m.kind = ModelKind::squared_svm;
    m.lambda = 0.1;
    m.features = 3;
    LogicalRunConfig cfg;
    cfg.tau = 10;
    cfg.total_iterations = 10;
    cfg.eta = 0.01;
    cfg.w0 = ParamVector(3, 0.0);
    const LogicalRunResult res = run_fixed_tau(cfg, parts, m);
    CHECK(res.aggregations == 1);
}

TEST_CASE("a trailing partial block still closes with an aggregation") {
    const auto parts = svm_parts(3, 30, 9);
    LossModel m;
    m.kind = ModelKind::squared_svm;
    m.lambda = 0.1;
    m.features = 3;
    LogicalRunConfig cfg;
    cfg.tau = 4;
    cfg.total_iterations = 10; // aggregations at 4, 8 and the closing one at 10
    cfg.eta = 0.01;
    cfg.w0 = ParamVector(3, 0.0);
    const LogicalRunResult res = run_fixed_tau(cfg, parts, m);
    CHECK(res.aggregations == 3);
}

TEST_CASE("best loss over aggregation points never increases") {
    const auto parts = svm_parts(4, 80, 10);
    LossModel m;
    m.kind = ModelKind::squared_svm;
    m.lambda = 0.1;
    m.features = 3;
    LogicalRunConfig cfg;
    cfg.tau = 5;
    cfg.total_iterations = 50;
    cfg.eta = 0.05;
    cfg.w0 = ParamVector(3, 0.0);
    const LogicalRunResult res = run_fixed_tau(cfg, parts, m);
    double best = 1e300;
    bool ok = true;
    // replay: evaluate losses along the recorded aggregation points
    // (w_f tracking must equal the running minimum)
    cfg.record_trajectory = true;
    const LogicalRunResult replay = run_fixed_tau(cfg, parts, m);
    for (long long t = 0; t <= cfg.total_iterations; ++t) {
        if (t == 0 || t % cfg.tau == 0 || t == cfg.total_iterations) {
            const double loss =
                global_loss(m, replay.trajectory[static_cast<std::size_t>(t)], parts);
            if (loss < best) best = loss;
        }
    }
    ok = std::abs(best - res.loss_wf) <= 1e-12;
    CHECK(ok);
}

TEST_CASE("identical node data keeps all local parameters equal under dgd") {
    const Dataset ds = generate_synthetic(ModelKind::squared_svm, 40, 2, 0, 3);
    const auto parts = partition(ds, 4, 3, 1); // full replication
    LossModel m;
    m.kind = ModelKind::squared_svm;
    m.lambda = 0.1;
    m.features = 2;
    LogicalRunConfig cfg;
    cfg.tau = 7;
    cfg.total_iterations = 21;
    cfg.eta = 0.02;
    cfg.w0 = ParamVector(2, 0.0);
    cfg.record_trajectory = true;
    const LogicalRunResult res = run_fixed_tau(cfg, parts, m);

    // Compare against a single node running alone: trajectories must agree
    // bit for bit because every node is the same deterministic computation.
    std::vector<NodePartition> solo{parts[0]};
    const LogicalRunResult alone = run_fixed_tau(cfg, solo, m);
    CHECK(res.trajectory.back() == alone.trajectory.back());
}

// Mini-batch schedule of the stochastic mode.
TEST_CASE("batch reuse pattern around aggregations (tau=3)") {
    BatchScheduler s(123, 100, 10);
    std::vector<long long> ids;
    for (int i = 0; i < 3; ++i) {
        s.next();
        ids.push_back(s.current_id());
    }
    s.note_aggregation();
    for (int i = 0; i < 3; ++i) {
        s.next();
        ids.push_back(s.current_id());
    }
    // b1 b2 b3 (agg) b3 b4 b5
    CHECK(ids == std::vector<long long>{0, 1, 2, 2, 3, 4});
}

TEST_CASE("batch reuse pattern with tau=1 uses each batch exactly twice") {
    BatchScheduler s(123, 100, 10);
    std::vector<long long> ids;
    for (int round = 0; round < 6; ++round) {
        s.next();
        ids.push_back(s.current_id());
        s.note_aggregation();
    }
    // b1 (agg) b1 (agg) b2 (agg) b2 ...
    CHECK(ids == std::vector<long long>{0, 0, 1, 1, 2, 2});
}

TEST_CASE("equal seeds give equal batch sequences across nodes") {
    BatchScheduler a(9, 50, 8), b(9, 50, 8);
    for (int i = 0; i < 10; ++i) {
        CHECK(a.next() == b.next());
        if (i % 3 == 2) {
            a.note_aggregation();
            b.note_aggregation();
        }
    }
}

TEST_CASE("oversized batches clamp to the node dataset") {
    BatchScheduler s(1, 5, 32);
    CHECK(s.clamped());
    CHECK(s.next().size() == 5);
}
