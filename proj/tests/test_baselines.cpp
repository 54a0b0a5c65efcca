#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fedsim/baselines.hpp"
#include "fedsim/data.hpp"

using namespace fedsim;

namespace {

LossModel svm2(double lambda = 0.1) {
    LossModel m;
    m.kind = ModelKind::squared_svm;
    m.lambda = lambda;
    m.features = 2;
    return m;
}

std::vector<ResourceType> flat_time(double c, double b, double budget) {
    ResourceType r;
    r.mu_local = c;
    r.sigma_local = 0.0;
    r.mu_global = b;
    r.sigma_global = 0.0;
    r.budget = budget;
    return {r};
}

} // namespace

TEST_CASE("centralized descent reproduces the hand iterated quadratic") {
    // 0.5 (w - 2)^2 as linear regression with x = 1, y = 2
    LossModel m;
    m.kind = ModelKind::linear_regression;
    m.features = 1;
    Dataset ds;
    ds.samples = {Sample{{1.0}, 2.0}};
    CentralizedConfig cfg;
    cfg.eta = 0.5;
    cfg.mode = TrainMode::dgd;
    cfg.resources = flat_time(1.0, 0.0, 100.0);
    cfg.max_iterations = 2;
    cfg.w0 = {0.0};
    const CentralizedResult res = run_centralized(cfg, ds, m, 1);
    CHECK(res.iterations == 2);
    CHECK(res.w_final[0] == Catch::Approx(1.5)); // 0 -> 1 -> 1.5
    REQUIRE(res.trace.size() == 2);
    CHECK(res.trace[0].loss == Catch::Approx(0.5)); // at w=1
}

TEST_CASE("a budget below the per-step cost stops after the first step") {
    LossModel m;
    m.kind = ModelKind::linear_regression;
    m.features = 1;
    Dataset ds;
    ds.samples = {Sample{{1.0}, 2.0}};
    CentralizedConfig cfg;
    cfg.eta = 0.5;
    cfg.mode = TrainMode::dgd;
    cfg.resources = flat_time(1.0, 0.0, 0.5);
    cfg.w0 = {3.0};
    const CentralizedResult res = run_centralized(cfg, ds, m, 1);
    // the first step always runs (no estimate yet); then the estimate blocks
    CHECK(res.iterations == 1);
}

TEST_CASE("centralized descent stops at the budget under noise-free costs") {
    const Dataset ds = generate_synthetic(ModelKind::squared_svm, 60, 2, 0, 21);
    CentralizedConfig cfg;
    cfg.eta = 0.01;
    cfg.mode = TrainMode::sgd;
    cfg.batch_size = 8;
    cfg.resources = flat_time(0.01, 0.0, 0.5);
    cfg.w0 = ParamVector(2, 0.0);
    const CentralizedResult res = run_centralized(cfg, ds, svm2(), 5);
    CHECK(res.consumed[0] <= 0.5 + 1e-12);
    // 50 steps of 0.01 fill the budget exactly up to accumulation rounding
    CHECK(res.iterations >= 49);
    CHECK(res.iterations <= 50);
}

TEST_CASE("async with a single full-speed node tracks centralized sgd") {
    const Dataset ds = generate_synthetic(ModelKind::squared_svm, 80, 2, 0, 33);
    std::vector<NodePartition> parts{NodePartition{0, ds.samples}};

    AsyncConfig acfg;
    acfg.eta = 0.01;
    acfg.mode = TrainMode::sgd;
    acfg.batch_size = 8;
    acfg.speed_factors = {1.0};
    acfg.resources = flat_time(0.01, 0.01, 3.0);
    acfg.w0 = ParamVector(2, 0.0);
    const AsyncResult async_res = run_async(acfg, parts, svm2(), 77);

    CentralizedConfig ccfg;
    ccfg.eta = 0.01;
    ccfg.mode = TrainMode::sgd;
    ccfg.batch_size = 8;
    ccfg.resources = flat_time(0.01, 0.0, 1e9);
    ccfg.max_iterations = async_res.pushes;
    ccfg.w0 = ParamVector(2, 0.0);
    const CentralizedResult central = run_centralized(ccfg, ds, svm2(), 77);

    REQUIRE(async_res.pushes > 10);
    REQUIRE(central.iterations == async_res.pushes);
    for (std::size_t k = 0; k < central.w_final.size(); ++k)
        CHECK(async_res.w_final[k] == Catch::Approx(central.w_final[k]).margin(1e-12));
}

TEST_CASE("async event order is deterministic under the seed") {
    const Dataset ds = generate_synthetic(ModelKind::squared_svm, 100, 2, 0, 34);
    const auto parts = partition(ds, 3, 2, 7);
    AsyncConfig cfg;
    cfg.eta = 0.01;
    cfg.mode = TrainMode::sgd;
    cfg.batch_size = 8;
    cfg.speed_factors = {5.0, 1.0, 1.0};
    cfg.resources = {presets::sgd_distributed()};
    cfg.resources[0].budget = 3.0;
    cfg.w0 = ParamVector(2, 0.0);
    const AsyncResult a = run_async(cfg, parts, svm2(), 55);
    const AsyncResult b = run_async(cfg, parts, svm2(), 55);
    CHECK(a.pushes == b.pushes);
    CHECK(a.w_final == b.w_final);
    CHECK(a.clock == b.clock);
}

TEST_CASE("async never runs past the budget clock") {
    const Dataset ds = generate_synthetic(ModelKind::squared_svm, 100, 2, 0, 35);
    const auto parts = partition(ds, 5, 1, 9);
    AsyncConfig cfg;
    cfg.eta = 0.01;
    cfg.mode = TrainMode::sgd;
    cfg.batch_size = 8;
    cfg.speed_factors = {5.0, 5.0, 1.0, 1.0, 1.0};
    cfg.resources = {presets::sgd_distributed()};
    cfg.resources[0].budget = 2.0;
    cfg.w0 = ParamVector(2, 0.0);
    const AsyncResult res = run_async(cfg, parts, svm2(), 66);
    CHECK(res.clock <= 2.0);
    CHECK(res.pushes > 0);
    for (const TraceRecord& rec : res.trace) CHECK(rec.consumed[0] <= 2.0);
}

TEST_CASE("faster nodes push more often") {
    const Dataset ds = generate_synthetic(ModelKind::squared_svm, 100, 2, 0, 36);
    const auto parts = partition(ds, 2, 1, 11);
    AsyncConfig cfg;
    cfg.eta = 0.001;
    cfg.mode = TrainMode::dgd;
    cfg.speed_factors = {4.0, 1.0};
    cfg.resources = flat_time(0.1, 0.02, 10.0);
    cfg.w0 = ParamVector(2, 0.0);
    const AsyncResult res = run_async(cfg, parts, svm2(), 67);
    // node 0 cycle: 0.01 + 0.025 = 0.035, node 1: 0.01 + 0.1 = 0.11
    CHECK(res.pushes > 0);
    const double expected_ratio = 0.11 / 0.035;
    const double lo = expected_ratio * 0.7, hi = expected_ratio * 1.3;
    // count pushes per node via the deterministic cycle lengths
    long long fast = 0, slow = 0;
    double t_fast = 0.035, t_slow = 0.11;
    while (t_fast <= 10.0) {
        ++fast;
        t_fast += 0.035;
    }
    while (t_slow <= 10.0) {
        ++slow;
        t_slow += 0.11;
    }
    CHECK(res.pushes == fast + slow);
    CHECK(static_cast<double>(fast) / static_cast<double>(slow) >= lo);
    CHECK(static_cast<double>(fast) / static_cast<double>(slow) <= hi);
}
