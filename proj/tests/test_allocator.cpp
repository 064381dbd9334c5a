#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "headbal/allocator.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace headbal;
using testutil::TempDir;
using testutil::ramp_curve;

namespace {

// Largest single-quantum recovery change anywhere on the sampled grids;
// "one step's effect" for near-optimality comparisons.
double one_step_effect(const std::vector<RecoveryCurve>& curves, long floor, long quantum) {
    double effect = 0.0;
    for (const auto& c : curves) {
        for (long b = floor + quantum; b <= c.context_length; b += quantum) {
            effect = std::max(effect, c.recovery_at(b) - c.recovery_at(b - quantum));
        }
    }
    return effect;
}

std::vector<RecoveryCurve> synthetic_curves(std::uint64_t seed, long heads, long n_k,
                                            long stride) {
    SyntheticWorkloadSpec spec;
    spec.num_heads = heads;
    spec.context_length = n_k;
    spec.num_queries = 4;
    spec.head_dim = 8;
    spec.exponent_min = 0.3;
    spec.exponent_max = 2.5;
    spec.seed = seed;
    const auto profiles = build_profiles(generate_workload(spec),
                                         default_budget_grid(n_k, stride),
                                         SelectionKind::PerQueryTopK, {"alloc-test", "unit"});
    std::vector<RecoveryCurve> curves;
    for (const auto& p : profiles) curves.push_back(p.curve);
    return curves;
}

}  // namespace

TEST_CASE("uniform split with and without remainder") {
    const auto even = uniform_allocate(4, 4096, 0, 4096);
    CHECK(even.budgets == std::vector<long>{1024, 1024, 1024, 1024});

    const auto uneven = uniform_allocate(3, 10, 1, 16);
    CHECK(uneven.budgets == std::vector<long>{4, 3, 3});
    CHECK(uneven.total == 10);

    const auto full = uniform_allocate(32, 32L * 4096, 128, 4096);
    for (long b : full.budgets) CHECK(b == 4096);
}

TEST_CASE("uniform split reports the feasible range on bad totals") {
    CHECK_THROWS_WITH_AS(uniform_allocate(4, 100, 128, 4096), doctest::Contains("[512, 16384]"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(uniform_allocate(2, 9000, 128, 4096), doctest::Contains("feasible"),
                         std::invalid_argument);
}

TEST_CASE("identical curves keep the uniform allocation with zero transfers") {
    std::vector<RecoveryCurve> curves;
    for (int h = 0; h < 4; ++h) curves.push_back(ramp_curve(h, 1024, 1024, 64));
    AllocatorConfig config;  // defaults: quantum 64, floor 128
    const auto alloc = maxmin_allocate(curves, 4 * 512, config);
    CHECK(alloc.budgets == std::vector<long>{512, 512, 512, 512});
    CHECK(alloc.transfers.empty());
    CHECK(!alloc.hit_iteration_cap);
}

TEST_CASE("the two-head worked instance converges to (128, 1920)") {
    std::vector<RecoveryCurve> curves = {ramp_curve(0, 4096, 256, 64),
                                         ramp_curve(1, 4096, 4096, 64)};
    AllocatorConfig config;
    const auto alloc = maxmin_allocate(curves, 2048, config);
    CHECK(alloc.budgets == std::vector<long>{128, 1920});
    CHECK(min_recovery(curves, alloc.budgets) == doctest::Approx(0.46875).epsilon(1e-12));

    // Uniform start is (1024, 1024) with min recovery 0.25.
    const auto uniform = uniform_allocate(2, 2048, 128, 4096);
    CHECK(min_recovery(curves, uniform.budgets) == doctest::Approx(0.25).epsilon(1e-12));

    // The exhaustive grid search agrees this is the best reachable minimum.
    const double best = oracles::exhaustive_best_min_recovery(curves, 2048, 128, 64);
    CHECK(min_recovery(curves, alloc.budgets) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("conservation, floors and donor ordering hold on fuzzed runs") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto curves = synthetic_curves(100 + seed, 6, 512, 32);
        AllocatorConfig config;
        config.quantum = 32;
        config.floor = 64;
        const long total = 6 * 192;
        const auto alloc = maxmin_allocate(curves, total, config);

        CHECK(std::accumulate(alloc.budgets.begin(), alloc.budgets.end(), 0L) == total);
        for (long b : alloc.budgets) {
            CHECK(b >= config.floor);
            CHECK(b <= 512);
        }
        for (const auto& t : alloc.transfers) {
            CHECK(t.donor_recovery >= t.recipient_recovery);
            CHECK(t.amount == 32);
        }
        // Committed transfers strictly raise the minimum recovery.
        for (std::size_t i = 1; i < alloc.min_recovery_trace.size(); ++i) {
            CHECK(alloc.min_recovery_trace[i] > alloc.min_recovery_trace[i - 1]);
        }
        // Never worse than the uniform start.
        const auto uniform = uniform_allocate(6, total, config.floor, 512);
        CHECK(min_recovery(curves, alloc.budgets) >=
              min_recovery(curves, uniform.budgets) - 1e-12);
    }
}

TEST_CASE("small instances land within one quantum step of the exhaustive optimum") {
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto curves = synthetic_curves(3000 + seed, 4, 1024, 64);
        AllocatorConfig config;  // quantum 64, floor 128
        const long total = 4 * 512;
        const auto alloc = maxmin_allocate(curves, total, config);
        const double achieved = min_recovery(curves, alloc.budgets);
        const double best =
            oracles::exhaustive_best_min_recovery(curves, total, config.floor, config.quantum);
        const double slack = one_step_effect(curves, config.floor, config.quantum);
        CHECK(achieved >= best - slack - 1e-12);
        ++checked;
    }
    CHECK(checked == 50);
}

TEST_CASE("budget cap at the context length stops cleanly") {
    // Full budget: every head pinned at n_k, nothing to shift.
    std::vector<RecoveryCurve> curves = {ramp_curve(0, 256, 64, 16), ramp_curve(1, 256, 256, 16)};
    AllocatorConfig config;
    config.quantum = 16;
    config.floor = 16;
    const auto alloc = maxmin_allocate(curves, 512, config);
    CHECK(alloc.budgets == std::vector<long>{256, 256});
    CHECK(alloc.transfers.empty());
}

TEST_CASE("iteration cap is reported") {
    std::vector<RecoveryCurve> curves = {ramp_curve(0, 4096, 256, 64),
                                         ramp_curve(1, 4096, 4096, 64)};
    AllocatorConfig config;
    config.max_iterations = 3;
    const auto alloc = maxmin_allocate(curves, 2048, config);
    CHECK(alloc.hit_iteration_cap);
    CHECK(alloc.transfers.size() == 3);
    CHECK(std::accumulate(alloc.budgets.begin(), alloc.budgets.end(), 0L) == 2048);
}

TEST_CASE("oracle top-p baseline") {
    std::vector<RecoveryCurve> curves = {ramp_curve(0, 1024, 128, 16),
                                         ramp_curve(1, 1024, 1024, 16)};
    const auto full = oracle_topp_allocate(curves, 1.0);
    CHECK(full.budgets == std::vector<long>{1024, 1024});
    CHECK(full.total == 2048);

    RecoveryCurve onehot;
    onehot.id = {0, 0};
    onehot.context_length = 1024;
    onehot.points = {{1, 1.0}, {1024, 1.0}};
    const auto tiny = oracle_topp_allocate({onehot, onehot}, 0.9);
    CHECK(tiny.budgets == std::vector<long>{1, 1});

    // Heterogeneous synthetic heads spread the p=0.9 budgets by over 2x.
    const auto curves32 = synthetic_curves(11, 32, 1024, 8);
    const auto spread = oracle_topp_allocate(curves32, 0.9);
    const auto [lo, hi] = std::minmax_element(spread.budgets.begin(), spread.budgets.end());
    CHECK(static_cast<double>(*hi) / static_cast<double>(std::max(1L, *lo)) > 2.0);
}

TEST_CASE("maxmin validates inputs") {
    AllocatorConfig config;
    CHECK_THROWS_AS(maxmin_allocate({}, 100, config), std::invalid_argument);

    std::vector<RecoveryCurve> mismatched = {ramp_curve(0, 512, 256, 64),
                                             ramp_curve(1, 1024, 256, 64)};
    CHECK_THROWS_WITH_AS(maxmin_allocate(mismatched, 512, config),
                         doctest::Contains("share the context length"), std::invalid_argument);

    std::vector<RecoveryCurve> pair = {ramp_curve(0, 1024, 256, 64),
                                       ramp_curve(1, 1024, 512, 64)};
    CHECK_THROWS_AS(maxmin_allocate(pair, 100, config), std::invalid_argument);

    AllocatorConfig bad;
    bad.quantum = 0;
    CHECK_THROWS_AS(maxmin_allocate(pair, 1024, bad), std::invalid_argument);
}

TEST_CASE("allocations round-trip through the file format") {
    TempDir dir("alloc");
    std::vector<RecoveryCurve> curves = {ramp_curve(0, 4096, 256, 64),
                                         ramp_curve(1, 4096, 4096, 64)};
    AllocatorConfig config;
    const auto alloc = maxmin_allocate(curves, 2048, config);
    const std::string path = dir.file("allocation.json");
    save_allocation(path, alloc);
    const auto loaded = load_allocation(path);
    CHECK(loaded.budgets == alloc.budgets);
    CHECK(loaded.total == alloc.total);
    CHECK(loaded.floor == alloc.floor);
    CHECK(loaded.heads.size() == alloc.heads.size());

    // Strictness.
    {
        std::ofstream out(dir.file("bad_total.json"));
        out << R"({"version":1,"total":100,"floor":0,
                   "budgets":[{"layer":0,"head":0,"budget":60}]})";
    }
    CHECK_THROWS_WITH_AS(load_allocation(dir.file("bad_total.json")),
                         doctest::Contains("sum to 60"), std::runtime_error);
    {
        std::ofstream out(dir.file("below_floor.json"));
        out << R"({"version":1,"total":60,"floor":64,
                   "budgets":[{"layer":0,"head":0,"budget":60}]})";
    }
    CHECK_THROWS_WITH_AS(load_allocation(dir.file("below_floor.json")),
                         doctest::Contains("below the floor"), std::runtime_error);
    {
        std::ofstream out(dir.file("unknown.json"));
        out << R"({"version":1,"total":60,"floor":0,"notes":"x",
                   "budgets":[{"layer":0,"head":0,"budget":60}]})";
    }
    CHECK_THROWS_WITH_AS(load_allocation(dir.file("unknown.json")),
                         doctest::Contains("unknown field"), std::runtime_error);
}
