#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "headbal/profiler.hpp"
#include "headbal/reference.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace headbal;
using testutil::TempDir;

namespace {

SyntheticWorkloadSpec basic_spec(std::uint64_t seed, long heads, long n_k, double exp_min,
                                 double exp_max, double sigma = 0.0) {
    SyntheticWorkloadSpec spec;
    spec.num_heads = heads;
    spec.context_length = n_k;
    spec.num_queries = 4;
    spec.head_dim = 16;
    spec.exponent_min = exp_min;
    spec.exponent_max = exp_max;
    spec.noise_sigma = sigma;
    spec.seed = seed;
    return spec;
}

const Provenance kProv{"test-request", "unit"};

// Curve reaching target recovery at exactly `budget`.
RecoveryCurve step_curve(int head, long n_k, long budget) {
    RecoveryCurve curve;
    curve.id = {0, head};
    curve.context_length = n_k;
    curve.points = {{0, 0.0}, {budget, 0.95}, {n_k, 1.0}};
    return curve;
}

std::vector<HeadProfile> as_profiles(const std::vector<RecoveryCurve>& curves,
                                     const std::string& request) {
    std::vector<HeadProfile> out;
    for (const auto& c : curves) {
        out.push_back({c, {request, "unit"}, SelectionKind::PerQueryTopK});
    }
    return out;
}

}  // namespace

TEST_CASE("uniform heads profile to the straight line") {
    AttentionWorkload w;
    for (int h = 0; h < 3; ++h) {
        HeadData head;
        head.Q = Matrix(2, 4, 0.0);  // zero scores -> uniform weights
        head.K = testutil::random_head(h + 1, 2, 8, 4).K;
        head.V = testutil::random_head(h + 50, 2, 8, 4).V;
        w.heads.push_back(head);
    }
    const auto profiles = build_profiles(w, {0, 4, 8}, SelectionKind::PerQueryTopK, kProv);
    REQUIRE(profiles.size() == 3);
    for (const auto& p : profiles) {
        REQUIRE(p.curve.points.size() == 3);
        CHECK(p.curve.points[0].recovery == 0.0);
        CHECK(p.curve.points[1].recovery == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(p.curve.points[2].recovery == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("one-hot and uniform heads hit the extreme endpoints") {
    Matrix hot_scores(2, 8, 0.0);
    hot_scores(0, 3) = 60.0;
    hot_scores(1, 5) = 60.0;
    AttentionWorkload w;
    w.heads.push_back(testutil::head_from_scores(hot_scores));
    HeadData uniform;
    uniform.Q = Matrix(2, 2, 0.0);
    uniform.K = testutil::random_head(3, 2, 8, 2).K;
    uniform.V = testutil::random_head(4, 2, 8, 2).V;
    w.heads.push_back(uniform);

    const auto profiles = build_profiles(w, {1, 8}, SelectionKind::PerQueryTopK, kProv);
    CHECK(profiles[0].curve.points[0].recovery == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(profiles[1].curve.points[0].recovery == doctest::Approx(1.0 / 8.0).epsilon(1e-9));
    CHECK(profiles[0].curve.points[1].recovery == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(profiles[1].curve.points[1].recovery == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sparser exponent dominates at every interior grid point") {
    const auto sparse_profiles =
        build_profiles(generate_workload(basic_spec(11, 1, 256, 2.0, 2.0)), {0, 16, 64, 128, 256},
                       SelectionKind::PerQueryTopK, kProv);
    const auto dense_profiles =
        build_profiles(generate_workload(basic_spec(11, 1, 256, 0.5, 0.5)), {0, 16, 64, 128, 256},
                       SelectionKind::PerQueryTopK, kProv);
    for (std::size_t i = 1; i + 1 < sparse_profiles[0].curve.points.size(); ++i) {
        CHECK(sparse_profiles[0].curve.points[i].recovery >
              dense_profiles[0].curve.points[i].recovery);
    }

    // Independent check of one interior point via the sort-based oracle.
    const auto w = generate_workload(basic_spec(11, 1, 256, 2.0, 2.0));
    const auto weights = dense_attention(w.heads[0]).weights;
    CHECK(sparse_profiles[0].curve.points[2].recovery ==
          doctest::Approx(oracles::recovery_oracle(weights, 64, SelectionKind::PerQueryTopK))
              .epsilon(1e-12));
}

TEST_CASE("grid validation rejects bad grids") {
    const auto w = generate_workload(basic_spec(1, 2, 32, 1.0, 1.0));
    CHECK_THROWS_WITH_AS(build_profiles(w, {0, 16}, SelectionKind::PerQueryTopK, kProv),
                         doctest::Contains("full context"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_profiles(w, {0, 48}, SelectionKind::PerQueryTopK, kProv),
                         doctest::Contains("out of [0"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_profiles(w, {16, 16, 32}, SelectionKind::PerQueryTopK, kProv),
                         doctest::Contains("strictly increasing"), std::invalid_argument);
    CHECK_THROWS_AS(build_profiles(w, {0, 32}, SelectionKind::PerQueryTopK, {"", ""}),
                    std::invalid_argument);
}

TEST_CASE("budget_for_recovery walks the sampled grid") {
    RecoveryCurve uniform;
    uniform.id = {0, 0};
    uniform.context_length = 1024;
    for (long k = 0; k <= 1024; ++k) {
        uniform.points.push_back({k, static_cast<double>(k) / 1024.0});
    }
    CHECK(budget_for_recovery(uniform, 0.9) == 922);
    CHECK(budget_for_recovery(uniform, 1.0) == 1024);

    RecoveryCurve onehot;
    onehot.id = {0, 1};
    onehot.context_length = 1024;
    onehot.points = {{1, 1.0}, {1024, 1.0}};
    CHECK(budget_for_recovery(onehot, 0.9) == 1);

    CHECK_THROWS_AS(budget_for_recovery(uniform, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(budget_for_recovery(uniform, 1.5), std::invalid_argument);
}

TEST_CASE("budget_for_recovery matches the prefix-sum scan oracle") {
    const auto w = generate_workload(basic_spec(23, 1, 128, 2.0, 2.0));
    const Matrix weights = dense_attention(w.heads[0]).weights;
    std::vector<long> grid;
    for (long k = 0; k <= 128; ++k) grid.push_back(k);
    const auto profiles = build_profiles(w, grid, SelectionKind::PerQueryTopK, kProv);
    CHECK(budget_for_recovery(profiles[0].curve, 0.9) ==
          oracles::budget_scan_oracle(weights, 0.9));
}

TEST_CASE("recovery_at floors to the nearest sampled point") {
    RecoveryCurve curve;
    curve.id = {0, 0};
    curve.context_length = 100;
    curve.points = {{10, 0.4}, {50, 0.8}, {100, 1.0}};
    CHECK(curve.recovery_at(5) == 0.0);
    CHECK(curve.recovery_at(10) == 0.4);
    CHECK(curve.recovery_at(49) == 0.4);
    CHECK(curve.recovery_at(50) == 0.8);
    CHECK(curve.recovery_at(100) == 1.0);
    CHECK(curve.sampled_at(50));
    CHECK(!curve.sampled_at(51));
}

TEST_CASE("stability is 1 for identical and for rescaled requests") {
    std::vector<RecoveryCurve> base = {step_curve(0, 1024, 64), step_curve(1, 1024, 256),
                                       step_curve(2, 1024, 512)};
    const auto group = as_profiles(base, "req-a");
    CHECK(stability_score({group, group, group}, 0.9) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<RecoveryCurve> doubled = {step_curve(0, 2048, 128), step_curve(1, 2048, 512),
                                          step_curve(2, 2048, 1024)};
    const auto scaled = as_profiles(doubled, "req-b");
    CHECK(stability_score({group, scaled}, 0.9) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stability_score({group, scaled}, 0.9, BudgetNormalization::Sum) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stability matches an independent correlation implementation") {
    std::vector<std::vector<HeadProfile>> groups;
    std::vector<std::vector<double>> vectors;
    for (std::uint64_t req = 0; req < 3; ++req) {
        auto spec = basic_spec(99, 8, 256, 0.3, 2.5, 0.05);
        spec.request_id = req;
        const auto w = generate_workload(spec);
        auto profiles = build_profiles(w, default_budget_grid(256, 4),
                                       SelectionKind::PerQueryTopK, kProv);
        std::vector<double> budgets;
        for (const auto& p : profiles) {
            budgets.push_back(static_cast<double>(budget_for_recovery(p.curve, 0.9)));
        }
        const double mx = *std::max_element(budgets.begin(), budgets.end());
        for (auto& b : budgets) b /= mx;
        vectors.push_back(budgets);
        groups.push_back(std::move(profiles));
    }
    double expected = 1.0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (std::size_t j = i + 1; j < vectors.size(); ++j) {
            expected = std::min(expected, oracles::pearson_second_path(vectors[i], vectors[j]));
        }
    }
    CHECK(stability_score(groups, 0.9) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("stability rejects degenerate and mismatched groups") {
    std::vector<RecoveryCurve> flat = {step_curve(0, 64, 16), step_curve(1, 64, 16)};
    const auto degenerate = as_profiles(flat, "flat-request");
    std::vector<RecoveryCurve> varied = {step_curve(0, 64, 8), step_curve(1, 64, 32)};
    const auto good = as_profiles(varied, "ok-request");

    CHECK_THROWS_WITH_AS(stability_score({good, degenerate}, 0.9),
                         doctest::Contains("flat-request"), std::invalid_argument);
    CHECK_THROWS_AS(stability_score({good}, 0.9), std::invalid_argument);

    std::vector<RecoveryCurve> other = {step_curve(0, 64, 8), step_curve(5, 64, 32)};
    CHECK_THROWS_WITH_AS(stability_score({good, as_profiles(other, "req-x")}, 0.9),
                         doctest::Contains("head set"), std::invalid_argument);
}

TEST_CASE("near-flat exponents give the uniform recovery line") {
    const auto w = generate_workload(basic_spec(31, 2, 64, 1e-9, 1e-9));
    const auto weights = dense_attention(w.heads[0]).weights;
    for (long k : {8L, 16L, 32L, 64L}) {
        CHECK(std::fabs(recovery_ratio(weights, k, SelectionKind::PerQueryTopK) -
                        static_cast<double>(k) / 64.0) < 1e-6);
    }
}

TEST_CASE("exponent-2 head matches the closed-form partial sums") {
    const auto w = generate_workload(basic_spec(17, 1, 1024, 2.0, 2.0));
    const auto weights = dense_attention(w.heads[0]).weights;
    double partial = 0.0, total = 0.0;
    for (long i = 1; i <= 1024; ++i) {
        const double term = 1.0 / (static_cast<double>(i) * static_cast<double>(i));
        total += term;
        if (i <= 10) partial += term;
    }
    CHECK(std::fabs(recovery_ratio(weights, 10, SelectionKind::PerQueryTopK) - partial / total) <
          1e-6);
}

TEST_CASE("workload generation is deterministic and request-splittable") {
    const auto spec = basic_spec(5, 3, 64, 0.3, 2.5, 0.1);
    const auto a = generate_workload(spec);
    const auto b = generate_workload(spec);
    for (std::size_t h = 0; h < a.heads.size(); ++h) {
        CHECK(a.heads[h].Q.data == b.heads[h].Q.data);
        CHECK(a.heads[h].K.data == b.heads[h].K.data);
        CHECK(a.heads[h].V.data == b.heads[h].V.data);
    }

    auto other_request = spec;
    other_request.request_id = 7;
    CHECK(head_exponents(spec) == head_exponents(other_request));
    const auto c = generate_workload(other_request);
    CHECK(a.heads[0].K.data != c.heads[0].K.data);  // noise differs per request
}

TEST_CASE("generated curves satisfy the curve invariants") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto w = generate_workload(basic_spec(700 + seed, 4, 96, 0.3, 2.5, 0.2));
        for (SelectionKind kind :
             {SelectionKind::PerQueryTopK, SelectionKind::ColumnAggregateTopK}) {
            const auto profiles = build_profiles(w, default_budget_grid(96, 8), kind, kProv);
            for (const auto& p : profiles) CHECK_NOTHROW(p.validate());
        }
    }
}

TEST_CASE("heterogeneous exponents spread the 0.9-recovery budgets by over 2x") {
    const auto w = generate_workload(basic_spec(2024, 32, 1024, 0.3, 2.5));
    const auto profiles =
        build_profiles(w, default_budget_grid(1024, 8), SelectionKind::PerQueryTopK, kProv);
    long lo = 1 << 30, hi = 0;
    for (const auto& p : profiles) {
        const long b = budget_for_recovery(p.curve, 0.9);
        lo = std::min(lo, b);
        hi = std::max(hi, b);
    }
    CHECK(static_cast<double>(hi) / static_cast<double>(std::max(1L, lo)) > 2.0);
}

TEST_CASE("stability holds across context lengths with mild noise") {
    std::vector<std::vector<HeadProfile>> groups;
    std::uint64_t request = 0;
    for (long n_k : {256L, 512L, 1024L, 1024L}) {
        auto spec = basic_spec(909, 32, n_k, 0.3, 2.5, 0.1);
        spec.request_id = request++;
        const auto w = generate_workload(spec);
        groups.push_back(build_profiles(w, default_budget_grid(n_k, std::max(1L, n_k / 128)),
                                        SelectionKind::PerQueryTopK,
                                        {"req-" + std::to_string(request), "stability"}));
    }
    CHECK(stability_score(groups, 0.9) >= 0.9);
}

TEST_CASE("profile files round-trip exactly") {
    TempDir dir("profiles");
    const auto w = generate_workload(basic_spec(3, 3, 64, 0.3, 2.5, 0.05));
    const auto profiles =
        build_profiles(w, default_budget_grid(64, 8), SelectionKind::ColumnAggregateTopK,
                       {"roundtrip", "unit"});
    const std::string path = dir.file("profiles.json");
    save_profiles(path, profiles);
    const auto loaded = load_profiles(path);
    REQUIRE(loaded.size() == profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        CHECK(loaded[i].curve.id == profiles[i].curve.id);
        CHECK(loaded[i].curve.context_length == profiles[i].curve.context_length);
        CHECK(loaded[i].policy == profiles[i].policy);
        CHECK(loaded[i].provenance.request == profiles[i].provenance.request);
        CHECK(loaded[i].provenance.task == profiles[i].provenance.task);
        REQUIRE(loaded[i].curve.points.size() == profiles[i].curve.points.size());
        for (std::size_t k = 0; k < profiles[i].curve.points.size(); ++k) {
            CHECK(loaded[i].curve.points[k].budget == profiles[i].curve.points[k].budget);
            CHECK(loaded[i].curve.points[k].recovery == profiles[i].curve.points[k].recovery);
        }
    }
}

TEST_CASE("profile loader is strict") {
    TempDir dir("strict");

    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir.file(name));
        out << text;
        return dir.file(name);
    };

    const std::string minimal =
        R"({"version":1,"policy":"per_query_topk","context_length":4,
            "profiles":[{"layer":0,"head":0,"points":[[1,0.5],[4,1.0]],
                         "provenance":{"request":"r0","task":"t"}}]})";
    const auto profiles = load_profiles(write("ok.json", minimal));
    REQUIRE(profiles.size() == 1);
    CHECK(profiles[0].curve.points[0].budget == 1);
    CHECK(profiles[0].curve.points[0].recovery == 0.5);
    CHECK(profiles[0].policy == SelectionKind::PerQueryTopK);

    const std::string decreasing =
        R"({"version":1,"policy":"per_query_topk","context_length":4,
            "profiles":[{"layer":0,"head":0,"points":[[3,0.5],[2,0.7],[4,1.0]],
                         "provenance":{"request":"r0","task":"t"}}]})";
    CHECK_THROWS_WITH_AS(load_profiles(write("decreasing.json", decreasing)),
                         doctest::Contains("budgets not strictly increasing"),
                         std::runtime_error);

    const std::string unknown =
        R"({"version":1,"policy":"per_query_topk","context_length":4,"extra":true,
            "profiles":[{"layer":0,"head":0,"points":[[4,1.0]],
                         "provenance":{"request":"r0","task":"t"}}]})";
    CHECK_THROWS_WITH_AS(load_profiles(write("unknown.json", unknown)),
                         doctest::Contains("unknown field \"extra\""), std::runtime_error);

    const std::string missing =
        R"({"version":1,"policy":"per_query_topk","context_length":4,
            "profiles":[{"layer":0,"points":[[4,1.0]],
                         "provenance":{"request":"r0","task":"t"}}]})";
    CHECK_THROWS_WITH_AS(load_profiles(write("missing.json", missing)),
                         doctest::Contains("missing field \"head\""), std::runtime_error);

    const std::string badversion = R"({"version":2,"policy":"per_query_topk","context_length":4,
            "profiles":[]})";
    CHECK_THROWS_WITH_AS(load_profiles(write("badversion.json", badversion)),
                         doctest::Contains("version"), std::runtime_error);

    CHECK_THROWS_AS(load_profiles(dir.file("absent.json")), std::runtime_error);
}

TEST_CASE("save_profiles rejects mixed batches") {
    std::vector<HeadProfile> mixed =
        as_profiles({step_curve(0, 64, 16), step_curve(1, 64, 32)}, "req");
    mixed[1].policy = SelectionKind::ColumnAggregateTopK;
    TempDir dir("mixed");
    CHECK_THROWS_AS(save_profiles(dir.file("x.json"), mixed), std::invalid_argument);
}

TEST_CASE("default grid spans zero to the full context") {
    const auto grid = default_budget_grid(100, 32);
    CHECK(grid == std::vector<long>{0, 32, 64, 96, 100});
    const auto exact = default_budget_grid(64, 32);
    CHECK(exact == std::vector<long>{0, 32, 64});
}
