#include "headbal/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "headbal/rng.hpp"
#include "json_util.hpp"

namespace headbal {

namespace {

// RNG substream tags.
constexpr std::uint64_t kExponentStream = 0xA11Eull;
constexpr std::uint64_t kRequestStream = 0xB0B5ull;

constexpr double kCurveSlack = 1e-12;  // fp dust allowed on monotonicity and r <= 1
constexpr double kEndpointTol = 1e-9;

}  // namespace

void RecoveryCurve::validate() const {
    if (points.empty()) throw std::invalid_argument("curve has no points");
    if (context_length < 1) throw std::invalid_argument("curve context_length must be >= 1");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (p.budget < 0 || p.budget > context_length) {
            throw std::invalid_argument("budget out of [0, n_k] at points[" + std::to_string(i) +
                                        "]");
        }
        if (p.recovery < -kCurveSlack || p.recovery > 1.0 + kCurveSlack) {
            throw std::invalid_argument("recovery out of [0, 1] at points[" + std::to_string(i) +
                                        "]");
        }
        if (i > 0) {
            if (p.budget <= points[i - 1].budget) {
                throw std::invalid_argument("budgets not strictly increasing");
            }
            if (p.recovery < points[i - 1].recovery - kCurveSlack) {
                throw std::invalid_argument("recovery decreasing at points[" + std::to_string(i) +
                                            "]");
            }
        }
    }
    if (points.back().budget != context_length) {
        throw std::invalid_argument("final point must sample the full context (k = n_k)");
    }
    if (std::fabs(points.back().recovery - 1.0) > kEndpointTol) {
        throw std::invalid_argument("final recovery must be 1 within 1e-9");
    }
}

double RecoveryCurve::recovery_at(long budget) const {
    double r = 0.0;
    for (const auto& p : points) {
        if (p.budget > budget) break;
        r = p.recovery;
    }
    return r;
}

bool RecoveryCurve::sampled_at(long budget) const {
    return std::any_of(points.begin(), points.end(),
                       [budget](const CurvePoint& p) { return p.budget == budget; });
}

double RecoveryCurve::max_recovery() const {
    double r = 0.0;
    for (const auto& p : points) r = std::max(r, p.recovery);
    return r;
}

void HeadProfile::validate() const {
    curve.validate();
    if (provenance.request.empty()) throw std::invalid_argument("provenance request is empty");
    if (provenance.task.empty()) throw std::invalid_argument("provenance task is empty");
}

void SyntheticWorkloadSpec::validate() const {
    if (num_heads < 1) throw std::invalid_argument("num_heads must be >= 1");
    if (context_length < 1) throw std::invalid_argument("context_length must be >= 1");
    if (num_queries < 1) throw std::invalid_argument("num_queries must be >= 1");
    if (head_dim < 1) throw std::invalid_argument("head_dim must be >= 1");
    if (!(exponent_min > 0.0)) throw std::invalid_argument("exponent_min must be > 0");
    if (exponent_max < exponent_min) {
        throw std::invalid_argument("exponent range must satisfy min <= max");
    }
    if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");
}

std::vector<double> head_exponents(const SyntheticWorkloadSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, {kExponentStream}));
    std::vector<double> exponents(static_cast<std::size_t>(spec.num_heads));
    for (auto& s : exponents) s = rng.uniform(spec.exponent_min, spec.exponent_max);
    return exponents;
}

AttentionWorkload generate_workload(const SyntheticWorkloadSpec& spec) {
    spec.validate();
    if (spec.head_dim < spec.num_queries) {
        throw std::invalid_argument(
            "head_dim must be >= num_queries so dense attention can realize the target scores");
    }
    const auto n_q = static_cast<std::size_t>(spec.num_queries);
    const auto n_k = static_cast<std::size_t>(spec.context_length);
    const auto d = static_cast<std::size_t>(spec.head_dim);
    const std::vector<double> exponents = head_exponents(spec);

    AttentionWorkload workload;
    workload.heads.resize(static_cast<std::size_t>(spec.num_heads));

    for (std::size_t h = 0; h < workload.heads.size(); ++h) {
        Rng rng(derive_seed(spec.seed, {kRequestStream, spec.request_id, h}));
        const double s = exponents[h];

        // Per-row log-weights of the sorted target distribution; softmax of
        // these scores reproduces w_i ~ i^(-s) * exp(sigma * z).
        Matrix log_w(n_q, n_k);
        for (std::size_t q = 0; q < n_q; ++q) {
            for (std::size_t i = 0; i < n_k; ++i) {
                double lw = -s * std::log(static_cast<double>(i + 1));
                if (spec.noise_sigma > 0.0) lw += spec.noise_sigma * rng.normal();
                log_w(q, i) = lw;
            }
        }

        // One key permutation per head, shared by all query rows.
        std::vector<std::size_t> perm(n_k);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);

        Matrix scores(n_q, n_k);
        for (std::size_t q = 0; q < n_q; ++q) {
            for (std::size_t i = 0; i < n_k; ++i) scores(q, perm[i]) = log_w(q, i);
        }

        // Q = sqrt(d) * [I | 0], K's first n_q columns = scores^T, so that
        // Q K^T / sqrt(d) equals `scores` exactly.
        HeadData& head = workload.heads[h];
        head.Q = Matrix(n_q, d);
        const double root_d = std::sqrt(static_cast<double>(d));
        for (std::size_t q = 0; q < n_q; ++q) head.Q(q, q) = root_d;
        head.K = Matrix(n_k, d);
        for (std::size_t j = 0; j < n_k; ++j) {
            for (std::size_t q = 0; q < n_q; ++q) head.K(j, q) = scores(q, j);
        }
        head.V = Matrix(n_k, d);
        for (auto& v : head.V.data) v = rng.normal();
    }
    workload.validate();
    return workload;
}

std::vector<HeadProfile> build_profiles(const AttentionWorkload& workload,
                                        const std::vector<long>& budget_grid,
                                        SelectionKind policy, const Provenance& provenance,
                                        bool causal) {
    workload.validate();
    const long n_k = static_cast<long>(workload.context_length());
    if (budget_grid.empty()) throw std::invalid_argument("budget grid is empty");
    for (std::size_t i = 0; i < budget_grid.size(); ++i) {
        if (budget_grid[i] < 0 || budget_grid[i] > n_k) {
            throw std::invalid_argument("budget grid entry " + std::to_string(budget_grid[i]) +
                                        " out of [0, " + std::to_string(n_k) + "]");
        }
        if (i > 0 && budget_grid[i] <= budget_grid[i - 1]) {
            throw std::invalid_argument("budget grid must be strictly increasing");
        }
    }
    if (budget_grid.back() != n_k) {
        throw std::invalid_argument("budget grid must include the full context length");
    }
    if (provenance.request.empty() || provenance.task.empty()) {
        throw std::invalid_argument("profile provenance must be nonempty");
    }

    std::vector<HeadProfile> profiles(workload.num_heads());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t h = 0; h < workload.num_heads(); ++h) {
        const AttentionResult dense = dense_attention(workload.heads[h], causal);
        HeadProfile& profile = profiles[h];
        profile.curve.id = HeadId{0, static_cast<int>(h)};
        profile.curve.context_length = n_k;
        profile.curve.points.reserve(budget_grid.size());
        for (long k : budget_grid) {
            profile.curve.points.push_back({k, recovery_ratio(dense.weights, k, policy)});
        }
        profile.provenance = provenance;
        profile.policy = policy;
        profile.curve.validate();
    }
    return profiles;
}

long budget_for_recovery(const RecoveryCurve& curve, double p) {
    curve.validate();
    if (!(p > 0.0) || p > 1.0) {
        throw std::invalid_argument("recovery target p must lie in (0, 1], got " +
                                    std::to_string(p));
    }
    for (const auto& point : curve.points) {
        if (point.recovery >= p - kEndpointTol) return point.budget;
    }
    throw std::runtime_error("recovery target " + std::to_string(p) +
                             " exceeds curve maximum " + std::to_string(curve.max_recovery()));
}

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<double>(a.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    return cov / std::sqrt(var_a * var_b);
}

}  // namespace

double stability_score(const std::vector<std::vector<HeadProfile>>& request_groups, double p,
                       BudgetNormalization normalization) {
    if (request_groups.size() < 2) {
        throw std::invalid_argument("stability_score needs at least 2 calibration requests");
    }

    std::vector<std::vector<double>> vectors;
    std::vector<std::vector<HeadId>> id_sets;
    for (std::size_t g = 0; g < request_groups.size(); ++g) {
        const auto& group = request_groups[g];
        const std::string request_name =
            group.empty() || group[0].provenance.request.empty()
                ? "request #" + std::to_string(g)
                : group[0].provenance.request;
        if (group.empty()) throw std::invalid_argument(request_name + ": empty profile group");

        std::vector<std::size_t> order(group.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return group[x].curve.id < group[y].curve.id;
        });

        std::vector<double> budgets;
        std::vector<HeadId> ids;
        for (std::size_t idx : order) {
            group[idx].validate();
            budgets.push_back(static_cast<double>(budget_for_recovery(group[idx].curve, p)));
            ids.push_back(group[idx].curve.id);
        }
        if (g > 0 && ids != id_sets[0]) {
            throw std::invalid_argument(request_name +
                                        ": head set differs from the first request");
        }

        double denom = 0.0;
        if (normalization == BudgetNormalization::Max) {
            denom = *std::max_element(budgets.begin(), budgets.end());
        } else {
            denom = std::accumulate(budgets.begin(), budgets.end(), 0.0);
        }
        if (denom <= 0.0) {
            throw std::invalid_argument(request_name + ": budget vector cannot be normalized");
        }
        for (auto& b : budgets) b /= denom;

        const bool degenerate = std::all_of(budgets.begin(), budgets.end(), [&](double b) {
            return b == budgets[0];
        });
        if (degenerate) {
            throw std::invalid_argument(request_name +
                                        ": budget vector has zero variance, correlation undefined");
        }
        vectors.push_back(std::move(budgets));
        id_sets.push_back(std::move(ids));
    }

    double worst = 1.0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        for (std::size_t j = i + 1; j < vectors.size(); ++j) {
            worst = std::min(worst, pearson(vectors[i], vectors[j]));
        }
    }
    return worst;
}

void save_profiles(const std::string& path, const std::vector<HeadProfile>& profiles) {
    if (profiles.empty()) throw std::invalid_argument("no profiles to save");
    for (const auto& profile : profiles) profile.validate();
    for (const auto& profile : profiles) {
        if (profile.policy != profiles[0].policy ||
            profile.curve.context_length != profiles[0].curve.context_length) {
            throw std::invalid_argument(
                "profiles in one file must share the policy and context length");
        }
    }

    jsonutil::json j;
    j["version"] = 1;
    j["policy"] = to_string(profiles[0].policy);
    j["context_length"] = profiles[0].curve.context_length;
    auto& arr = j["profiles"] = jsonutil::json::array();
    for (const auto& profile : profiles) {
        jsonutil::json p;
        p["layer"] = profile.curve.id.layer;
        p["head"] = profile.curve.id.head;
        auto& points = p["points"] = jsonutil::json::array();
        for (const auto& point : profile.curve.points) {
            points.push_back(jsonutil::json::array({point.budget, point.recovery}));
        }
        p["provenance"] = {{"request", profile.provenance.request},
                           {"task", profile.provenance.task}};
        arr.push_back(std::move(p));
    }
    jsonutil::write_file(path, j);
}

std::vector<HeadProfile> load_profiles(const std::string& path) {
    using jsonutil::json;
    const json j = jsonutil::parse_file(path);
    jsonutil::expect_keys(j, path, {"version", "policy", "context_length", "profiles"});
    jsonutil::require_version_1(j, path);
    const SelectionKind policy =
        selection_kind_from_string(jsonutil::require_string(j, path, "policy"));
    const long context_length = jsonutil::require_int(j, path, "context_length");

    const json& arr = jsonutil::require(j, path, "profiles");
    if (!arr.is_array() || arr.empty()) {
        throw std::runtime_error(path + ".profiles: expected a nonempty array");
    }

    std::vector<HeadProfile> profiles;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string where = path + ".profiles[" + std::to_string(i) + "]";
        const json& p = arr[i];
        jsonutil::expect_keys(p, where, {"layer", "head", "points", "provenance"});

        HeadProfile profile;
        profile.policy = policy;
        profile.curve.id.layer = static_cast<int>(jsonutil::require_int(p, where, "layer"));
        profile.curve.id.head = static_cast<int>(jsonutil::require_int(p, where, "head"));
        profile.curve.context_length = context_length;

        const json& points = jsonutil::require(p, where, "points");
        if (!points.is_array()) throw std::runtime_error(where + ".points: expected an array");
        for (std::size_t k = 0; k < points.size(); ++k) {
            const json& pt = points[k];
            const std::string pt_where = where + ".points[" + std::to_string(k) + "]";
            if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number_integer() ||
                !pt[1].is_number()) {
                throw std::runtime_error(pt_where + ": expected [budget:int, recovery:number]");
            }
            profile.curve.points.push_back({pt[0].get<long>(), pt[1].get<double>()});
        }

        const json& prov = jsonutil::require(p, where, "provenance");
        jsonutil::expect_keys(prov, where + ".provenance", {"request", "task"});
        profile.provenance.request =
            jsonutil::require_string(prov, where + ".provenance", "request");
        profile.provenance.task = jsonutil::require_string(prov, where + ".provenance", "task");

        try {
            profile.validate();
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(where + ": " + e.what());
        }
        profiles.push_back(std::move(profile));
    }
    return profiles;
}

std::vector<long> default_budget_grid(long context_length, long stride) {
    if (context_length < 1) throw std::invalid_argument("context_length must be >= 1");
    if (stride < 1) throw std::invalid_argument("grid stride must be >= 1");
    std::vector<long> grid;
    for (long k = 0; k < context_length; k += stride) grid.push_back(k);
    grid.push_back(context_length);
    return grid;
}

}  // namespace headbal
