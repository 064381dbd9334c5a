#include "headbal/allocator.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json_util.hpp"

namespace headbal {

std::string to_string(AllocatorKind kind) {
    switch (kind) {
        case AllocatorKind::Uniform: return "uniform";
        case AllocatorKind::MaxMin: return "maxmin";
        case AllocatorKind::OracleTopP: return "oracle_topp";
    }
    return "uniform";
}

AllocatorKind allocator_kind_from_string(const std::string& name) {
    if (name == "uniform") return AllocatorKind::Uniform;
    if (name == "maxmin") return AllocatorKind::MaxMin;
    if (name == "oracle_topp") return AllocatorKind::OracleTopP;
    throw std::invalid_argument("unknown allocator \"" + name +
                                "\" (expected uniform, maxmin or oracle_topp)");
}

void BudgetAllocation::validate(long context_length) const {
    if (heads.size() != budgets.size() || heads.empty()) {
        throw std::invalid_argument("allocation must pair every head with a budget");
    }
    long sum = 0;
    for (long b : budgets) {
        if (b < floor) throw std::invalid_argument("budget below the floor");
        if (b > context_length) throw std::invalid_argument("budget above the context length");
        sum += b;
    }
    if (sum != total) {
        throw std::invalid_argument("budgets sum to " + std::to_string(sum) + ", expected " +
                                    std::to_string(total));
    }
}

void AllocatorConfig::validate() const {
    if (quantum < 1) throw std::invalid_argument("transfer quantum must be >= 1");
    if (floor < 0) throw std::invalid_argument("budget floor must be >= 0");
    if (max_iterations < 0) throw std::invalid_argument("max_iterations must be >= 0");
}

namespace {

void check_feasible(long num_heads, long total, long floor, long context_length) {
    const long lo = num_heads * floor;
    const long hi = num_heads * context_length;
    if (total < lo || total > hi) {
        throw std::invalid_argument("total budget " + std::to_string(total) +
                                    " infeasible for " + std::to_string(num_heads) +
                                    " heads; feasible range is [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + "]");
    }
}

std::vector<HeadId> default_ids(long num_heads) {
    std::vector<HeadId> ids(static_cast<std::size_t>(num_heads));
    for (std::size_t h = 0; h < ids.size(); ++h) ids[h] = HeadId{0, static_cast<int>(h)};
    return ids;
}

}  // namespace

BudgetAllocation uniform_allocate(const std::vector<HeadId>& heads, long total, long floor,
                                  long context_length) {
    const auto n = static_cast<long>(heads.size());
    if (n < 1) throw std::invalid_argument("need at least one head");
    check_feasible(n, total, floor, context_length);

    BudgetAllocation alloc;
    alloc.heads = heads;
    alloc.total = total;
    alloc.floor = floor;
    const long base = total / n;
    const long remainder = total % n;
    alloc.budgets.resize(heads.size());
    for (long h = 0; h < n; ++h) {
        alloc.budgets[static_cast<std::size_t>(h)] = base + (h < remainder ? 1 : 0);
    }
    alloc.min_recovery_trace.clear();
    alloc.validate(context_length);
    return alloc;
}

BudgetAllocation uniform_allocate(long num_heads, long total, long floor, long context_length) {
    return uniform_allocate(default_ids(num_heads), total, floor, context_length);
}

BudgetAllocation maxmin_allocate(const std::vector<RecoveryCurve>& curves, long total,
                                 const AllocatorConfig& config) {
    config.validate();
    if (curves.empty()) throw std::invalid_argument("need at least one recovery curve");
    for (const auto& curve : curves) {
        curve.validate();
        if (curve.context_length != curves[0].context_length) {
            throw std::invalid_argument("all curves must share the context length");
        }
    }
    const auto n = static_cast<long>(curves.size());
    const long n_k = curves[0].context_length;

    std::vector<HeadId> ids;
    ids.reserve(curves.size());
    for (const auto& curve : curves) ids.push_back(curve.id);

    BudgetAllocation alloc = uniform_allocate(ids, total, config.floor, n_k);

    auto recovery = [&](std::size_t h, long budget) {
        if (!curves[h].sampled_at(budget)) ++alloc.off_grid_evaluations;
        return curves[h].recovery_at(budget);
    };

    std::vector<double> r(curves.size());
    for (std::size_t h = 0; h < curves.size(); ++h) r[h] = recovery(h, alloc.budgets[h]);

    long max_iterations = config.max_iterations;
    if (max_iterations == 0) {
        max_iterations = std::max<long>(1, 10 * n * n_k / config.quantum);
    }

    alloc.min_recovery_trace.push_back(*std::min_element(r.begin(), r.end()));

    long iteration = 0;
    for (; iteration < max_iterations; ++iteration) {
        // Recipient: lowest current recovery, ties toward the lower index.
        std::size_t recipient = 0;
        for (std::size_t h = 1; h < r.size(); ++h) {
            if (r[h] < r[recipient]) recipient = h;
        }
        const double current_min = r[recipient];

        // Never push the recipient past the full context.
        const long amount = std::min(config.quantum, n_k - alloc.budgets[recipient]);
        if (amount == 0) break;

        // Donor: highest recovery among heads that can give `amount`
        // without crossing the floor. None left ends the loop (all donors
        // at their lower bound).
        std::size_t donor = curves.size();
        for (std::size_t h = 0; h < r.size(); ++h) {
            if (h == recipient) continue;
            if (alloc.budgets[h] - amount < config.floor) continue;
            if (donor == curves.size() || r[h] > r[donor]) donor = h;
        }
        if (donor == curves.size()) break;

        const BudgetTransfer transfer{static_cast<int>(donor), static_cast<int>(recipient),
                                      r[donor], r[recipient], amount};

        alloc.budgets[donor] -= amount;
        alloc.budgets[recipient] += amount;
        const double new_donor_r = recovery(donor, alloc.budgets[donor]);
        const double new_recipient_r = recovery(recipient, alloc.budgets[recipient]);

        double new_min = std::numeric_limits<double>::infinity();
        for (std::size_t h = 0; h < r.size(); ++h) {
            const double rh = h == donor ? new_donor_r : h == recipient ? new_recipient_r : r[h];
            new_min = std::min(new_min, rh);
        }

        // The shift must strictly raise the worst head, otherwise further
        // reallocation yields no benefit.
        if (!(new_min > current_min)) {
            alloc.budgets[donor] += amount;
            alloc.budgets[recipient] -= amount;
            break;
        }

        r[donor] = new_donor_r;
        r[recipient] = new_recipient_r;
        alloc.transfers.push_back(transfer);
        alloc.min_recovery_trace.push_back(new_min);
    }
    alloc.hit_iteration_cap = iteration == max_iterations;

    alloc.validate(n_k);
    return alloc;
}

BudgetAllocation oracle_topp_allocate(const std::vector<RecoveryCurve>& curves, double p) {
    if (curves.empty()) throw std::invalid_argument("need at least one recovery curve");
    BudgetAllocation alloc;
    alloc.floor = 0;
    for (const auto& curve : curves) {
        const long b = budget_for_recovery(curve, p);
        alloc.heads.push_back(curve.id);
        alloc.budgets.push_back(b);
        alloc.total += b;
    }
    return alloc;
}

double min_recovery(const std::vector<RecoveryCurve>& curves, const std::vector<long>& budgets) {
    if (curves.size() != budgets.size() || curves.empty()) {
        throw std::invalid_argument("curves and budgets must pair up");
    }
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < curves.size(); ++h) {
        worst = std::min(worst, curves[h].recovery_at(budgets[h]));
    }
    return worst;
}

double mean_recovery(const std::vector<RecoveryCurve>& curves, const std::vector<long>& budgets) {
    if (curves.size() != budgets.size() || curves.empty()) {
        throw std::invalid_argument("curves and budgets must pair up");
    }
    double sum = 0.0;
    for (std::size_t h = 0; h < curves.size(); ++h) {
        sum += curves[h].recovery_at(budgets[h]);
    }
    return sum / static_cast<double>(curves.size());
}

void save_allocation(const std::string& path, const BudgetAllocation& allocation) {
    if (allocation.heads.size() != allocation.budgets.size() || allocation.heads.empty()) {
        throw std::invalid_argument("allocation must pair every head with a budget");
    }
    jsonutil::json j;
    j["version"] = 1;
    j["total"] = allocation.total;
    j["floor"] = allocation.floor;
    auto& arr = j["budgets"] = jsonutil::json::array();
    for (std::size_t h = 0; h < allocation.heads.size(); ++h) {
        arr.push_back({{"layer", allocation.heads[h].layer},
                       {"head", allocation.heads[h].head},
                       {"budget", allocation.budgets[h]}});
    }
    jsonutil::write_file(path, j);
}

BudgetAllocation load_allocation(const std::string& path) {
    using jsonutil::json;
    const json j = jsonutil::parse_file(path);
    jsonutil::expect_keys(j, path, {"version", "total", "floor", "budgets"});
    jsonutil::require_version_1(j, path);

    BudgetAllocation alloc;
    alloc.total = jsonutil::require_int(j, path, "total");
    alloc.floor = jsonutil::require_int(j, path, "floor");

    const json& arr = jsonutil::require(j, path, "budgets");
    if (!arr.is_array() || arr.empty()) {
        throw std::runtime_error(path + ".budgets: expected a nonempty array");
    }
    long sum = 0;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string where = path + ".budgets[" + std::to_string(i) + "]";
        jsonutil::expect_keys(arr[i], where, {"layer", "head", "budget"});
        HeadId id;
        id.layer = static_cast<int>(jsonutil::require_int(arr[i], where, "layer"));
        id.head = static_cast<int>(jsonutil::require_int(arr[i], where, "head"));
        const long b = jsonutil::require_int(arr[i], where, "budget");
        if (b < alloc.floor) {
            throw std::runtime_error(where + ": budget " + std::to_string(b) +
                                     " below the floor " + std::to_string(alloc.floor));
        }
        alloc.heads.push_back(id);
        alloc.budgets.push_back(b);
        sum += b;
    }
    if (sum != alloc.total) {
        throw std::runtime_error(path + ": budgets sum to " + std::to_string(sum) +
                                 " but total says " + std::to_string(alloc.total));
    }
    return alloc;
}

}  // namespace headbal
