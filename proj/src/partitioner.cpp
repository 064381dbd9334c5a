#include "headbal/partitioner.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>

#include "json_util.hpp"

namespace headbal {

std::string to_string(AssignerKind kind) {
    switch (kind) {
        case AssignerKind::Naive: return "naive";
        case AssignerKind::Greedy: return "greedy";
        case AssignerKind::Optimal: return "optimal";
    }
    return "greedy";
}

AssignerKind assigner_kind_from_string(const std::string& name) {
    if (name == "naive") return AssignerKind::Naive;
    if (name == "greedy") return AssignerKind::Greedy;
    if (name == "optimal") return AssignerKind::Optimal;
    throw std::invalid_argument("unknown assigner \"" + name +
                                "\" (expected naive, greedy or optimal)");
}

std::vector<std::vector<long>> Assignment::device_heads() const {
    std::vector<std::vector<long>> sets(static_cast<std::size_t>(num_devices));
    for (std::size_t h = 0; h < device_of_head.size(); ++h) {
        sets[static_cast<std::size_t>(device_of_head[h])].push_back(static_cast<long>(h));
    }
    return sets;
}

void Assignment::validate() const {
    if (num_devices < 1) throw std::invalid_argument("need at least one device");
    if (device_of_head.empty()) throw std::invalid_argument("assignment covers no heads");
    for (std::size_t h = 0; h < device_of_head.size(); ++h) {
        if (device_of_head[h] < 0 || device_of_head[h] >= num_devices) {
            throw std::invalid_argument("head " + std::to_string(h) +
                                        " assigned to invalid device " +
                                        std::to_string(device_of_head[h]));
        }
    }
}

namespace {

void check_budgets(const std::vector<long>& budgets) {
    if (budgets.empty()) throw std::invalid_argument("need at least one head");
    for (long b : budgets) {
        if (b < 0) throw std::invalid_argument("budgets must be nonnegative");
    }
}

// Head indices by (budget desc, index asc).
std::vector<std::size_t> descending_order(const std::vector<long>& budgets) {
    std::vector<std::size_t> order(budgets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (budgets[a] != budgets[b]) return budgets[a] > budgets[b];
        return a < b;
    });
    return order;
}

long max_load(const std::vector<long>& loads) {
    return *std::max_element(loads.begin(), loads.end());
}

// Branch and bound for the minimum achievable maximum load. `items` must be
// sorted descending. Explores devices with distinct loads only (placing an
// item on either of two equally loaded devices yields symmetric subtrees).
void min_makespan_dfs(const std::vector<long>& items, std::size_t rank, std::vector<long>& loads,
                      long current_max, long lower_bound, long& best) {
    if (current_max >= best) return;
    if (rank == items.size()) {
        best = current_max;
        return;
    }
    if (lower_bound >= best) return;
    const long item = items[rank];
    const long min_device = *std::min_element(loads.begin(), loads.end());
    if (min_device + item >= best) return;  // the item must land somewhere

    for (std::size_t d = 0; d < loads.size(); ++d) {
        bool tried = false;
        for (std::size_t e = 0; e < d; ++e) {
            if (loads[e] == loads[d]) {
                tried = true;
                break;
            }
        }
        if (tried) continue;
        loads[d] += item;
        min_makespan_dfs(items, rank + 1, loads, std::max(current_max, loads[d]), lower_bound,
                         best);
        loads[d] -= item;
    }
}

// Can items[rank..] be placed so that no device exceeds `cap`?
bool completable(const std::vector<long>& items, std::size_t rank, std::vector<long>& loads,
                 long cap) {
    if (rank == items.size()) return true;
    const long item = items[rank];
    for (std::size_t d = 0; d < loads.size(); ++d) {
        if (loads[d] + item > cap) continue;
        bool tried = false;
        for (std::size_t e = 0; e < d; ++e) {
            if (loads[e] == loads[d]) {
                tried = true;
                break;
            }
        }
        if (tried) continue;
        loads[d] += item;
        const bool ok = completable(items, rank + 1, loads, cap);
        loads[d] -= item;
        if (ok) return true;
    }
    return false;
}

}  // namespace

Assignment naive_assign(const std::vector<long>& budgets, int devices, NaiveOrder order) {
    check_budgets(budgets);
    const auto n = static_cast<long>(budgets.size());
    if (devices < 1) throw std::invalid_argument("need at least one device");
    if (devices > n) {
        throw std::invalid_argument("device count " + std::to_string(devices) +
                                    " exceeds head count " + std::to_string(n));
    }

    Assignment assignment;
    assignment.num_devices = devices;
    assignment.device_of_head.resize(budgets.size());

    if (order == NaiveOrder::RoundRobin) {
        for (long h = 0; h < n; ++h) {
            assignment.device_of_head[static_cast<std::size_t>(h)] =
                static_cast<int>(h % devices);
        }
        return assignment;
    }

    // Contiguous blocks; the first N mod D devices take the ceil-size block.
    const long base = n / devices;
    const long extra = n % devices;
    long next = 0;
    for (int d = 0; d < devices; ++d) {
        const long count = base + (d < extra ? 1 : 0);
        for (long i = 0; i < count; ++i) {
            assignment.device_of_head[static_cast<std::size_t>(next++)] = d;
        }
    }
    return assignment;
}

Assignment greedy_assign(const std::vector<long>& budgets, int devices) {
    check_budgets(budgets);
    if (devices < 1) throw std::invalid_argument("need at least one device");

    Assignment assignment;
    assignment.num_devices = devices;
    assignment.device_of_head.resize(budgets.size());

    using Slot = std::pair<long, int>;  // (load, device); min on load, then device index
    std::priority_queue<Slot, std::vector<Slot>, std::greater<Slot>> queue;
    for (int d = 0; d < devices; ++d) queue.emplace(0, d);

    for (std::size_t h : descending_order(budgets)) {
        auto [load, device] = queue.top();
        queue.pop();
        assignment.device_of_head[h] = device;
        queue.emplace(load + budgets[h], device);
    }
    return assignment;
}

Assignment optimal_assign(const std::vector<long>& budgets, int devices) {
    check_budgets(budgets);
    if (devices < 1) throw std::invalid_argument("need at least one device");
    const auto n = budgets.size();
    if (n > 24 || devices > 4) {
        throw std::invalid_argument(
            "exact solver is guarded to N <= 24 heads and 4 devices; use greedy_assign for "
            "larger instances");
    }

    const long total = std::accumulate(budgets.begin(), budgets.end(), 0L);
    const long lower_bound =
        std::max((total + devices - 1) / devices, *std::max_element(budgets.begin(), budgets.end()));

    std::vector<long> items;
    for (std::size_t h : descending_order(budgets)) items.push_back(budgets[h]);

    // Phase 1: the optimal maximum load, seeded with the greedy solution.
    const Assignment greedy = greedy_assign(budgets, devices);
    long best = max_load(imbalance(budgets, greedy).loads);
    if (best > lower_bound) {
        std::vector<long> loads(static_cast<std::size_t>(devices), 0);
        min_makespan_dfs(items, 0, loads, 0, lower_bound, best);
    }

    // Phase 2: lexicographically smallest device_of_head achieving it.
    // Fix heads in index order, trying devices in ascending order; a choice
    // sticks if the remaining heads can still finish under the cap.
    Assignment assignment;
    assignment.num_devices = devices;
    assignment.device_of_head.assign(n, -1);
    std::vector<long> loads(static_cast<std::size_t>(devices), 0);
    for (std::size_t h = 0; h < n; ++h) {
        std::vector<long> remaining(budgets.begin() + static_cast<long>(h) + 1, budgets.end());
        std::sort(remaining.begin(), remaining.end(), std::greater<long>());
        bool placed = false;
        for (int d = 0; d < devices && !placed; ++d) {
            if (loads[static_cast<std::size_t>(d)] + budgets[h] > best) continue;
            loads[static_cast<std::size_t>(d)] += budgets[h];
            if (completable(remaining, 0, loads, best)) {
                assignment.device_of_head[h] = d;
                placed = true;
            } else {
                loads[static_cast<std::size_t>(d)] -= budgets[h];
            }
        }
        if (!placed) throw std::logic_error("exact solver lost feasibility");  // unreachable
    }
    return assignment;
}

LoadReport imbalance(const std::vector<long>& budgets, const Assignment& assignment) {
    assignment.validate();
    if (assignment.device_of_head.size() != budgets.size()) {
        throw std::invalid_argument("assignment covers " +
                                    std::to_string(assignment.device_of_head.size()) +
                                    " heads but " + std::to_string(budgets.size()) +
                                    " budgets were given");
    }
    check_budgets(budgets);

    LoadReport report;
    report.loads.assign(static_cast<std::size_t>(assignment.num_devices), 0);
    for (std::size_t h = 0; h < budgets.size(); ++h) {
        report.loads[static_cast<std::size_t>(assignment.device_of_head[h])] += budgets[h];
        report.total += budgets[h];
    }
    long max = report.loads[0];
    report.argmax_device = 0;
    for (std::size_t d = 1; d < report.loads.size(); ++d) {
        if (report.loads[d] > max) {
            max = report.loads[d];
            report.argmax_device = static_cast<int>(d);
        }
    }
    // I = max / mean with mean = total / |D|, evaluated in double.
    report.imbalance = report.total == 0
                           ? 1.0
                           : static_cast<double>(max) * static_cast<double>(assignment.num_devices) /
                                 static_cast<double>(report.total);
    return report;
}

void save_assignment(const std::string& path, const Assignment& assignment,
                     const LoadReport& report, const std::vector<HeadId>& heads) {
    assignment.validate();
    if (heads.size() != assignment.device_of_head.size()) {
        throw std::invalid_argument("head identity list does not match the assignment");
    }
    jsonutil::json j;
    j["version"] = 1;
    j["devices"] = assignment.num_devices;
    auto& arr = j["assignment"] = jsonutil::json::array();
    for (std::size_t h = 0; h < heads.size(); ++h) {
        arr.push_back({{"layer", heads[h].layer},
                       {"head", heads[h].head},
                       {"device", assignment.device_of_head[h]}});
    }
    j["loads"] = report.loads;
    j["imbalance"] = report.imbalance;
    jsonutil::write_file(path, j);
}

LoadedAssignment load_assignment(const std::string& path) {
    using jsonutil::json;
    const json j = jsonutil::parse_file(path);
    jsonutil::expect_keys(j, path, {"version", "devices", "assignment", "loads", "imbalance"});
    jsonutil::require_version_1(j, path);

    LoadedAssignment loaded;
    loaded.assignment.num_devices = static_cast<int>(jsonutil::require_int(j, path, "devices"));

    const json& arr = jsonutil::require(j, path, "assignment");
    if (!arr.is_array() || arr.empty()) {
        throw std::runtime_error(path + ".assignment: expected a nonempty array");
    }
    std::set<std::pair<int, int>> seen;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string where = path + ".assignment[" + std::to_string(i) + "]";
        jsonutil::expect_keys(arr[i], where, {"layer", "head", "device"});
        HeadId id;
        id.layer = static_cast<int>(jsonutil::require_int(arr[i], where, "layer"));
        id.head = static_cast<int>(jsonutil::require_int(arr[i], where, "head"));
        if (!seen.insert({id.layer, id.head}).second) {
            throw std::runtime_error(where + ": head assigned twice");
        }
        loaded.heads.push_back(id);
        loaded.assignment.device_of_head.push_back(
            static_cast<int>(jsonutil::require_int(arr[i], where, "device")));
    }
    try {
        loaded.assignment.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path + ": " + e.what());
    }

    const json& loads = jsonutil::require(j, path, "loads");
    if (!loads.is_array() ||
        loads.size() != static_cast<std::size_t>(loaded.assignment.num_devices)) {
        throw std::runtime_error(path + ".loads: expected one entry per device");
    }
    for (const auto& l : loads) {
        if (!l.is_number_integer()) throw std::runtime_error(path + ".loads: expected integers");
        loaded.report.loads.push_back(l.get<long>());
        loaded.report.total += l.get<long>();
    }
    loaded.report.imbalance = jsonutil::require_number(j, path, "imbalance");
    if (loaded.report.imbalance < 1.0 - 1e-12) {
        throw std::runtime_error(path + ".imbalance: must be >= 1");
    }
    return loaded;
}

}  // namespace headbal
