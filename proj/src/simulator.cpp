#include "headbal/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <stdexcept>

#include "headbal/attention.hpp"

namespace headbal {

void CostModel::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw std::invalid_argument("cost model beta must be > 0");
    }
    if (alpha < 0.0 || !std::isfinite(alpha)) {
        throw std::invalid_argument("cost model alpha must be >= 0");
    }
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

SimulationResult simulate(const LoadReport& report, const CostModel& model) {
    model.validate();
    if (report.loads.empty()) throw std::invalid_argument("load report has no devices");

    SimulationResult result;
    result.device_latency.reserve(report.loads.size());
    double sum = 0.0;
    for (long load : report.loads) {
        const double t = model.alpha + model.beta * static_cast<double>(load);
        result.device_latency.push_back(t);
        sum += t;
    }
    result.barrier_latency =
        *std::max_element(result.device_latency.begin(), result.device_latency.end());
    const double mean = sum / static_cast<double>(report.loads.size());
    result.bubble_fraction =
        result.barrier_latency == 0.0 ? 0.0 : 1.0 - mean / result.barrier_latency;
    result.speedup = 1.0;
    return result;
}

std::vector<ComparisonRow> compare(
    const std::vector<std::pair<std::string, Assignment>>& assignments,
    const std::vector<long>& budgets, const CostModel& model) {
    if (assignments.empty()) throw std::invalid_argument("nothing to compare");
    for (const auto& [name, assignment] : assignments) {
        if (assignment.device_of_head.size() != budgets.size()) {
            throw std::invalid_argument("assignment \"" + name +
                                        "\" does not cover the given head set");
        }
    }

    std::vector<ComparisonRow> rows;
    double reference = 0.0;
    for (const auto& [name, assignment] : assignments) {
        const SimulationResult sim = simulate(imbalance(budgets, assignment), model);
        if (rows.empty()) reference = sim.barrier_latency;
        rows.push_back({name, sim.barrier_latency, sim.bubble_fraction,
                        sim.barrier_latency == 0.0 ? 1.0 : reference / sim.barrier_latency});
    }
    return rows;
}

namespace {

struct LengthState {
    std::vector<long> budgets;
};

// Budgets for one context length under the selected allocator.
LengthState allocate_for_length(const SweepOptions& options, long length) {
    SyntheticWorkloadSpec spec = options.base_spec;
    spec.context_length = length;

    long total = options.total_budget;
    if (total == 0) {
        total = std::lround(options.budget_fraction * static_cast<double>(spec.num_heads) *
                            static_cast<double>(length));
    }

    if (options.allocator == AllocatorKind::Uniform) {
        return {uniform_allocate(spec.num_heads, total, options.alloc_config.floor, length)
                    .budgets};
    }

    const AttentionWorkload workload = generate_workload(spec);
    const long stride = options.grid_stride > 0 ? options.grid_stride
                                                : options.alloc_config.quantum;
    const std::vector<HeadProfile> profiles =
        build_profiles(workload, default_budget_grid(length, stride), options.policy,
                       {"sweep-seed" + std::to_string(spec.seed), "synthetic"});
    std::vector<RecoveryCurve> curves;
    curves.reserve(profiles.size());
    for (const auto& p : profiles) curves.push_back(p.curve);

    if (options.allocator == AllocatorKind::OracleTopP) {
        return {oracle_topp_allocate(curves, options.top_p).budgets};
    }
    return {maxmin_allocate(curves, total, options.alloc_config).budgets};
}

}  // namespace

std::vector<SweepRow> sweep(const SweepOptions& options) {
    if (options.degrees.empty()) throw std::invalid_argument("sweep needs parallelism degrees");
    if (options.context_lengths.empty()) throw std::invalid_argument("sweep needs context lengths");
    for (int degree : options.degrees) {
        if (degree < 1) throw std::invalid_argument("parallelism degree must be >= 1");
    }
    options.cost_model.validate();

    std::map<long, LengthState> per_length;
    for (long length : options.context_lengths) {
        if (per_length.count(length) == 0) {
            per_length[length] = allocate_for_length(options, length);
        }
    }

    std::vector<SweepRow> rows;
    const std::string allocator_name = to_string(options.allocator);
    for (int degree : options.degrees) {
        for (long length : options.context_lengths) {
            const std::vector<long>& budgets = per_length[length].budgets;

            const Assignment naive = naive_assign(budgets, degree);
            const Assignment greedy = greedy_assign(budgets, degree);
            const LoadReport naive_report = imbalance(budgets, naive);
            const LoadReport greedy_report = imbalance(budgets, greedy);
            const SimulationResult naive_sim = simulate(naive_report, options.cost_model);
            const SimulationResult greedy_sim = simulate(greedy_report, options.cost_model);

            rows.push_back({degree, length, allocator_name, "naive", naive_sim.barrier_latency,
                            naive_sim.bubble_fraction, naive_report.imbalance, 1.0});
            rows.push_back({degree, length, allocator_name, "greedy", greedy_sim.barrier_latency,
                            greedy_sim.bubble_fraction, greedy_report.imbalance,
                            greedy_sim.barrier_latency == 0.0
                                ? 1.0
                                : naive_sim.barrier_latency / greedy_sim.barrier_latency});
        }
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "degree,context_length,allocator,assigner,barrier_latency,bubble_fraction,"
           "imbalance,speedup_vs_naive\n";
    for (const auto& row : rows) {
        out << row.degree << ',' << row.context_length << ',' << row.allocator << ','
            << row.assigner << ',' << format_double(row.barrier_latency) << ','
            << format_double(row.bubble_fraction) << ',' << format_double(row.imbalance) << ','
            << format_double(row.speedup_vs_naive) << '\n';
    }
}

}  // namespace headbal
