#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "headbal/allocator.hpp"
#include "headbal/partitioner.hpp"

namespace headbal {

// Affine per-device latency: t_d = alpha + beta * L_d.
struct CostModel {
    double alpha = 0.0;  // fixed overhead, ms
    double beta = 1.0;   // ms per token of budget

    void validate() const;
};

struct SimulationResult {
    std::vector<double> device_latency;
    double barrier_latency = 0.0;  // max_d t_d: downstream work waits for the slowest device
    double bubble_fraction = 0.0;  // 1 - mean(t_d)/T, in [0, 1)
    double speedup = 1.0;          // vs a reference result; 1 when standalone
};

SimulationResult simulate(const LoadReport& report, const CostModel& model);

struct ComparisonRow {
    std::string name;
    double barrier_latency = 0.0;
    double bubble_fraction = 0.0;
    double speedup = 1.0;  // first row's barrier latency / this row's
};

// Simulates each named assignment over the same budgets; speedups are
// relative to the first entry.
std::vector<ComparisonRow> compare(
    const std::vector<std::pair<std::string, Assignment>>& assignments,
    const std::vector<long>& budgets, const CostModel& model);

struct SweepRow {
    int degree = 1;
    long context_length = 0;
    std::string allocator;
    std::string assigner;  // "naive" or "greedy"
    double barrier_latency = 0.0;
    double bubble_fraction = 0.0;
    double imbalance = 1.0;
    double speedup_vs_naive = 1.0;
};

struct SweepOptions {
    std::vector<int> degrees;
    std::vector<long> context_lengths;
    SyntheticWorkloadSpec base_spec;  // context_length is overridden per row
    AllocatorKind allocator = AllocatorKind::MaxMin;
    long total_budget = 0;         // 0: use budget_fraction of N * n_k
    double budget_fraction = 0.25;
    AllocatorConfig alloc_config;
    double top_p = 0.9;
    SelectionKind policy = SelectionKind::PerQueryTopK;
    long grid_stride = 0;  // 0: alloc_config.quantum
    CostModel cost_model;
};

// For every (degree, context length): generate, profile, allocate, assign
// naive and greedy, simulate both. Two rows per pair, naive first.
std::vector<SweepRow> sweep(const SweepOptions& options);

// Header: degree,context_length,allocator,assigner,barrier_latency,
//         bubble_fraction,imbalance,speedup_vs_naive
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// Shortest round-trip decimal form of a double (used for all CSV output so
// files are byte-stable across runs).
std::string format_double(double value);

}  // namespace headbal
