#pragma once

#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "headbal/simulator.hpp"

namespace headbal {

// Bad or inconsistent configuration; the CLI maps this to exit status 2.
// Runtime/feasibility failures surface as other exceptions (exit status 3).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ExperimentConfig {
    // Workload source: synthetic spec, or a profile file for the commands
    // that only need curves.
    std::optional<SyntheticWorkloadSpec> workload;
    std::string profile_file;

    std::optional<std::uint64_t> seed;  // mandatory for synthetic runs

    long total_budget = 0;  // 0: budget_fraction of N * n_k
    double budget_fraction = 0.25;
    std::vector<long> budget_sweep;  // skyline; empty: {25,50,75,100}% of full
    long floor = 128;
    long delta = 64;
    double top_p = 0.9;

    AllocatorKind allocator = AllocatorKind::MaxMin;
    AssignerKind assigner = AssignerKind::Greedy;
    std::vector<int> devices = {4};
    std::vector<long> context_lengths;  // sweep only

    CostModel cost_model;
    SelectionKind policy = SelectionKind::PerQueryTopK;
    long grid_stride = 0;  // 0: delta
    std::string out_dir = ".";
    std::string allocation_file;  // optional input for partition

    void validate() const;  // throws ConfigError
};

// Strict JSON config loader (unknown keys rejected).
ExperimentConfig load_config(const std::string& path);

// Flag overrides; only set fields win over the config file.
struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::vector<int>> devices;
    std::optional<long> total_budget;
    std::optional<long> floor;
    std::optional<long> delta;
    std::optional<std::string> policy;
    std::optional<std::string> allocator;
    std::optional<std::string> assigner;
    std::optional<double> alpha;
    std::optional<double> beta;
};

void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides);

// Skyline measurement for one (total budget, allocator) pair. The CSV keeps
// the greedy-placement barrier latency; the naive one is kept for analysis.
struct SkylinePoint {
    long total_budget = 0;
    std::string allocator;
    double mean_output_error = 0.0;
    double barrier_latency = 0.0;        // greedy placement
    double naive_barrier_latency = 0.0;  // not serialized
};

std::vector<SkylinePoint> run_skyline(const ExperimentConfig& config);

// Header: total_budget,allocator,mean_output_error,barrier_latency
void write_skyline_csv(std::ostream& out, const std::vector<SkylinePoint>& rows);

// Subcommands. Result files land in config.out_dir (which must exist);
// human-readable summaries go to `log`.
void cmd_profile(const ExperimentConfig& config, std::ostream& log);    // profiles.json
void cmd_allocate(const ExperimentConfig& config, std::ostream& log);   // allocation.json
void cmd_partition(const ExperimentConfig& config, std::ostream& log);  // assignment.json
void cmd_skyline(const ExperimentConfig& config, std::ostream& log);    // skyline.csv
void cmd_sweep(const ExperimentConfig& config, std::ostream& log);      // sweep.csv

// Runs a subcommand by name and maps exceptions to the exit-status
// contract: 0 success, 2 config error, 3 runtime/feasibility error.
int dispatch(const std::string& command, const ExperimentConfig& config, std::ostream& log,
             std::ostream& err);

}  // namespace headbal
