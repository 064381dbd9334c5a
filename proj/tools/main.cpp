#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "headbal/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"headbal: per-head sparsity budgeting and head-parallel load balancing"};
    app.require_subcommand(1);

    std::string config_path;
    headbal::CliOverrides overrides;

    std::uint64_t seed = 0;
    std::string out_dir, policy, allocator, assigner;
    std::vector<int> devices;
    long total_budget = 0, floor = 0, delta = 0;
    double alpha = 0.0, beta = 0.0;

    app.add_option("--config", config_path, "JSON experiment config file");
    auto* seed_opt = app.add_option("--seed", seed, "run seed (mandatory for synthetic runs)");
    auto* out_opt = app.add_option("--out", out_dir, "output directory (must exist)");
    auto* dev_opt = app.add_option("--devices", devices, "device count(s), e.g. 4 or 1,2,4,8")
                        ->delimiter(',');
    auto* budget_opt = app.add_option("--total-budget", total_budget, "total token budget B");
    auto* floor_opt = app.add_option("--floor", floor, "per-head budget lower bound");
    auto* delta_opt = app.add_option("--delta", delta, "budget transfer quantum");
    auto* policy_opt =
        app.add_option("--policy", policy, "per_query_topk | column_aggregate_topk");
    auto* alloc_opt = app.add_option("--allocator", allocator, "uniform | maxmin | oracle_topp");
    auto* assign_opt = app.add_option("--assigner", assigner, "naive | greedy | optimal");
    auto* alpha_opt = app.add_option("--alpha", alpha, "cost model fixed overhead");
    auto* beta_opt = app.add_option("--beta", beta, "cost model per-token cost");

    app.add_subcommand("profile", "build per-head recovery curves and write profiles.json");
    app.add_subcommand("allocate", "distribute the total budget and write allocation.json");
    app.add_subcommand("partition", "place heads on devices and write assignment.json");
    app.add_subcommand("skyline", "budget sweep of accuracy vs latency, writes skyline.csv");
    app.add_subcommand("sweep", "parallelism/context-length sweep, writes sweep.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are config errors
    }

    headbal::ExperimentConfig config;
    if (!config_path.empty()) {
        try {
            config = headbal::load_config(config_path);
        } catch (const headbal::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
    }

    if (seed_opt->count() > 0) overrides.seed = seed;
    if (out_opt->count() > 0) overrides.out_dir = out_dir;
    if (dev_opt->count() > 0) overrides.devices = devices;
    if (budget_opt->count() > 0) overrides.total_budget = total_budget;
    if (floor_opt->count() > 0) overrides.floor = floor;
    if (delta_opt->count() > 0) overrides.delta = delta;
    if (policy_opt->count() > 0) overrides.policy = policy;
    if (alloc_opt->count() > 0) overrides.allocator = allocator;
    if (assign_opt->count() > 0) overrides.assigner = assigner;
    if (alpha_opt->count() > 0) overrides.alpha = alpha;
    if (beta_opt->count() > 0) overrides.beta = beta;

    try {
        headbal::apply_overrides(config, overrides);
    } catch (const headbal::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    return headbal::dispatch(app.get_subcommands().front()->get_name(), config, std::cout,
                             std::cerr);
}
