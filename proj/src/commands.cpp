#include "headbal/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "headbal/attention.hpp"
#include "json_util.hpp"

namespace headbal {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
    if (devices.empty()) throw ConfigError("at least one device count is required");
    for (int d : devices) {
        if (d < 1) throw ConfigError("device counts must be >= 1");
    }
    if (floor < 0) throw ConfigError("floor must be >= 0");
    if (delta < 1) throw ConfigError("delta must be >= 1");
    if (!(top_p > 0.0) || top_p > 1.0) throw ConfigError("top_p must lie in (0, 1]");
    if (!(budget_fraction > 0.0) || budget_fraction > 1.0) {
        throw ConfigError("budget_fraction must lie in (0, 1]");
    }
    if (total_budget < 0) throw ConfigError("total_budget must be >= 0");
    if (grid_stride < 0) throw ConfigError("grid_stride must be >= 0");
    for (long b : budget_sweep) {
        if (b < 1) throw ConfigError("budget_sweep entries must be >= 1");
    }
    for (long l : context_lengths) {
        if (l < 1) throw ConfigError("context_lengths entries must be >= 1");
    }
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
    try {
        cost_model.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (workload) {
        if (!seed) throw ConfigError("a seed is mandatory for synthetic workloads");
        SyntheticWorkloadSpec spec = *workload;
        spec.seed = *seed;
        try {
            spec.validate();
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        if (total_budget > 0) {
            const long lo = spec.num_heads * floor;
            const long hi = spec.num_heads * spec.context_length;
            if (total_budget < lo || total_budget > hi) {
                throw ConfigError("total_budget " + std::to_string(total_budget) +
                                  " infeasible for the workload; feasible range is [" +
                                  std::to_string(lo) + ", " + std::to_string(hi) + "]");
            }
        }
    }
}

ExperimentConfig load_config(const std::string& path) {
    using jsonutil::json;
    json j;
    try {
        j = jsonutil::parse_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    try {
        jsonutil::expect_keys(j, path,
                              {"workload", "profile_file", "allocation_file", "seed",
                               "total_budget", "budget_fraction", "budget_sweep", "floor", "delta",
                               "top_p", "allocator", "assigner", "devices", "context_lengths",
                               "cost_model", "policy", "grid_stride", "out_dir"});

        ExperimentConfig config;
        if (j.contains("workload")) {
            const json& w = j["workload"];
            const std::string where = path + ".workload";
            jsonutil::expect_keys(w, where,
                                  {"heads", "context_length", "queries", "head_dim",
                                   "exponent_min", "exponent_max", "noise_sigma", "request_id"});
            SyntheticWorkloadSpec spec;
            spec.num_heads = jsonutil::require_int(w, where, "heads");
            spec.context_length = jsonutil::require_int(w, where, "context_length");
            if (w.contains("queries")) spec.num_queries = jsonutil::require_int(w, where, "queries");
            if (w.contains("head_dim")) spec.head_dim = jsonutil::require_int(w, where, "head_dim");
            if (w.contains("exponent_min")) {
                spec.exponent_min = jsonutil::require_number(w, where, "exponent_min");
            }
            if (w.contains("exponent_max")) {
                spec.exponent_max = jsonutil::require_number(w, where, "exponent_max");
            }
            if (w.contains("noise_sigma")) {
                spec.noise_sigma = jsonutil::require_number(w, where, "noise_sigma");
            }
            if (w.contains("request_id")) {
                spec.request_id = static_cast<std::uint64_t>(
                    jsonutil::require_int(w, where, "request_id"));
            }
            config.workload = spec;
        }
        if (j.contains("profile_file")) {
            config.profile_file = jsonutil::require_string(j, path, "profile_file");
        }
        if (j.contains("allocation_file")) {
            config.allocation_file = jsonutil::require_string(j, path, "allocation_file");
        }
        if (j.contains("seed")) {
            const json& s = j["seed"];
            if (s.is_number_unsigned()) {
                config.seed = s.get<std::uint64_t>();
            } else if (s.is_number_integer() && s.get<long long>() >= 0) {
                config.seed = static_cast<std::uint64_t>(s.get<long long>());
            } else {
                throw std::runtime_error(path + ".seed: expected a nonnegative integer");
            }
        }
        if (j.contains("total_budget")) {
            config.total_budget = jsonutil::require_int(j, path, "total_budget");
        }
        if (j.contains("budget_fraction")) {
            config.budget_fraction = jsonutil::require_number(j, path, "budget_fraction");
        }
        if (j.contains("budget_sweep")) {
            const json& arr = j["budget_sweep"];
            if (!arr.is_array()) throw std::runtime_error(path + ".budget_sweep: expected an array");
            for (const auto& b : arr) {
                if (!b.is_number_integer()) {
                    throw std::runtime_error(path + ".budget_sweep: expected integers");
                }
                config.budget_sweep.push_back(b.get<long>());
            }
        }
        if (j.contains("floor")) config.floor = jsonutil::require_int(j, path, "floor");
        if (j.contains("delta")) config.delta = jsonutil::require_int(j, path, "delta");
        if (j.contains("top_p")) config.top_p = jsonutil::require_number(j, path, "top_p");
        if (j.contains("allocator")) {
            config.allocator =
                allocator_kind_from_string(jsonutil::require_string(j, path, "allocator"));
        }
        if (j.contains("assigner")) {
            config.assigner =
                assigner_kind_from_string(jsonutil::require_string(j, path, "assigner"));
        }
        if (j.contains("devices")) {
            const json& d = j["devices"];
            config.devices.clear();
            if (d.is_number_integer()) {
                config.devices.push_back(d.get<int>());
            } else if (d.is_array()) {
                for (const auto& v : d) {
                    if (!v.is_number_integer()) {
                        throw std::runtime_error(path + ".devices: expected integers");
                    }
                    config.devices.push_back(v.get<int>());
                }
            } else {
                throw std::runtime_error(path + ".devices: expected an integer or array");
            }
        }
        if (j.contains("context_lengths")) {
            const json& arr = j["context_lengths"];
            if (!arr.is_array()) {
                throw std::runtime_error(path + ".context_lengths: expected an array");
            }
            for (const auto& v : arr) {
                if (!v.is_number_integer()) {
                    throw std::runtime_error(path + ".context_lengths: expected integers");
                }
                config.context_lengths.push_back(v.get<long>());
            }
        }
        if (j.contains("cost_model")) {
            const json& c = j["cost_model"];
            jsonutil::expect_keys(c, path + ".cost_model", {"alpha", "beta"});
            if (c.contains("alpha")) {
                config.cost_model.alpha = jsonutil::require_number(c, path + ".cost_model", "alpha");
            }
            if (c.contains("beta")) {
                config.cost_model.beta = jsonutil::require_number(c, path + ".cost_model", "beta");
            }
        }
        if (j.contains("policy")) {
            config.policy = selection_kind_from_string(jsonutil::require_string(j, path, "policy"));
        }
        if (j.contains("grid_stride")) {
            config.grid_stride = jsonutil::require_int(j, path, "grid_stride");
        }
        if (j.contains("out_dir")) config.out_dir = jsonutil::require_string(j, path, "out_dir");
        return config;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides) {
    if (overrides.seed) config.seed = *overrides.seed;
    if (overrides.out_dir) config.out_dir = *overrides.out_dir;
    if (overrides.devices) config.devices = *overrides.devices;
    if (overrides.total_budget) config.total_budget = *overrides.total_budget;
    if (overrides.floor) config.floor = *overrides.floor;
    if (overrides.delta) config.delta = *overrides.delta;
    try {
        if (overrides.policy) config.policy = selection_kind_from_string(*overrides.policy);
        if (overrides.allocator) {
            config.allocator = allocator_kind_from_string(*overrides.allocator);
        }
        if (overrides.assigner) config.assigner = assigner_kind_from_string(*overrides.assigner);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (overrides.alpha) config.cost_model.alpha = *overrides.alpha;
    if (overrides.beta) config.cost_model.beta = *overrides.beta;
}

namespace {

void ensure_out_dir(const ExperimentConfig& config) {
    if (!fs::is_directory(config.out_dir)) {
        throw ConfigError("output directory does not exist: " + config.out_dir);
    }
}

SyntheticWorkloadSpec spec_with_seed(const ExperimentConfig& config) {
    if (!config.workload) throw ConfigError("a synthetic workload spec is required");
    if (!config.seed) throw ConfigError("a seed is mandatory for synthetic workloads");
    SyntheticWorkloadSpec spec = *config.workload;
    spec.seed = *config.seed;
    return spec;
}

long grid_stride_of(const ExperimentConfig& config) {
    return config.grid_stride > 0 ? config.grid_stride : config.delta;
}

Provenance synthetic_provenance(const SyntheticWorkloadSpec& spec) {
    return {"synthetic-seed" + std::to_string(spec.seed) + "-req" +
                std::to_string(spec.request_id),
            "synthetic"};
}

// Profiles from the profile file when given, otherwise from a generated
// synthetic workload.
std::vector<HeadProfile> profiles_for(const ExperimentConfig& config) {
    if (!config.profile_file.empty()) return load_profiles(config.profile_file);
    const SyntheticWorkloadSpec spec = spec_with_seed(config);
    const AttentionWorkload workload = generate_workload(spec);
    return build_profiles(workload,
                          default_budget_grid(spec.context_length, grid_stride_of(config)),
                          config.policy, synthetic_provenance(spec));
}

std::vector<RecoveryCurve> curves_of(const std::vector<HeadProfile>& profiles) {
    std::vector<RecoveryCurve> curves;
    curves.reserve(profiles.size());
    for (const auto& p : profiles) curves.push_back(p.curve);
    return curves;
}

long derive_total_budget(const ExperimentConfig& config, long num_heads, long context_length) {
    if (config.total_budget > 0) return config.total_budget;
    return std::lround(config.budget_fraction * static_cast<double>(num_heads) *
                       static_cast<double>(context_length));
}

BudgetAllocation allocate_with(const ExperimentConfig& config,
                               const std::vector<RecoveryCurve>& curves) {
    const auto n = static_cast<long>(curves.size());
    const long n_k = curves[0].context_length;
    switch (config.allocator) {
        case AllocatorKind::Uniform: {
            std::vector<HeadId> ids;
            for (const auto& c : curves) ids.push_back(c.id);
            return uniform_allocate(ids, derive_total_budget(config, n, n_k), config.floor, n_k);
        }
        case AllocatorKind::OracleTopP:
            return oracle_topp_allocate(curves, config.top_p);
        case AllocatorKind::MaxMin:
        default: {
            AllocatorConfig ac;
            ac.quantum = config.delta;
            ac.floor = config.floor;
            return maxmin_allocate(curves, derive_total_budget(config, n, n_k), ac);
        }
    }
}

std::string out_path(const ExperimentConfig& config, const std::string& name) {
    return (fs::path(config.out_dir) / name).string();
}

}  // namespace

void cmd_profile(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    ensure_out_dir(config);
    const SyntheticWorkloadSpec spec = spec_with_seed(config);
    const AttentionWorkload workload = generate_workload(spec);
    const std::vector<HeadProfile> profiles =
        build_profiles(workload, default_budget_grid(spec.context_length, grid_stride_of(config)),
                       config.policy, synthetic_provenance(spec));
    const std::string path = out_path(config, "profiles.json");
    save_profiles(path, profiles);

    // Per-head budget to reach 90% recovery, normalized by the largest.
    std::vector<long> budgets;
    for (const auto& p : profiles) budgets.push_back(budget_for_recovery(p.curve, 0.9));
    const long max_budget = *std::max_element(budgets.begin(), budgets.end());
    const long min_budget = *std::min_element(budgets.begin(), budgets.end());

    log << "profiled " << profiles.size() << " heads at context length " << spec.context_length
        << " (policy " << to_string(config.policy) << ")\n";
    log << "budget required for recovery 0.9 per head:\n";
    for (std::size_t h = 0; h < profiles.size(); ++h) {
        log << "  layer=" << profiles[h].curve.id.layer << " head=" << profiles[h].curve.id.head
            << " budget=" << budgets[h] << " normalized="
            << format_double(static_cast<double>(budgets[h]) / static_cast<double>(max_budget))
            << "\n";
    }
    log << "budget spread max/min = "
        << format_double(static_cast<double>(max_budget) /
                         static_cast<double>(std::max(1L, min_budget)))
        << "\n";
    log << "wrote " << path << "\n";
}

void cmd_allocate(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    ensure_out_dir(config);
    const std::vector<HeadProfile> profiles = profiles_for(config);
    const std::vector<RecoveryCurve> curves = curves_of(profiles);
    const BudgetAllocation allocation = allocate_with(config, curves);

    const std::string path = out_path(config, "allocation.json");
    save_allocation(path, allocation);

    log << "allocator " << to_string(config.allocator) << ": total=" << allocation.total
        << " floor=" << allocation.floor << "\n";
    log << "min recovery = " << format_double(min_recovery(curves, allocation.budgets))
        << ", mean recovery = " << format_double(mean_recovery(curves, allocation.budgets))
        << "\n";
    if (config.allocator == AllocatorKind::MaxMin) {
        log << "budget transfers: " << allocation.transfers.size() << "\n";
        if (allocation.hit_iteration_cap) {
            log << "warning: iteration cap reached before convergence\n";
        }
        if (allocation.off_grid_evaluations > 0) {
            log << "note: " << allocation.off_grid_evaluations
                << " recovery lookups fell between curve samples and used the nearest sampled "
                   "budget below\n";
        }
    }
    for (std::size_t h = 0; h < allocation.heads.size(); ++h) {
        log << "  layer=" << allocation.heads[h].layer << " head=" << allocation.heads[h].head
            << " budget=" << allocation.budgets[h] << "\n";
    }
    log << "wrote " << path << "\n";
}

void cmd_partition(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    ensure_out_dir(config);

    std::vector<HeadId> heads;
    std::vector<long> budgets;
    if (!config.allocation_file.empty()) {
        const BudgetAllocation loaded = load_allocation(config.allocation_file);
        heads = loaded.heads;
        budgets = loaded.budgets;
    } else {
        const std::vector<HeadProfile> profiles = profiles_for(config);
        const BudgetAllocation allocation = allocate_with(config, curves_of(profiles));
        heads = allocation.heads;
        budgets = allocation.budgets;
    }

    const int devices = config.devices.front();
    Assignment assignment;
    switch (config.assigner) {
        case AssignerKind::Naive: assignment = naive_assign(budgets, devices); break;
        case AssignerKind::Optimal: assignment = optimal_assign(budgets, devices); break;
        case AssignerKind::Greedy:
        default: assignment = greedy_assign(budgets, devices); break;
    }
    const LoadReport report = imbalance(budgets, assignment);

    const std::string path = out_path(config, "assignment.json");
    save_assignment(path, assignment, report, heads);

    log << "assigner " << to_string(config.assigner) << " on " << devices << " devices\n";
    log << "loads:";
    for (long l : report.loads) log << ' ' << l;
    log << "\nimbalance = " << format_double(report.imbalance) << " (device "
        << report.argmax_device << " is the straggler)\n";

    if (config.assigner == AssignerKind::Optimal) {
        const LoadReport greedy_report = imbalance(budgets, greedy_assign(budgets, devices));
        if (greedy_report.imbalance > report.imbalance) {
            log << "note: greedy placement would be suboptimal here (I = "
                << format_double(greedy_report.imbalance) << " vs optimal "
                << format_double(report.imbalance) << ")\n";
        }
    }
    log << "wrote " << path << "\n";
}

std::vector<SkylinePoint> run_skyline(const ExperimentConfig& config) {
    config.validate();
    if (config.floor < 1) {
        throw ConfigError("skyline needs floor >= 1 so every head can run sparse attention");
    }
    const SyntheticWorkloadSpec spec = spec_with_seed(config);
    const AttentionWorkload workload = generate_workload(spec);
    const std::vector<HeadProfile> profiles =
        build_profiles(workload, default_budget_grid(spec.context_length, grid_stride_of(config)),
                       config.policy, synthetic_provenance(spec));
    const std::vector<RecoveryCurve> curves = curves_of(profiles);
    const auto n = static_cast<long>(workload.num_heads());
    const long n_k = spec.context_length;

    std::vector<long> totals = config.budget_sweep;
    if (totals.empty()) {
        for (double fraction : {0.25, 0.5, 0.75, 1.0}) {
            totals.push_back(std::lround(fraction * static_cast<double>(n) *
                                         static_cast<double>(n_k)));
        }
    }
    for (long total : totals) {
        if (total < n * config.floor || total > n * n_k) {
            throw ConfigError("skyline budget " + std::to_string(total) +
                              " infeasible; feasible range is [" +
                              std::to_string(n * config.floor) + ", " + std::to_string(n * n_k) +
                              "]");
        }
    }

    // Dense outputs are the accuracy baseline, computed once.
    std::vector<Matrix> dense_outputs(workload.num_heads());
    for (std::size_t h = 0; h < workload.num_heads(); ++h) {
        dense_outputs[h] = dense_attention(workload.heads[h]).output;
    }

    AllocatorConfig ac;
    ac.quantum = config.delta;
    ac.floor = config.floor;

    const int devices = config.devices.front();
    std::vector<SkylinePoint> points;
    for (long total : totals) {
        for (const AllocatorKind kind : {AllocatorKind::Uniform, AllocatorKind::MaxMin}) {
            BudgetAllocation allocation;
            if (kind == AllocatorKind::Uniform) {
                std::vector<HeadId> ids;
                for (const auto& c : curves) ids.push_back(c.id);
                allocation = uniform_allocate(ids, total, config.floor, n_k);
            } else {
                allocation = maxmin_allocate(curves, total, ac);
            }

            std::vector<double> errors(workload.num_heads());
#pragma omp parallel for schedule(dynamic)
            for (std::size_t h = 0; h < workload.num_heads(); ++h) {
                const SelectionPolicy policy{config.policy, allocation.budgets[h]};
                const Matrix sparse = sparse_attention(workload.heads[h], policy);
                errors[h] = output_error(sparse, dense_outputs[h]);
            }
            double mean_error = 0.0;
            for (double e : errors) mean_error += e;
            mean_error /= static_cast<double>(errors.size());

            const CostModel& cm = config.cost_model;
            const double greedy_latency =
                simulate(imbalance(allocation.budgets, greedy_assign(allocation.budgets, devices)),
                         cm)
                    .barrier_latency;
            const double naive_latency =
                simulate(imbalance(allocation.budgets, naive_assign(allocation.budgets, devices)),
                         cm)
                    .barrier_latency;

            points.push_back({total, to_string(kind), mean_error, greedy_latency, naive_latency});
        }
    }
    return points;
}

void write_skyline_csv(std::ostream& out, const std::vector<SkylinePoint>& rows) {
    out << "total_budget,allocator,mean_output_error,barrier_latency\n";
    for (const auto& row : rows) {
        out << row.total_budget << ',' << row.allocator << ','
            << format_double(row.mean_output_error) << ',' << format_double(row.barrier_latency)
            << '\n';
    }
}

void cmd_skyline(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    ensure_out_dir(config);
    const std::vector<SkylinePoint> points = run_skyline(config);
    const std::string path = out_path(config, "skyline.csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_skyline_csv(out, points);
    if (!out) throw std::runtime_error("write failed for " + path);

    for (const auto& p : points) {
        log << "B=" << p.total_budget << " " << p.allocator
            << ": mean_error=" << format_double(p.mean_output_error)
            << " barrier_latency=" << format_double(p.barrier_latency) << "\n";
    }
    log << "wrote " << path << "\n";
}

void cmd_sweep(const ExperimentConfig& config, std::ostream& log) {
    config.validate();
    ensure_out_dir(config);
    const SyntheticWorkloadSpec spec = spec_with_seed(config);

    SweepOptions options;
    options.degrees = config.devices;
    options.context_lengths = config.context_lengths.empty()
                                  ? std::vector<long>{spec.context_length}
                                  : config.context_lengths;
    options.base_spec = spec;
    options.allocator = config.allocator;
    options.total_budget = config.total_budget;
    options.budget_fraction = config.budget_fraction;
    options.alloc_config.quantum = config.delta;
    options.alloc_config.floor = config.floor;
    options.top_p = config.top_p;
    options.policy = config.policy;
    options.grid_stride = config.grid_stride;
    options.cost_model = config.cost_model;

    const std::vector<SweepRow> rows = sweep(options);
    const std::string path = out_path(config, "sweep.csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    write_sweep_csv(out, rows);
    if (!out) throw std::runtime_error("write failed for " + path);

    log << "swept " << options.degrees.size() << " parallelism degrees x "
        << options.context_lengths.size() << " context lengths (" << rows.size() << " rows)\n";
    log << "wrote " << path << "\n";
}

int dispatch(const std::string& command, const ExperimentConfig& config, std::ostream& log,
             std::ostream& err) {
    try {
        if (command == "profile") {
            cmd_profile(config, log);
        } else if (command == "allocate") {
            cmd_allocate(config, log);
        } else if (command == "partition") {
            cmd_partition(config, log);
        } else if (command == "skyline") {
            cmd_skyline(config, log);
        } else if (command == "sweep") {
            cmd_sweep(config, log);
        } else {
            throw ConfigError("unknown command \"" + command + "\"");
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace headbal
