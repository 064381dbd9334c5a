#pragma once

#include <string>
#include <vector>

#include "headbal/profiler.hpp"

namespace headbal {

enum class AllocatorKind { Uniform, MaxMin, OracleTopP };

std::string to_string(AllocatorKind kind);
AllocatorKind allocator_kind_from_string(const std::string& name);

struct BudgetTransfer {
    int donor = 0;
    int recipient = 0;
    double donor_recovery = 0;      // donor's recovery before the transfer
    double recipient_recovery = 0;  // recipient's recovery before the transfer
    long amount = 0;                // tokens moved
};

struct BudgetAllocation {
    std::vector<HeadId> heads;
    std::vector<long> budgets;
    long total = 0;
    long floor = 0;

    // Diagnostics (not serialized).
    std::vector<BudgetTransfer> transfers;
    std::vector<double> min_recovery_trace;  // after each committed transfer, incl. start
    bool hit_iteration_cap = false;
    long off_grid_evaluations = 0;  // recovery lookups at budgets between curve samples

    // Checks the floor, the exact total and the per-head cap.
    void validate(long context_length) const;
};

struct AllocatorConfig {
    long quantum = 64;        // tokens moved per transfer
    long floor = 128;         // per-head lower bound
    long max_iterations = 0;  // 0: defaults to 10 * N * n_k / quantum

    void validate() const;
};

// b_h = floor(B/N), remainder spread one token each to the lowest-indexed
// heads. B must lie in [N*floor, N*n_k].
BudgetAllocation uniform_allocate(long num_heads, long total, long floor, long context_length);
BudgetAllocation uniform_allocate(const std::vector<HeadId>& heads, long total, long floor,
                                  long context_length);

// Iterative budget shifting: starting from the uniform split, move one
// quantum per step from the highest-recovery head still above the floor to
// the lowest-recovery head, until a transfer no longer raises the minimum
// recovery, no eligible donor remains, or the iteration cap is hit.
BudgetAllocation maxmin_allocate(const std::vector<RecoveryCurve>& curves, long total,
                                 const AllocatorConfig& config);

// Idealized baseline: b_h = budget_for_recovery(curve_h, p); the total is
// whatever those budgets sum to.
BudgetAllocation oracle_topp_allocate(const std::vector<RecoveryCurve>& curves, double p);

// Recovery statistics of a budget vector under the given curves.
double min_recovery(const std::vector<RecoveryCurve>& curves, const std::vector<long>& budgets);
double mean_recovery(const std::vector<RecoveryCurve>& curves, const std::vector<long>& budgets);

// Allocation file schema (JSON, version 1, strict):
// {"version":1,"total":B,"floor":b_min,
//  "budgets":[{"layer":l,"head":h,"budget":b},...]}
void save_allocation(const std::string& path, const BudgetAllocation& allocation);
BudgetAllocation load_allocation(const std::string& path);

}  // namespace headbal
