#pragma once

#include <string>
#include <vector>

#include "headbal/profiler.hpp"

namespace headbal {

enum class AssignerKind { Naive, Greedy, Optimal };

std::string to_string(AssignerKind kind);
AssignerKind assigner_kind_from_string(const std::string& name);

// Head -> device partition.
struct Assignment {
    int num_devices = 1;
    std::vector<int> device_of_head;

    std::vector<std::vector<long>> device_heads() const;
    void validate() const;
};

struct LoadReport {
    std::vector<long> loads;  // L_d = sum of budgets on device d
    long total = 0;
    double imbalance = 1.0;  // max load / mean load, mean computed as total/|D| in double
    int argmax_device = 0;
};

enum class NaiveOrder { Contiguous, RoundRobin };

// Equal-count placement that ignores budgets: contiguous index blocks of
// size ceil(N/D) / floor(N/D) (earlier devices take the larger blocks), or
// round-robin when requested. Requires N >= D.
Assignment naive_assign(const std::vector<long>& budgets, int devices,
                        NaiveOrder order = NaiveOrder::Contiguous);

// LPT rule: heads sorted by budget descending (ties toward the lower head
// index), each placed on the least-loaded device (ties toward the lower
// device index). O(N log N + N log D) via a min-heap over device loads.
Assignment greedy_assign(const std::vector<long>& budgets, int devices);

// Exact minimum-imbalance partition by branch and bound seeded with the
// greedy bound; ties resolved to the lexicographically smallest
// device_of_head vector. Guarded to N <= 24 and D <= 4; larger instances
// are refused with a pointer to greedy_assign.
Assignment optimal_assign(const std::vector<long>& budgets, int devices);

// Per-device loads and the imbalance ratio of a partition.
LoadReport imbalance(const std::vector<long>& budgets, const Assignment& assignment);

// Assignment file schema (JSON, version 1, strict):
// {"version":1,"devices":K,
//  "assignment":[{"layer":l,"head":h,"device":d},...],
//  "loads":[...],"imbalance":x}
void save_assignment(const std::string& path, const Assignment& assignment,
                     const LoadReport& report, const std::vector<HeadId>& heads);
struct LoadedAssignment {
    Assignment assignment;
    LoadReport report;
    std::vector<HeadId> heads;
};
LoadedAssignment load_assignment(const std::string& path);

}  // namespace headbal
