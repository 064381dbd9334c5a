#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "headbal/attention.hpp"
#include "headbal/workload.hpp"

namespace headbal {

struct HeadId {
    int layer = 0;
    int head = 0;
    bool operator==(const HeadId&) const = default;
    bool operator<(const HeadId& o) const {
        return layer != o.layer ? layer < o.layer : head < o.head;
    }
};

struct CurvePoint {
    long budget = 0;      // k, tokens
    double recovery = 0;  // r(k) in [0, 1]
};

// Sampled budget -> recovered-attention-weight function for one head.
// Budgets are strictly increasing, recoveries nondecreasing, and the final
// point is (n_k, 1) within 1e-9.
struct RecoveryCurve {
    HeadId id;
    long context_length = 0;
    std::vector<CurvePoint> points;

    void validate() const;

    // Recovery at the largest sampled budget <= b (0 below the first
    // sample). Never overstates the curve.
    double recovery_at(long budget) const;
    bool sampled_at(long budget) const;
    double max_recovery() const;
};

struct Provenance {
    std::string request;
    std::string task;
};

struct HeadProfile {
    RecoveryCurve curve;
    Provenance provenance;
    SelectionKind policy = SelectionKind::PerQueryTopK;

    void validate() const;
};

// Synthetic heterogeneous workload: head h gets a sparsity exponent s_h
// drawn uniformly from [exponent_min, exponent_max], and each query row's
// sorted attention weights follow w_i ~ i^(-s_h) up to per-entry
// multiplicative noise exp(N(0, sigma^2)), with key order permuted per head.
// Exponents depend only on (seed, head); noise, permutations and values also
// depend on request_id, so distinct requests share exponents.
struct SyntheticWorkloadSpec {
    long num_heads = 1;
    long context_length = 1;
    long num_queries = 1;
    long head_dim = 1;
    double exponent_min = 1.0;
    double exponent_max = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t request_id = 0;

    void validate() const;
};

std::vector<double> head_exponents(const SyntheticWorkloadSpec& spec);

// Deterministic per (seed, request_id). Q and K are constructed so that
// dense_attention reproduces the target weights exactly; this requires
// head_dim >= num_queries. V is standard normal.
AttentionWorkload generate_workload(const SyntheticWorkloadSpec& spec);

// One profile per head; every point is computed via recovery_ratio on the
// head's dense attention weights. The grid must be sorted, lie in
// [0, n_k] and include n_k.
std::vector<HeadProfile> build_profiles(const AttentionWorkload& workload,
                                        const std::vector<long>& budget_grid,
                                        SelectionKind policy, const Provenance& provenance,
                                        bool causal = false);

// Minimal sampled budget k with r(k) >= p (within 1e-9, matching the curve
// invariant tolerance). No interpolation: the grid defines the resolution.
// Throws if p exceeds the curve's maximum recovery.
long budget_for_recovery(const RecoveryCurve& curve, double p);

enum class BudgetNormalization { Max, Sum };

// Cross-request stability of relative head sparsity: per request, the
// per-head budget_for_recovery(p) vector is normalized and the minimum
// pairwise Pearson correlation across requests is returned. Requires >= 2
// requests over the same head set; a zero-variance budget vector is an
// error naming the request.
double stability_score(const std::vector<std::vector<HeadProfile>>& request_groups, double p,
                       BudgetNormalization normalization = BudgetNormalization::Max);

// Profile file schema (JSON, version 1, strict: unknown fields rejected):
// {"version":1, "policy":"per_query_topk"|"column_aggregate_topk",
//  "context_length":int,
//  "profiles":[{"layer":int,"head":int,"points":[[k,r],...],
//               "provenance":{"request":str,"task":str}}]}
void save_profiles(const std::string& path, const std::vector<HeadProfile>& profiles);
std::vector<HeadProfile> load_profiles(const std::string& path);

// {0, stride, 2*stride, ..., n_k}; n_k is always the last point.
std::vector<long> default_budget_grid(long context_length, long stride);

}  // namespace headbal
