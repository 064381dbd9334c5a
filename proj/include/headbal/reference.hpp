#pragma once

#include "headbal/attention.hpp"

// Serial reference implementations. These favor the most transparent
// formulation (full sorts, explicit passes, no OpenMP) and are kept as the
// comparison baseline for tests and for the benchmark target.
namespace headbal::reference {

AttentionResult dense_attention(const HeadData& head, bool causal = false);

Matrix sparse_attention(const HeadData& head, const SelectionPolicy& policy, bool causal = false);

double recovery_ratio(const Matrix& weights, long k, SelectionKind kind);

}  // namespace headbal::reference
