#pragma once

#include <vector>

#include "headbal/workload.hpp"

namespace headbal {

struct AttentionResult {
    Matrix weights;  // n_q x n_k, row-stochastic
    Matrix output;   // n_q x d_h
};

// A = row-softmax(Q K^T / sqrt(d_h)), O = A V. The softmax subtracts the
// per-row maximum before exponentiating. With causal=true, scores at
// key index j > query index i are masked to -inf.
AttentionResult dense_attention(const HeadData& head, bool causal = false);

// Budgeted attention. PerQueryTopK keeps the k largest pre-softmax scores
// of each query row; ColumnAggregateTopK keeps one key set per head chosen
// by descending dense-weight column sums. The softmax is renormalized over
// the kept set. Score ties break toward the lower key index. A query row
// whose kept keys are all masked (possible only under causal
// ColumnAggregateTopK) yields a zero output row.
Matrix sparse_attention(const HeadData& head, const SelectionPolicy& policy, bool causal = false);

// Fraction of attention mass captured by a budget of k tokens:
// PerQueryTopK averages each row's k largest weights; ColumnAggregateTopK
// averages row mass on the k columns with the largest column sums.
// k = 0 returns 0; k > n_k throws.
double recovery_ratio(const Matrix& weights, long k, SelectionKind kind);

// ||sparse - dense||_F / ||dense||_F. Zero for identical inputs; +inf when
// dense is all zeros but the difference is not.
double output_error(const Matrix& sparse, const Matrix& dense);

// Whole-layer fan-out across heads.
std::vector<AttentionResult> dense_attention_all(const AttentionWorkload& workload,
                                                 bool causal = false);
std::vector<Matrix> sparse_attention_all(const AttentionWorkload& workload,
                                         const SelectionPolicy& policy, bool causal = false);

}  // namespace headbal
