#pragma once

#include <string>
#include <vector>

#include "headbal/matrix.hpp"

namespace headbal {

// How a token budget is spent on a head.
//   PerQueryTopK:        each query row keeps its own k highest-scoring keys.
//   ColumnAggregateTopK: one global key set per head, ranked by attention
//                        weight column sums.
enum class SelectionKind { PerQueryTopK, ColumnAggregateTopK };

std::string to_string(SelectionKind kind);
SelectionKind selection_kind_from_string(const std::string& name);

struct SelectionPolicy {
    SelectionKind kind = SelectionKind::PerQueryTopK;
    long budget = 0;  // k, in tokens
};

// One head's projections. Q is n_q x d_h, K and V are n_k x d_h.
struct HeadData {
    Matrix Q;
    Matrix K;
    Matrix V;
};

// One attention layer's worth of heads. All heads share query count,
// context length and head dimension.
struct AttentionWorkload {
    std::vector<HeadData> heads;

    std::size_t num_heads() const { return heads.size(); }
    std::size_t num_queries() const { return heads.empty() ? 0 : heads[0].Q.rows; }
    std::size_t context_length() const { return heads.empty() ? 0 : heads[0].K.rows; }
    std::size_t head_dim() const { return heads.empty() ? 0 : heads[0].Q.cols; }

    // Throws std::invalid_argument naming the offending head and axis.
    void validate() const;
};

// Shape/finiteness checks for a single head; messages are prefixed with
// "head <index>" when index >= 0.
void validate_head(const HeadData& head, int index = -1);

}  // namespace headbal
