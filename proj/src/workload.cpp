#include "headbal/workload.hpp"

#include <stdexcept>
#include <string>

namespace headbal {

std::string to_string(SelectionKind kind) {
    return kind == SelectionKind::PerQueryTopK ? "per_query_topk" : "column_aggregate_topk";
}

SelectionKind selection_kind_from_string(const std::string& name) {
    if (name == "per_query_topk") return SelectionKind::PerQueryTopK;
    if (name == "column_aggregate_topk") return SelectionKind::ColumnAggregateTopK;
    throw std::invalid_argument("unknown selection policy \"" + name +
                                "\" (expected per_query_topk or column_aggregate_topk)");
}

namespace {

std::string head_prefix(int index) {
    return index < 0 ? std::string() : "head " + std::to_string(index) + ": ";
}

}  // namespace

void validate_head(const HeadData& head, int index) {
    const std::string at = head_prefix(index);
    if (head.Q.rows < 1 || head.Q.cols < 1) {
        throw std::invalid_argument(at + "Q must be at least 1x1, got " +
                                    std::to_string(head.Q.rows) + "x" + std::to_string(head.Q.cols));
    }
    if (head.K.cols != head.Q.cols) {
        throw std::invalid_argument(at + "K head-dim axis (" + std::to_string(head.K.cols) +
                                    ") != Q head-dim axis (" + std::to_string(head.Q.cols) + ")");
    }
    if (head.K.rows < 1) {
        throw std::invalid_argument(at + "K must hold at least one key token");
    }
    if (head.V.rows != head.K.rows) {
        throw std::invalid_argument(at + "V token axis (" + std::to_string(head.V.rows) +
                                    ") != K token axis (" + std::to_string(head.K.rows) + ")");
    }
    if (head.V.cols < 1) {
        throw std::invalid_argument(at + "V must have at least one column");
    }
    if (!all_finite(head.Q)) throw std::invalid_argument(at + "Q contains NaN or Inf");
    if (!all_finite(head.K)) throw std::invalid_argument(at + "K contains NaN or Inf");
    if (!all_finite(head.V)) throw std::invalid_argument(at + "V contains NaN or Inf");
}

void AttentionWorkload::validate() const {
    if (heads.empty()) throw std::invalid_argument("workload must have at least one head");
    for (std::size_t h = 0; h < heads.size(); ++h) {
        validate_head(heads[h], static_cast<int>(h));
        if (heads[h].K.rows != heads[0].K.rows) {
            throw std::invalid_argument("head " + std::to_string(h) + ": token axis (" +
                                        std::to_string(heads[h].K.rows) +
                                        ") differs from head 0 (" +
                                        std::to_string(heads[0].K.rows) + ")");
        }
        if (heads[h].Q.rows != heads[0].Q.rows) {
            throw std::invalid_argument("head " + std::to_string(h) + ": query axis (" +
                                        std::to_string(heads[h].Q.rows) +
                                        ") differs from head 0 (" +
                                        std::to_string(heads[0].Q.rows) + ")");
        }
        if (heads[h].Q.cols != heads[0].Q.cols) {
            throw std::invalid_argument("head " + std::to_string(h) + ": head-dim axis (" +
                                        std::to_string(heads[h].Q.cols) +
                                        ") differs from head 0 (" +
                                        std::to_string(heads[0].Q.cols) + ")");
        }
    }
}

}  // namespace headbal
