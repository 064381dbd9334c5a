#include "headbal/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

// Plain-loop serial implementations. Selection is done by fully sorting
// (score, index) pairs, softmax in three explicit passes.
namespace headbal::reference {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix raw_scores(const HeadData& head, bool causal) {
    const std::size_t n_q = head.Q.rows;
    const std::size_t n_k = head.K.rows;
    const std::size_t d = head.Q.cols;
    Matrix scores(n_q, n_k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < n_q; ++i) {
        for (std::size_t j = 0; j < n_k; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) dot += head.Q(i, c) * head.K(j, c);
            scores(i, j) = (causal && j > i) ? kNegInf : dot * scale;
        }
    }
    return scores;
}

// Full sort under (value desc, index asc), first k indices, ascending.
std::vector<std::size_t> sorted_top_k(const std::vector<double>& values, long k) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    order.resize(static_cast<std::size_t>(k));
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace

AttentionResult dense_attention(const HeadData& head, bool causal) {
    validate_head(head);
    const Matrix scores = raw_scores(head, causal);
    const std::size_t n_q = scores.rows;
    const std::size_t n_k = scores.cols;
    const std::size_t d_v = head.V.cols;

    AttentionResult result{Matrix(n_q, n_k), Matrix(n_q, d_v)};
    for (std::size_t i = 0; i < n_q; ++i) {
        double m = kNegInf;
        for (std::size_t j = 0; j < n_k; ++j) m = std::max(m, scores(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < n_k; ++j) denom += std::exp(scores(i, j) - m);
        for (std::size_t j = 0; j < n_k; ++j) {
            result.weights(i, j) = std::exp(scores(i, j) - m) / denom;
        }
        for (std::size_t c = 0; c < d_v; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n_k; ++j) acc += result.weights(i, j) * head.V(j, c);
            result.output(i, c) = acc;
        }
    }
    return result;
}

Matrix sparse_attention(const HeadData& head, const SelectionPolicy& policy, bool causal) {
    validate_head(head);
    const std::size_t n_q = head.Q.rows;
    const std::size_t n_k = head.K.rows;
    const std::size_t d_v = head.V.cols;
    if (policy.budget < 1 || static_cast<std::size_t>(policy.budget) > n_k) {
        throw std::invalid_argument("budget k = " + std::to_string(policy.budget) +
                                    " out of range [1, " + std::to_string(n_k) + "]");
    }

    const Matrix scores = raw_scores(head, causal);
    Matrix output(n_q, d_v);

    std::vector<std::size_t> global_kept;
    if (policy.kind == SelectionKind::ColumnAggregateTopK) {
        const AttentionResult dense = reference::dense_attention(head, causal);
        std::vector<double> sums(n_k, 0.0);
        for (std::size_t j = 0; j < n_k; ++j) {
            for (std::size_t i = 0; i < n_q; ++i) sums[j] += dense.weights(i, j);
        }
        global_kept = sorted_top_k(sums, policy.budget);
    }

    for (std::size_t i = 0; i < n_q; ++i) {
        std::vector<std::size_t> kept;
        if (policy.kind == SelectionKind::PerQueryTopK) {
            std::vector<double> row(scores.row(i), scores.row(i) + n_k);
            kept = sorted_top_k(row, policy.budget);
        } else {
            kept = global_kept;
        }

        double m = kNegInf;
        for (std::size_t j : kept) m = std::max(m, scores(i, j));
        if (m == kNegInf) {
            for (std::size_t c = 0; c < d_v; ++c) output(i, c) = 0.0;
            continue;
        }
        double denom = 0.0;
        for (std::size_t j : kept) denom += std::exp(scores(i, j) - m);
        for (std::size_t c = 0; c < d_v; ++c) {
            double acc = 0.0;
            for (std::size_t j : kept) {
                acc += (std::exp(scores(i, j) - m) / denom) * head.V(j, c);
            }
            output(i, c) = acc;
        }
    }
    return output;
}

double recovery_ratio(const Matrix& weights, long k, SelectionKind kind) {
    const std::size_t n_q = weights.rows;
    const std::size_t n_k = weights.cols;
    if (n_q == 0 || n_k == 0) throw std::invalid_argument("recovery_ratio: empty weights");
    if (k < 0 || static_cast<std::size_t>(k) > n_k) {
        throw std::invalid_argument("recovery_ratio: k = " + std::to_string(k) +
                                    " out of range [0, " + std::to_string(n_k) + "]");
    }
    if (k == 0) return 0.0;

    std::vector<std::size_t> kept;
    if (kind == SelectionKind::ColumnAggregateTopK) {
        std::vector<double> sums(n_k, 0.0);
        for (std::size_t j = 0; j < n_k; ++j) {
            for (std::size_t i = 0; i < n_q; ++i) sums[j] += weights(i, j);
        }
        kept = sorted_top_k(sums, k);
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n_q; ++i) {
        if (kind == SelectionKind::PerQueryTopK) {
            std::vector<double> row(weights.row(i), weights.row(i) + n_k);
            std::sort(row.begin(), row.end(), std::greater<double>());
            for (long j = 0; j < k; ++j) total += row[static_cast<std::size_t>(j)];
        } else {
            for (std::size_t j : kept) total += weights(i, j);
        }
    }
    return total / static_cast<double>(n_q);
}

}  // namespace headbal::reference
