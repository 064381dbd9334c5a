#include "headbal/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace headbal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Raw scores for one query row: q . K_j / sqrt(d_h), causal-masked at j > i.
void score_row(const HeadData& head, std::size_t i, bool causal, double* out) {
    const std::size_t n_k = head.K.rows;
    const std::size_t d = head.Q.cols;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const double* q = head.Q.row(i);
    for (std::size_t j = 0; j < n_k; ++j) {
        const double* k = head.K.row(j);
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) dot += q[c] * k[c];
        out[j] = dot * scale;
    }
    if (causal) {
        for (std::size_t j = i + 1; j < n_k; ++j) out[j] = kNegInf;
    }
}

// Softmax over scores[kept], accumulating sum_j w_j V_j into out_row.
// All-masked kept sets produce a zero row.
void softmax_weighted_sum(const Matrix& values, const double* scores,
                          const std::vector<std::size_t>& kept, double* out_row,
                          std::size_t d_v) {
    double m = kNegInf;
    for (std::size_t j : kept) m = std::max(m, scores[j]);
    std::fill(out_row, out_row + d_v, 0.0);
    if (m == kNegInf) return;
    double denom = 0.0;
    for (std::size_t j : kept) denom += std::exp(scores[j] - m);
    for (std::size_t j : kept) {
        const double w = std::exp(scores[j] - m) / denom;
        const double* v = values.row(j);
        for (std::size_t c = 0; c < d_v; ++c) out_row[c] += w * v[c];
    }
}

// Indices of the k largest entries under (value desc, index asc), returned
// in ascending index order so downstream sums have one fixed order.
std::vector<std::size_t> top_k_indices(const double* values, std::size_t n, long k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto mid = idx.begin() + k;
    std::nth_element(idx.begin(), mid - 1, idx.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<double> column_sums(const Matrix& weights) {
    std::vector<double> sums(weights.cols, 0.0);
    for (std::size_t i = 0; i < weights.rows; ++i) {
        const double* row = weights.row(i);
        for (std::size_t j = 0; j < weights.cols; ++j) sums[j] += row[j];
    }
    return sums;
}

void check_budget(long k, std::size_t n_k) {
    if (k < 1 || static_cast<std::size_t>(k) > n_k) {
        throw std::invalid_argument("budget k = " + std::to_string(k) + " out of range [1, " +
                                    std::to_string(n_k) + "]");
    }
}

}  // namespace

AttentionResult dense_attention(const HeadData& head, bool causal) {
    validate_head(head);
    const std::size_t n_q = head.Q.rows;
    const std::size_t n_k = head.K.rows;
    const std::size_t d_v = head.V.cols;

    AttentionResult result{Matrix(n_q, n_k), Matrix(n_q, d_v)};

#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n_q; ++i) {
        double* w = result.weights.row(i);
        score_row(head, i, causal, w);

        double m = kNegInf;
        for (std::size_t j = 0; j < n_k; ++j) m = std::max(m, w[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < n_k; ++j) {
            w[j] = std::exp(w[j] - m);
            denom += w[j];
        }
        const double inv = 1.0 / denom;
        double* out = result.output.row(i);
        std::fill(out, out + d_v, 0.0);
        for (std::size_t j = 0; j < n_k; ++j) {
            w[j] *= inv;
            const double* v = head.V.row(j);
            for (std::size_t c = 0; c < d_v; ++c) out[c] += w[j] * v[c];
        }
    }
    return result;
}

Matrix sparse_attention(const HeadData& head, const SelectionPolicy& policy, bool causal) {
    validate_head(head);
    const std::size_t n_q = head.Q.rows;
    const std::size_t n_k = head.K.rows;
    const std::size_t d_v = head.V.cols;
    check_budget(policy.budget, n_k);

    Matrix output(n_q, d_v);

    if (policy.kind == SelectionKind::PerQueryTopK) {
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n_q; ++i) {
            std::vector<double> scores(n_k);
            score_row(head, i, causal, scores.data());
            const auto kept = top_k_indices(scores.data(), n_k, policy.budget);
            softmax_weighted_sum(head.V, scores.data(), kept, output.row(i), d_v);
        }
        return output;
    }

    // ColumnAggregateTopK: one key set for the whole head, ranked by dense
    // attention column sums.
    const AttentionResult dense = dense_attention(head, causal);
    const std::vector<double> sums = column_sums(dense.weights);
    const auto kept = top_k_indices(sums.data(), n_k, policy.budget);

#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n_q; ++i) {
        std::vector<double> scores(n_k);
        score_row(head, i, causal, scores.data());
        softmax_weighted_sum(head.V, scores.data(), kept, output.row(i), d_v);
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

    double total = 0.0;
    if (kind == SelectionKind::PerQueryTopK) {
        std::vector<double> buf(n_k);
        for (std::size_t i = 0; i < n_q; ++i) {
            const double* row = weights.row(i);
            std::copy(row, row + n_k, buf.begin());
            std::nth_element(buf.begin(), buf.begin() + (k - 1), buf.end(),
                             std::greater<double>());
            double mass = 0.0;
            for (long j = 0; j < k; ++j) mass += buf[static_cast<std::size_t>(j)];
            total += mass;
        }
    } else {
        const std::vector<double> sums = column_sums(weights);
        const auto kept = top_k_indices(sums.data(), n_k, k);
        for (std::size_t i = 0; i < n_q; ++i) {
            const double* row = weights.row(i);
            double mass = 0.0;
            for (std::size_t j : kept) mass += row[j];
            total += mass;
        }
    }
    return total / static_cast<double>(n_q);
}

double output_error(const Matrix& sparse, const Matrix& dense) {
    if (!sparse.same_shape(dense)) {
        throw std::invalid_argument("output_error: shape mismatch (" + std::to_string(sparse.rows) +
                                    "x" + std::to_string(sparse.cols) + " vs " +
                                    std::to_string(dense.rows) + "x" + std::to_string(dense.cols) +
                                    ")");
    }
    double diff_sq = 0.0;
    for (std::size_t i = 0; i < sparse.data.size(); ++i) {
        const double d = sparse.data[i] - dense.data[i];
        diff_sq += d * d;
    }
    if (diff_sq == 0.0) return 0.0;
    const double denom = frobenius_norm(dense);
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(diff_sq) / denom;
}

std::vector<AttentionResult> dense_attention_all(const AttentionWorkload& workload, bool causal) {
    workload.validate();
    std::vector<AttentionResult> results(workload.num_heads());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t h = 0; h < workload.num_heads(); ++h) {
        results[h] = dense_attention(workload.heads[h], causal);
    }
    return results;
}

std::vector<Matrix> sparse_attention_all(const AttentionWorkload& workload,
                                         const SelectionPolicy& policy, bool causal) {
    workload.validate();
    std::vector<Matrix> results(workload.num_heads());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t h = 0; h < workload.num_heads(); ++h) {
        results[h] = sparse_attention(workload.heads[h], policy, causal);
    }
    return results;
}

}  // namespace headbal
