#pragma once

#include <cstddef>
#include <vector>

namespace headbal {

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
    bool operator==(const Matrix& other) const = default;
};

bool all_finite(const Matrix& m);

double frobenius_norm(const Matrix& m);

// max |a - b| over all entries; requires equal shapes.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace headbal
