#include "headbal/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace headbal {

bool all_finite(const Matrix& m) {
    for (double v : m.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double frobenius_norm(const Matrix& m) {
    double sum = 0.0;
    for (double v : m.data) sum += v * v;
    return std::sqrt(sum);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        worst = std::max(worst, std::fabs(a.data[i] - b.data[i]));
    }
    return worst;
}

}  // namespace headbal
