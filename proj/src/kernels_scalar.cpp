#include "fairtab/kernels.hpp"

#include <limits>

// Reference implementations. Plain sequential loops; the AVX2 variants are
// equivalence-tested against these.

namespace fairtab::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_l2(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

std::size_t shifted_argmax(const double* values, const double* costs,
                           double lambda, std::size_t n) {
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_idx = npos;
    for (std::size_t i = 0; i < n; ++i) {
        double s = values[i] - lambda * costs[i];
        if (s > best) {
            best = s;
            best_idx = i;
        }
    }
    return best_idx;
}

}  // namespace fairtab::kernels::scalar
