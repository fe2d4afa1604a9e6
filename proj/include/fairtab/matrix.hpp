#pragma once

#include <cstddef>
#include <vector>

#include "fairtab/errors.hpp"

namespace fairtab {

// Dense row-major matrix of doubles. Rows are contiguous so kernels can
// operate on raw row pointers.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool empty() const { return rows == 0 || cols == 0; }
};

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw ArgumentError(std::string(what) + ": dimension mismatch (got " +
                            std::to_string(got) + ", want " + std::to_string(want) + ")");
    }
}

}  // namespace fairtab
