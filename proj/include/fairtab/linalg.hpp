#pragma once

#include <cstddef>
#include <vector>

#include "fairtab/matrix.hpp"

// Small dense routines backing the subspace fit. Problem sizes here are tiny
// (d up to a few hundred), so clarity and determinism win over blocking.

namespace fairtab::linalg {

// Solve A x = b for symmetric positive definite A (in-place Cholesky).
// Throws ArgumentError if A is not positive definite.
std::vector<double> cholesky_solve(Matrix a, std::vector<double> b);

struct LogisticFit {
    std::vector<double> coef;  // per feature, excludes intercept
    double intercept = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Binary logistic regression by IRLS (Newton). l2 penalizes coef only, not
// the intercept. y entries must be 0 or 1.
LogisticFit logistic_regression(const Matrix& x, const std::vector<double>& y,
                                double l2, int max_iter = 100, double tol = 1e-8);

struct SymEigen {
    std::vector<double> values;  // descending
    Matrix vectors;              // column j is the eigenvector for values[j]
};

// Cyclic Jacobi for symmetric matrices. Eigenvectors are unit-norm with a
// deterministic sign (largest-magnitude entry positive).
SymEigen jacobi_eigen(Matrix a, int max_sweeps = 64, double tol = 1e-12);

// Modified Gram-Schmidt. Returns an orthonormal spanning subset; a vector is
// dropped when its residual norm falls below rel_tol times its input norm.
std::vector<std::vector<double>> orthonormalize(
    const std::vector<std::vector<double>>& vectors, double rel_tol = 1e-8);

}  // namespace fairtab::linalg
