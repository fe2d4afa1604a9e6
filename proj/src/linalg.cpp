#include "fairtab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairtab/errors.hpp"
#include "fairtab/kernels.hpp"

namespace fairtab::linalg {

std::vector<double> cholesky_solve(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows;
    require_dim(a.cols, n, "cholesky_solve: matrix");
    require_dim(b.size(), n, "cholesky_solve: rhs");

    // lower-triangular factor written into a
    for (std::size_t j = 0; j < n; ++j) {
        double d = a.at(j, j) - kernels::dot(a.row(j), a.row(j), j);
        if (d <= 0.0 || !std::isfinite(d)) {
            throw ArgumentError("cholesky_solve: matrix not positive definite");
        }
        d = std::sqrt(d);
        a.at(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            a.at(i, j) = (a.at(i, j) - kernels::dot(a.row(i), a.row(j), j)) / d;
        }
    }
    // forward then back substitution
    for (std::size_t i = 0; i < n; ++i) {
        b[i] = (b[i] - kernels::dot(a.row(i), b.data(), i)) / a.at(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a.at(j, i) * b[j];
        b[i] = s / a.at(i, i);
    }
    return b;
}

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

LogisticFit logistic_regression(const Matrix& x, const std::vector<double>& y,
                                double l2, int max_iter, double tol) {
    const std::size_t n = x.rows;
    const std::size_t d = x.cols;
    require_dim(y.size(), n, "logistic_regression: labels");

    // beta holds [coef..., intercept]; intercept is unpenalized
    std::vector<double> beta(d + 1, 0.0);
    LogisticFit fit;
    fit.coef.assign(d, 0.0);

    std::vector<double> p(n), grad(d + 1);
    Matrix h(d + 1, d + 1);

    for (int iter = 1; iter <= max_iter; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double z = kernels::dot(x.row(i), beta.data(), d) + beta[d];
            p[i] = sigmoid(z);
        }
        // gradient of the penalized negative log-likelihood
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double r = p[i] - y[i];
            kernels::axpy(r, x.row(i), grad.data(), d);
            grad[d] += r;
        }
        for (std::size_t j = 0; j < d; ++j) grad[j] += l2 * beta[j];

        double gnorm = std::sqrt(kernels::dot(grad.data(), grad.data(), d + 1));
        fit.iterations = iter;
        if (gnorm <= tol) {
            fit.converged = true;
            break;
        }

        std::fill(h.data.begin(), h.data.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double w = p[i] * (1.0 - p[i]);
            if (w < 1e-12) w = 1e-12;
            const double* xi = x.row(i);
            for (std::size_t a = 0; a < d; ++a) {
                kernels::axpy(w * xi[a], xi, h.row(a), d);
                h.at(a, d) += w * xi[a];
            }
            h.at(d, d) += w;
        }
        for (std::size_t a = 0; a < d; ++a) {
            h.at(a, a) += l2;
            h.at(d, a) = h.at(a, d);
        }

        std::vector<double> step = cholesky_solve(h, grad);
        for (std::size_t j = 0; j <= d; ++j) beta[j] -= step[j];
    }

    std::copy(beta.begin(), beta.begin() + static_cast<std::ptrdiff_t>(d),
              fit.coef.begin());
    fit.intercept = beta[d];
    return fit;
}

SymEigen jacobi_eigen(Matrix a, int max_sweeps, double tol) {
    const std::size_t n = a.rows;
    require_dim(a.cols, n, "jacobi_eigen: matrix");

    Matrix q(n, n);
    for (std::size_t i = 0; i < n; ++i) q.at(i, i) = 1.0;

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::fabs(a.at(i, j)));
    if (scale == 0.0) scale = 1.0;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        if (std::sqrt(off) <= tol * scale) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t r = p + 1; r < n; ++r) {
                double apr = a.at(p, r);
                if (std::fabs(apr) <= 1e-300) continue;
                double theta = (a.at(r, r) - a.at(p, p)) / (2.0 * apr);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a.at(k, p), akr = a.at(k, r);
                    a.at(k, p) = c * akp - s * akr;
                    a.at(k, r) = s * akp + c * akr;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a.at(p, k), ark = a.at(r, k);
                    a.at(p, k) = c * apk - s * ark;
                    a.at(r, k) = s * apk + c * ark;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double qkp = q.at(k, p), qkr = q.at(k, r);
                    q.at(k, p) = c * qkp - s * qkr;
                    q.at(k, r) = s * qkp + c * qkr;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (a.at(i, i) != a.at(j, j)) return a.at(i, i) > a.at(j, j);
        return i < j;
    });

    SymEigen out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t src = order[col];
        out.values[col] = a.at(src, src);
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double v = std::fabs(q.at(k, src));
            if (v > best) {
                best = v;
                arg = k;
            }
        }
        double sign = q.at(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < n; ++k) out.vectors.at(k, col) = sign * q.at(k, src);
    }
    return out;
}

std::vector<std::vector<double>> orthonormalize(
    const std::vector<std::vector<double>>& vectors, double rel_tol) {
    std::vector<std::vector<double>> basis;
    for (const auto& v0 : vectors) {
        std::vector<double> v = v0;
        const std::size_t d = v.size();
        double norm0 = std::sqrt(kernels::dot(v.data(), v.data(), d));
        if (norm0 == 0.0) continue;
        for (const auto& b : basis) {
            double proj = kernels::dot(b.data(), v.data(), d);
            kernels::axpy(-proj, b.data(), v.data(), d);
        }
        // second pass for numerical cleanliness near-dependence
        for (const auto& b : basis) {
            double proj = kernels::dot(b.data(), v.data(), d);
            kernels::axpy(-proj, b.data(), v.data(), d);
        }
        double norm = std::sqrt(kernels::dot(v.data(), v.data(), d));
        if (norm < rel_tol * norm0) continue;
        for (auto& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    return basis;
}

}  // namespace fairtab::linalg
