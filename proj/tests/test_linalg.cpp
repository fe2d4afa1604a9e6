#include <doctest.h>

#include <cmath>
#include <vector>

#include "fairtab/errors.hpp"
#include "fairtab/kernels.hpp"
#include "fairtab/linalg.hpp"
#include "fairtab/rng.hpp"

namespace fl = fairtab::linalg;
using fairtab::Matrix;

namespace {

Matrix random_spd(fairtab::Rng& rng, std::size_t n) {
    Matrix m(n, n);
    for (auto& x : m.data) x = rng.next_normal();
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += m.at(k, i) * m.at(k, j);
            a.at(i, j) = s;
        }
    for (std::size_t i = 0; i < n; ++i) a.at(i, i) += static_cast<double>(n);
    return a;
}

}  // namespace

TEST_CASE("cholesky_solve hand case") {
    Matrix a(2, 2);
    a.at(0, 0) = 4; a.at(0, 1) = 2;
    a.at(1, 0) = 2; a.at(1, 1) = 3;
    auto x = fl::cholesky_solve(a, {6, 5});
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cholesky_solve residual on random SPD systems") {
    fairtab::Rng rng(7);
    for (std::size_t n : {1, 2, 3, 5, 8, 20}) {
        Matrix a = random_spd(rng, n);
        std::vector<double> b(n);
        for (auto& v : b) v = rng.next_normal();
        auto x = fl::cholesky_solve(a, b);
        for (std::size_t i = 0; i < n; ++i) {
            double r = fairtab::kernels::dot(a.row(i), x.data(), n) - b[i];
            CHECK(std::fabs(r) < 1e-9);
        }
    }
}

TEST_CASE("cholesky_solve rejects indefinite input") {
    Matrix a(2, 2);
    a.at(0, 0) = 1; a.at(0, 1) = 2;
    a.at(1, 0) = 2; a.at(1, 1) = 1;
    CHECK_THROWS_AS(fl::cholesky_solve(a, {1, 1}), fairtab::ArgumentError);
}

TEST_CASE("logistic_regression intercept-only closed form") {
    // 3 of 4 labels positive, no features: optimum intercept = log(3)
    Matrix x(4, 0);
    auto fit = fl::logistic_regression(x, {1, 1, 1, 0}, 1e-2);
    CHECK(fit.converged);
    CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-8));
}

TEST_CASE("logistic_regression stationarity at the returned optimum") {
    fairtab::Rng rng(19);
    const std::size_t n = 120, d = 4;
    Matrix x(n, d);
    for (auto& v : x.data) v = rng.next_normal();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = 0.8 * x.at(i, 0) - 0.5 * x.at(i, 2) + 0.2;
        y[i] = rng.next_double() < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
    }
    double l2 = 1e-2;
    auto fit = fl::logistic_regression(x, y, l2);
    CHECK(fit.converged);

    // independent gradient check of the penalized log-likelihood
    std::vector<double> grad(d + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double z = fit.intercept;
        for (std::size_t j = 0; j < d; ++j) z += fit.coef[j] * x.at(i, j);
        double p = 1.0 / (1.0 + std::exp(-z));
        for (std::size_t j = 0; j < d; ++j) grad[j] += (p - y[i]) * x.at(i, j);
        grad[d] += p - y[i];
    }
    for (std::size_t j = 0; j < d; ++j) grad[j] += l2 * fit.coef[j];
    for (std::size_t j = 0; j <= d; ++j) CHECK(std::fabs(grad[j]) < 1e-6);
}

TEST_CASE("logistic_regression recovers a separating direction") {
    Matrix x(40, 2);
    std::vector<double> y(40);
    fairtab::Rng rng(5);
    for (std::size_t i = 0; i < 40; ++i) {
        double s = i % 2 == 0 ? 1.0 : -1.0;
        x.at(i, 0) = s + 0.1 * rng.next_normal();
        x.at(i, 1) = rng.next_normal();
        y[i] = s > 0 ? 1.0 : 0.0;
    }
    auto fit = fl::logistic_regression(x, y, 1e-2);
    double norm = std::sqrt(fit.coef[0] * fit.coef[0] + fit.coef[1] * fit.coef[1]);
    CHECK(fit.coef[0] / norm > 0.99);
}

TEST_CASE("jacobi_eigen hand 2x2") {
    Matrix a(2, 2);
    a.at(0, 0) = 2; a.at(0, 1) = 1;
    a.at(1, 0) = 1; a.at(1, 1) = 2;
    auto e = fl::jacobi_eigen(a);
    CHECK(e.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-12));
    double inv = 1.0 / std::sqrt(2.0);
    CHECK(e.vectors.at(0, 0) == doctest::Approx(inv).epsilon(1e-10));
    CHECK(e.vectors.at(1, 0) == doctest::Approx(inv).epsilon(1e-10));
}

TEST_CASE("jacobi_eigen reconstructs random symmetric matrices") {
    fairtab::Rng rng(31);
    for (std::size_t n : {1, 2, 3, 6, 12}) {
        Matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                double v = rng.next_normal();
                a.at(i, j) = v;
                a.at(j, i) = v;
            }
        auto e = fl::jacobi_eigen(a);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double rec = 0.0, orth = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    rec += e.vectors.at(i, k) * e.values[k] * e.vectors.at(j, k);
                    orth += e.vectors.at(k, i) * e.vectors.at(k, j);
                }
                CHECK(std::fabs(rec - a.at(i, j)) < 1e-9);
                CHECK(std::fabs(orth - (i == j ? 1.0 : 0.0)) < 1e-10);
            }
        }
        for (std::size_t k = 1; k < n; ++k) CHECK(e.values[k - 1] >= e.values[k]);
    }
}

TEST_CASE("orthonormalize hand cases") {
    auto b = fl::orthonormalize({{1, 0}, {1, 1}});
    REQUIRE(b.size() == 2);
    CHECK(b[0][0] == doctest::Approx(1.0));
    CHECK(b[1][0] == doctest::Approx(0.0));
    CHECK(b[1][1] == doctest::Approx(1.0));

    auto dropped = fl::orthonormalize({{1, 0}, {2, 0}});
    CHECK(dropped.size() == 1);

    auto zero = fl::orthonormalize({{0, 0}, {0, 3}});
    REQUIRE(zero.size() == 1);
    CHECK(zero[0][1] == doctest::Approx(1.0));
}

TEST_CASE("orthonormalize produces an orthonormal set") {
    fairtab::Rng rng(43);
    std::vector<std::vector<double>> vecs;
    for (int v = 0; v < 6; ++v) {
        std::vector<double> x(8);
        for (auto& e : x) e = rng.next_normal();
        vecs.push_back(x);
    }
    vecs.push_back(vecs[0]);  // exact duplicate must be dropped
    auto b = fl::orthonormalize(vecs);
    CHECK(b.size() == 6);
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            double d = fairtab::kernels::dot(b[i].data(), b[j].data(), 8);
            CHECK(std::fabs(d - (i == j ? 1.0 : 0.0)) < 1e-10);
        }
}
