#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "fairtab/kernels.hpp"
#include "fairtab/rng.hpp"

namespace fk = fairtab::kernels;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<double> random_vec(fairtab::Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * rng.next_double();
    return v;
}

bool close(double a, double b) {
    return std::fabs(a - b) <= 1e-10 * (1.0 + std::fabs(a) + std::fabs(b));
}

bool same_bits(double a, double b) {
    return std::memcmp(&a, &b, sizeof(double)) == 0;
}

// accumulation oracle in extended precision
long double dot_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += static_cast<long double>(a[i]) * static_cast<long double>(b[i]);
    return acc;
}

// restates the contract: highest score wins, ties to the lowest index,
// NaN scores and scores that never beat -inf are unselectable
std::size_t argmax_oracle(const std::vector<double>& values,
                          const std::vector<double>& costs, double lambda) {
    std::size_t best = fk::npos;
    double best_score = -kInf;
    for (std::size_t j = 0; j < values.size(); ++j) {
        double s = values[j] - lambda * costs[j];
        if (std::isnan(s)) continue;
        if (best == fk::npos ? s > -kInf : s > best_score) {
            best = j;
            best_score = s;
        }
    }
    return best;
}

const std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17,
                                31, 33, 64, 100, 257, 1000};

}  // namespace

TEST_CASE("dot and squared_l2 and sum match extended-precision oracles") {
    fairtab::Rng rng(11);
    for (std::size_t n : kLengths) {
        auto a = random_vec(rng, n, -2.0, 2.0);
        auto b = random_vec(rng, n, -2.0, 2.0);

        long double d = dot_oracle(a, b);
        CHECK(close(fk::dot(a.data(), b.data(), n), static_cast<double>(d)));
        CHECK(close(fk::scalar::dot(a.data(), b.data(), n), static_cast<double>(d)));

        long double s2 = 0.0L;
        long double s1 = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            long double diff = static_cast<long double>(a[i]) - b[i];
            s2 += diff * diff;
            s1 += a[i];
        }
        CHECK(close(fk::squared_l2(a.data(), b.data(), n), static_cast<double>(s2)));
        CHECK(close(fk::sum(a.data(), n), static_cast<double>(s1)));
    }
}

TEST_CASE("dot hand values") {
    double a[] = {1, 2, 3};
    double b[] = {4, 5, 6};
    CHECK(fk::dot(a, b, 3) == 32.0);
    CHECK(fk::squared_l2(a, b, 3) == 27.0);
    CHECK(fk::sum(a, 3) == 6.0);
    CHECK(fk::dot(a, b, 0) == 0.0);
}

TEST_CASE("axpy accumulates in place") {
    double x[] = {1, 2, 3, 4, 5};
    double y[] = {10, 10, 10, 10, 10};
    fk::axpy(0.5, x, y, 5);
    CHECK(y[0] == 10.5);
    CHECK(y[4] == 12.5);
    fk::axpy(0.0, x, y, 5);
    CHECK(y[2] == 11.5);
}

TEST_CASE("shifted_argmax hand values and tie rule") {
    {
        double v[] = {1, 3, 2};
        double c[] = {0, 1, 4};
        CHECK(fk::shifted_argmax(v, c, 1.0, 3) == 1);
        CHECK(fk::shifted_argmax(v, c, 0.0, 3) == 1);
        CHECK(fk::shifted_argmax(v, c, 100.0, 3) == 0);
    }
    {
        // exact tie picks the lowest index
        double v[] = {5, 5, 5};
        double c[] = {0, 0, 0};
        CHECK(fk::shifted_argmax(v, c, 7.0, 3) == 0);
    }
    {
        // lambda 0 with infinite cost gives a NaN score, which is skipped
        double v[] = {10, 1};
        double c[] = {kInf, 0};
        CHECK(fk::shifted_argmax(v, c, 0.0, 2) == 1);
        CHECK(fk::shifted_argmax(v, c, 2.0, 2) == 1);
    }
    {
        double v[] = {kNan, kNan};
        double c[] = {0, 0};
        CHECK(fk::shifted_argmax(v, c, 1.0, 2) == fk::npos);
    }
    {
        // -inf never beats the -inf starting point
        double v[] = {-kInf, -kInf};
        double c[] = {0, 0};
        CHECK(fk::shifted_argmax(v, c, 1.0, 2) == fk::npos);
    }
    CHECK(fk::shifted_argmax(nullptr, nullptr, 1.0, 0) == fk::npos);
}

TEST_CASE("shifted_argmax matches oracle on quantized inputs with many ties") {
    fairtab::Rng rng(23);
    for (std::size_t n : kLengths) {
        for (double lambda : {0.0, 0.25, 1.0, 3.0}) {
            for (int trial = 0; trial < 8; ++trial) {
                std::vector<double> v(n), c(n);
                for (std::size_t j = 0; j < n; ++j) {
                    v[j] = std::floor(rng.next_double() * 8.0) / 4.0;
                    c[j] = std::floor(rng.next_double() * 8.0) / 4.0;
                    if (rng.next_double() < 0.05) c[j] = kInf;
                }
                std::size_t got = fk::shifted_argmax(v.data(), c.data(), lambda, n);
                std::size_t want = argmax_oracle(v, c, lambda);
                CHECK(got == want);
                CHECK(fk::scalar::shifted_argmax(v.data(), c.data(), lambda, n) == want);
            }
        }
    }
}

#ifdef FAIRTAB_HAVE_AVX2_VARIANTS

TEST_CASE("avx2 reductions agree with scalar to rounding error") {
    if (!fk::cpu_has_avx2()) return;
    fairtab::Rng rng(37);
    for (std::size_t n : kLengths) {
        auto a = random_vec(rng, n, -3.0, 3.0);
        auto b = random_vec(rng, n, -3.0, 3.0);
        CHECK(close(fk::avx2::dot(a.data(), b.data(), n),
                    fk::scalar::dot(a.data(), b.data(), n)));
        CHECK(close(fk::avx2::squared_l2(a.data(), b.data(), n),
                    fk::scalar::squared_l2(a.data(), b.data(), n)));
        CHECK(close(fk::avx2::sum(a.data(), n), fk::scalar::sum(a.data(), n)));
    }
}

TEST_CASE("avx2 axpy is bit-identical to scalar") {
    if (!fk::cpu_has_avx2()) return;
    fairtab::Rng rng(41);
    for (std::size_t n : kLengths) {
        for (double alpha : {0.0, -0.0, 1.0, -1.0, 0.3, 1e-3, 1e8}) {
            auto x = random_vec(rng, n, -5.0, 5.0);
            auto y0 = random_vec(rng, n, -5.0, 5.0);
            auto ys = y0;
            auto yv = y0;
            fk::scalar::axpy(alpha, x.data(), ys.data(), n);
            fk::avx2::axpy(alpha, x.data(), yv.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(same_bits(ys[i], yv[i]));
        }
    }
}

TEST_CASE("avx2 axpy bit-identical on special values") {
    if (!fk::cpu_has_avx2()) return;
    std::vector<double> x = {0.0, -0.0, kInf, -kInf, kNan, 5e-324, -5e-324,
                             1e308, -1e308, 1.0, -1.0, 0.1};
    for (double alpha : {0.0, -0.0, 2.0, -0.5, kInf, kNan}) {
        std::vector<double> ys(x.size(), 1.0);
        std::vector<double> yv(x.size(), 1.0);
        fk::scalar::axpy(alpha, x.data(), ys.data(), x.size());
        fk::avx2::axpy(alpha, x.data(), yv.data(), x.size());
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(same_bits(ys[i], yv[i]));
    }
}

TEST_CASE("avx2 shifted_argmax is exactly equal to scalar") {
    if (!fk::cpu_has_avx2()) return;
    fairtab::Rng rng(53);
    for (std::size_t n : kLengths) {
        for (double lambda : {0.0, 0.25, 1.0, 3.0}) {
            for (int trial = 0; trial < 8; ++trial) {
                std::vector<double> v(n), c(n);
                for (std::size_t j = 0; j < n; ++j) {
                    v[j] = std::floor(rng.next_double() * 8.0) / 4.0;
                    c[j] = std::floor(rng.next_double() * 8.0) / 4.0;
                    double u = rng.next_double();
                    if (u < 0.04) c[j] = kInf;
                    else if (u < 0.08) v[j] = -kInf;
                    else if (u < 0.10) v[j] = kNan;
                }
                CHECK(fk::avx2::shifted_argmax(v.data(), c.data(), lambda, n) ==
                      fk::scalar::shifted_argmax(v.data(), c.data(), lambda, n));
            }
        }
    }
}

TEST_CASE("dispatch reports a valid backend") {
    const char* b = fk::active_backend();
    bool known = std::strcmp(b, "scalar") == 0 || std::strcmp(b, "avx2") == 0;
    CHECK(known);
}

#endif  // FAIRTAB_HAVE_AVX2_VARIANTS
