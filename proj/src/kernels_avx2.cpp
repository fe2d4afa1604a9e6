#include "fairtab/kernels.hpp"

#ifdef FAIRTAB_HAVE_AVX2_VARIANTS

#include <immintrin.h>

#include <limits>

// AVX2 variants, compiled with function-level target attributes so the rest
// of the binary stays generic. Reductions use fma and four independent
// accumulators; axpy and shifted_argmax keep the scalar operation order
// (mul then add/sub) so they round exactly like the reference.

namespace fairtab::kernels::avx2 {

namespace {

__attribute__((target("avx2")))
inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

__attribute__((target("avx2,fma")))
double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double r = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

__attribute__((target("avx2")))
void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

__attribute__((target("avx2,fma")))
double squared_l2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    }
    double r = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        double d = a[i] - b[i];
        r += d * d;
    }
    return r;
}

__attribute__((target("avx2")))
double sum(const double* a, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
    double r = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) r += a[i];
    return r;
}

__attribute__((target("avx2")))
std::size_t shifted_argmax(const double* values, const double* costs,
                           double lambda, std::size_t n) {
    if (n < 8) return scalar::shifted_argmax(values, costs, lambda, n);

    const __m256d lam = _mm256_set1_pd(lambda);
    __m256d best = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    __m256d best_idx = _mm256_set1_pd(-1.0);
    __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
    const __m256d four = _mm256_set1_pd(4.0);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d score = _mm256_sub_pd(_mm256_loadu_pd(values + i),
                                      _mm256_mul_pd(lam, _mm256_loadu_pd(costs + i)));
        // strict > keeps the earliest index within each lane; NaN never wins
        __m256d mask = _mm256_cmp_pd(score, best, _CMP_GT_OQ);
        best = _mm256_blendv_pd(best, score, mask);
        best_idx = _mm256_blendv_pd(best_idx, idx, mask);
        idx = _mm256_add_pd(idx, four);
    }

    alignas(32) double lane_score[4];
    alignas(32) double lane_idx[4];
    _mm256_store_pd(lane_score, best);
    _mm256_store_pd(lane_idx, best_idx);

    double best_s = -std::numeric_limits<double>::infinity();
    std::size_t best_i = npos;
    for (int lane = 0; lane < 4; ++lane) {
        if (lane_idx[lane] < 0.0) continue;
        auto cand = static_cast<std::size_t>(lane_idx[lane]);
        if (lane_score[lane] > best_s ||
            (lane_score[lane] == best_s && cand < best_i)) {
            best_s = lane_score[lane];
            best_i = cand;
        }
    }
    // tail indices are all larger, so strict > preserves the tie rule
    for (; i < n; ++i) {
        double s = values[i] - lambda * costs[i];
        if (s > best_s) {
            best_s = s;
            best_i = i;
        }
    }
    return best_i;
}

}  // namespace fairtab::kernels::avx2

#endif  // FAIRTAB_HAVE_AVX2_VARIANTS
