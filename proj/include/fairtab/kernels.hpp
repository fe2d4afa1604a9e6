#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops used by the hot paths: pairwise-distance audits,
// network forward/backward passes, and the per-row scans of the transport
// adversary. Each kernel has a scalar reference implementation and, on x86,
// an AVX2 variant; the dispatched entry points pick one at process start
// based on CPUID (override with FAIRTAB_KERNELS=scalar|avx2).
//
// Contract between variants:
//   - axpy and shifted-argmax are elementwise (no fma, no reassociation) and
//     must match the scalar reference bit for bit.
//   - dot / squared_l2 / sum are reductions; variants may reassociate and use
//     fma, so they agree with the reference only to rounding error.

namespace fairtab::kernels {

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);

// sum_i (a[i] - b[i])^2
double squared_l2(const double* a, const double* b, std::size_t n);

double sum(const double* a, std::size_t n);

// argmax_j of values[j] - lambda * costs[j], ties broken toward the lowest
// index. Entries whose score is NaN or that never exceed the running best
// (e.g. -inf from an infinite cost) are skipped; returns npos if nothing is
// selectable. Scores follow IEEE semantics, so lambda == 0 with an infinite
// cost yields NaN and excludes the entry.
inline constexpr std::size_t npos = static_cast<std::size_t>(-1);
std::size_t shifted_argmax(const double* values, const double* costs,
                           double lambda, std::size_t n);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double squared_l2(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
std::size_t shifted_argmax(const double* values, const double* costs,
                           double lambda, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define FAIRTAB_HAVE_AVX2_VARIANTS 1
namespace avx2 {
// Call only when cpu_has_avx2() is true.
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double squared_l2(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
std::size_t shifted_argmax(const double* values, const double* costs,
                           double lambda, std::size_t n);
}  // namespace avx2
#endif

bool cpu_has_avx2();

// Name of the variant behind the dispatched entry points ("scalar"/"avx2").
const char* active_backend();

}  // namespace fairtab::kernels
