#include "fairtab/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace fairtab::kernels {

bool cpu_has_avx2() {
#ifdef FAIRTAB_HAVE_AVX2_VARIANTS
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

namespace {

struct Backend {
    const char* name;
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    double (*squared_l2)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    std::size_t (*shifted_argmax)(const double*, const double*, double, std::size_t);
};

constexpr Backend kScalar{"scalar", scalar::dot, scalar::axpy,
                          scalar::squared_l2, scalar::sum,
                          scalar::shifted_argmax};

#ifdef FAIRTAB_HAVE_AVX2_VARIANTS
constexpr Backend kAvx2{"avx2", avx2::dot, avx2::axpy,
                        avx2::squared_l2, avx2::sum, avx2::shifted_argmax};
#endif

const Backend& select_backend() {
    static const Backend& chosen = [] () -> const Backend& {
        const char* env = std::getenv("FAIRTAB_KERNELS");
        if (env != nullptr && std::strcmp(env, "scalar") == 0) return kScalar;
#ifdef FAIRTAB_HAVE_AVX2_VARIANTS
        if (env != nullptr && std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) {
            return kAvx2;
        }
        if (env == nullptr && cpu_has_avx2()) return kAvx2;
#endif
        return kScalar;
    }();
    return chosen;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    return select_backend().dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    select_backend().axpy(alpha, x, y, n);
}

double squared_l2(const double* a, const double* b, std::size_t n) {
    return select_backend().squared_l2(a, b, n);
}

double sum(const double* a, std::size_t n) {
    return select_backend().sum(a, n);
}

std::size_t shifted_argmax(const double* values, const double* costs,
                           double lambda, std::size_t n) {
    return select_backend().shifted_argmax(values, costs, lambda, n);
}

const char* active_backend() { return select_backend().name; }

}  // namespace fairtab::kernels
