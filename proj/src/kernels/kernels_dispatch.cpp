#include <string>

#include "panelml/kernels.hpp"

namespace panelml::kernels {

namespace {

struct Backend {
    std::string_view name;
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sqdist)(const double*, const double*, std::size_t);
};

constexpr Backend kScalar{"scalar", detail::dot_scalar, detail::axpy_scalar,
                          detail::sum_scalar, detail::squared_distance_scalar};

#if defined(__x86_64__) || defined(_M_X64)
constexpr Backend kAvx2{"avx2", detail::dot_avx2, detail::axpy_avx2,
                        detail::sum_avx2, detail::squared_distance_avx2};
bool avx2_supported() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif
#if defined(__aarch64__)
constexpr Backend kNeon{"neon", detail::dot_neon, detail::axpy_neon,
                        detail::sum_neon, detail::squared_distance_neon};
#endif

Backend pick_default() {
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_supported()) return kAvx2;
#endif
#if defined(__aarch64__)
    return kNeon;
#endif
    return kScalar;
}

Backend g_backend = pick_default();

}  // namespace

std::string_view active_backend() { return g_backend.name; }

bool select_backend(std::string_view name) {
    if (name == "scalar") {
        g_backend = kScalar;
        return true;
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (name == "avx2" && avx2_supported()) {
        g_backend = kAvx2;
        return true;
    }
#endif
#if defined(__aarch64__)
    if (name == "neon") {
        g_backend = kNeon;
        return true;
    }
#endif
    return false;
}

double dot(const double* a, const double* b, std::size_t n) { return g_backend.dot(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { g_backend.axpy(alpha, x, y, n); }
double sum(const double* x, std::size_t n) { return g_backend.sum(x, n); }
double squared_distance(const double* a, const double* b, std::size_t n) { return g_backend.sqdist(a, b, n); }

}  // namespace panelml::kernels
