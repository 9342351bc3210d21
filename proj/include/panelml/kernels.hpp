#pragma once

#include <cstddef>
#include <string_view>

namespace panelml::kernels {

// Data-parallel inner loops shared by the SVM and MLP trainers. Each has
// a scalar reference implementation and vector variants selected once at
// startup from CPU capabilities; tests check the variants against the
// scalar reference.

/// Sum of a[i]*b[i].
double dot(const double* a, const double* b, std::size_t n);

/// y[i] += alpha * x[i].
void axpy(double alpha, const double* x, double* y, std::size_t n);

/// Sum of x[i].
double sum(const double* x, std::size_t n);

/// Sum of (a[i]-b[i])^2.
double squared_distance(const double* a, const double* b, std::size_t n);

/// Name of the backend currently in use: "scalar", "avx2" or "neon".
std::string_view active_backend();

/// Select a backend by name; returns false if unavailable on this CPU.
bool select_backend(std::string_view name);

namespace detail {
double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
double sum_scalar(const double* x, std::size_t n);
double squared_distance_scalar(const double* a, const double* b, std::size_t n);

#if defined(__x86_64__) || defined(_M_X64)
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
double sum_avx2(const double* x, std::size_t n);
double squared_distance_avx2(const double* a, const double* b, std::size_t n);
#endif
#if defined(__aarch64__)
double dot_neon(const double* a, const double* b, std::size_t n);
void axpy_neon(double alpha, const double* x, double* y, std::size_t n);
double sum_neon(const double* x, std::size_t n);
double squared_distance_neon(const double* a, const double* b, std::size_t n);
#endif
}  // namespace detail

}  // namespace panelml::kernels
