#pragma once

#include <cstddef>

// Data-parallel primitives behind the graph engine and the bound evaluators.
// Every kernel has a scalar reference implementation; on x86 an AVX2 variant
// is selected at runtime when the CPU supports it.  Elementwise kernels are
// written so both backends produce bitwise identical results; reductions use
// multiple accumulators in the vector backend and agree with the reference
// only up to rounding, which the equivalence tests pin down.

namespace mdlae::kernels {

enum class Backend { scalar, avx2 };

struct Ops {
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // sum_i w[i]^2 * x[i]
  double (*sq_dot)(const double* w, const double* x, std::size_t n);
  // sum_i x[i]
  double (*sum)(const double* x, std::size_t n);
  // max_i x[i], n >= 1
  double (*max)(const double* x, std::size_t n);
  // sum_i w[i] * (a[i] - b[i])^2
  double (*weighted_sq_diff)(const double* a, const double* b, const double* w,
                             std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[i] += alpha * w[i]^2
  void (*sq_axpy)(double alpha, const double* w, double* y, std::size_t n);
  // acc[i] += (a[i] - b[i])^2
  void (*acc_sq_diff)(const double* a, const double* b, double* acc,
                      std::size_t n);
  // out[i] = c1 * x[i] * y[i] + c2 * z[i]
  void (*mul_scaled_add)(double c1, const double* x, const double* y,
                         double c2, const double* z, double* out,
                         std::size_t n);
};

const Ops& scalar_ops();
bool avx2_supported();
const Ops& avx2_ops();  // throws std::runtime_error when unsupported

// Dispatched table.  The backend is picked once per process: explicit
// set_backend() wins, otherwise the MDLAE_KERNELS environment variable
// ("scalar" or "avx2"), otherwise CPU detection.
const Ops& active();
Backend active_backend();
void set_backend(Backend b);

inline double dot(const double* x, const double* y, std::size_t n) {
  return active().dot(x, y, n);
}
inline double sq_dot(const double* w, const double* x, std::size_t n) {
  return active().sq_dot(w, x, n);
}
inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }
inline double max(const double* x, std::size_t n) { return active().max(x, n); }
inline double weighted_sq_diff(const double* a, const double* b,
                               const double* w, std::size_t n) {
  return active().weighted_sq_diff(a, b, w, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void sq_axpy(double alpha, const double* w, double* y, std::size_t n) {
  active().sq_axpy(alpha, w, y, n);
}
inline void acc_sq_diff(const double* a, const double* b, double* acc,
                        std::size_t n) {
  active().acc_sq_diff(a, b, acc, n);
}
inline void mul_scaled_add(double c1, const double* x, const double* y,
                           double c2, const double* z, double* out,
                           std::size_t n) {
  active().mul_scaled_add(c1, x, y, c2, z, out, n);
}

}  // namespace mdlae::kernels
