#include "mdlae/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace mdlae::kernels {

namespace {

double s_dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double s_sq_dot(const double* w, const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * w[i] * x[i];
  return acc;
}

double s_sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double s_max(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

double s_weighted_sq_diff(const double* a, const double* b, const double* w,
                          std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += w[i] * (d * d);
  }
  return acc;
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_sq_axpy(double alpha, const double* w, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * (w[i] * w[i]);
}

void s_acc_sq_diff(const double* a, const double* b, double* acc,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc[i] += d * d;
  }
}

void s_mul_scaled_add(double c1, const double* x, const double* y, double c2,
                      const double* z, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = c1 * (x[i] * y[i]) + c2 * z[i];
}

const Ops g_scalar = {
    s_dot,  s_sq_dot,  s_sum,         s_max,           s_weighted_sq_diff,
    s_axpy, s_sq_axpy, s_acc_sq_diff, s_mul_scaled_add,
};

const Ops* g_active = nullptr;

const Ops* pick_default() {
  if (const char* env = std::getenv("MDLAE_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
    if (std::strcmp(env, "avx2") == 0) return &avx2_ops();
    throw std::runtime_error("MDLAE_KERNELS: unknown backend");
  }
  if (avx2_supported()) return &avx2_ops();
  return &scalar_ops();
}

}  // namespace

const Ops& scalar_ops() { return g_scalar; }

#if !defined(MDLAE_HAVE_AVX2_TU)
bool avx2_supported() { return false; }
const Ops& avx2_ops() {
  throw std::runtime_error("avx2 kernels not built on this target");
}
#endif

const Ops& active() {
  if (!g_active) g_active = pick_default();
  return *g_active;
}

Backend active_backend() {
  return &active() == &g_scalar ? Backend::scalar : Backend::avx2;
}

void set_backend(Backend b) {
  g_active = (b == Backend::scalar) ? &scalar_ops() : &avx2_ops();
}

}  // namespace mdlae::kernels
