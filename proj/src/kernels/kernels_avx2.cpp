// AVX2 kernel variants.  Compiled with -mavx2 in its own translation unit;
// only reached through the dispatch table after a cpuid check.
//
// Elementwise kernels deliberately use separate mul/add (no FMA) so the
// results match the scalar reference bit for bit.  Reductions accumulate in
// four lanes and therefore reassociate; they are compared against the
// reference under a small relative tolerance instead.

#include "mdlae/kernels.hpp"

#if defined(MDLAE_HAVE_AVX2_TU)

#include <immintrin.h>

namespace mdlae::kernels {

namespace {

inline double hsum256_pd(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double v_dot(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vy = _mm256_loadu_pd(y + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(vx, vy));
  }
  double r = hsum256_pd(acc);
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

double v_sq_dot(const double* w, const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vw = _mm256_loadu_pd(w + i);
    __m256d vx = _mm256_loadu_pd(x + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_mul_pd(vw, vw), vx));
  }
  double r = hsum256_pd(acc);
  for (; i < n; ++i) r += w[i] * w[i] * x[i];
  return r;
}

double v_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double r = hsum256_pd(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

double v_max(const double* x, std::size_t n) {
  std::size_t i = 0;
  double r = x[0];
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4)
      acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    lo = _mm_max_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    r = _mm_cvtsd_f64(_mm_max_sd(lo, swapped));
  }
  for (; i < n; ++i)
    if (x[i] > r) r = x[i];
  return r;
}

double v_weighted_sq_diff(const double* a, const double* b, const double* w,
                          std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    __m256d sq = _mm256_mul_pd(d, d);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w + i), sq));
  }
  double r = hsum256_pd(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    r += w[i] * (d * d);
  }
  return r;
}

void v_axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void v_sq_axpy(double alpha, const double* w, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vw = _mm256_loadu_pd(w + i);
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_mul_pd(vw, vw)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * (w[i] * w[i]);
}

void v_acc_sq_diff(const double* a, const double* b, double* acc,
                   std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    __m256d v = _mm256_loadu_pd(acc + i);
    _mm256_storeu_pd(acc + i, _mm256_add_pd(v, _mm256_mul_pd(d, d)));
  }
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    acc[i] += d * d;
  }
}

void v_mul_scaled_add(double c1, const double* x, const double* y, double c2,
                      const double* z, double* out, std::size_t n) {
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vc2 = _mm256_set1_pd(c2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xy = _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    __m256d t = _mm256_mul_pd(vc1, xy);
    t = _mm256_add_pd(t, _mm256_mul_pd(vc2, _mm256_loadu_pd(z + i)));
    _mm256_storeu_pd(out + i, t);
  }
  for (; i < n; ++i) out[i] = c1 * (x[i] * y[i]) + c2 * z[i];
}

const Ops g_avx2 = {
    v_dot,  v_sq_dot,  v_sum,         v_max,           v_weighted_sq_diff,
    v_axpy, v_sq_axpy, v_acc_sq_diff, v_mul_scaled_add,
};

}  // namespace

bool avx2_supported() { return __builtin_cpu_supports("avx2"); }

const Ops& avx2_ops() { return g_avx2; }

}  // namespace mdlae::kernels

#endif  // MDLAE_HAVE_AVX2_TU
