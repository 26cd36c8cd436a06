// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "efex/kernels.hpp"

namespace efex::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

void mul_axpy(double a, const double* x, const double* w, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ax = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(ax, _mm256_loadu_pd(w + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i] * w[i];
}

void max_plus(double base, const double* row, double* best, std::int32_t* arg,
              std::int32_t idx, std::size_t n) {
  const __m256d vb = _mm256_set1_pd(base);
  const __m128i vidx = _mm_set1_epi32(idx);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_add_pd(vb, _mm256_loadu_pd(row + i));
    const __m256d cur = _mm256_loadu_pd(best + i);
    const __m256d gt = _mm256_cmp_pd(v, cur, _CMP_GT_OQ);
    const int mask = _mm256_movemask_pd(gt);
    if (mask == 0) continue;
    _mm256_storeu_pd(best + i, _mm256_blendv_pd(cur, v, gt));
    // Narrow the 64-bit lane mask to 32-bit lanes for the index blend.
    const __m256i pick_low = _mm256_setr_epi32(0, 2, 4, 6, 0, 2, 4, 6);
    const __m128i gt32 = _mm256_castsi256_si128(
        _mm256_permutevar8x32_epi32(_mm256_castpd_si256(gt), pick_low));
    const __m128i old = _mm_loadu_si128(reinterpret_cast<const __m128i*>(arg + i));
    const __m128i sel = _mm_blendv_epi8(old, vidx, gt32);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(arg + i), sel);
  }
  for (; i < n; ++i) {
    const double v = base + row[i];
    if (v > best[i]) {
      best[i] = v;
      arg[i] = idx;
    }
  }
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{Isa::avx2, dot, sum, axpy, scale, mul_axpy, max_plus};
  return table;
}

}  // namespace efex::simd
