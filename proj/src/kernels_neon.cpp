#include <arm_neon.h>

#include "efex/kernels.hpp"

namespace efex::simd {
namespace {

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
    acc1 = vaddq_f64(acc1, vld1q_f64(x + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

void mul_axpy(double a, const double* x, const double* w, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t ax = vmulq_f64(va, vld1q_f64(x + i));
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), ax, vld1q_f64(w + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i] * w[i];
}

void max_plus(double base, const double* row, double* best, std::int32_t* arg,
              std::int32_t idx, std::size_t n) {
  const float64x2_t vb = vdupq_n_f64(base);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vaddq_f64(vb, vld1q_f64(row + i));
    const float64x2_t cur = vld1q_f64(best + i);
    const uint64x2_t gt = vcgtq_f64(v, cur);
    vst1q_f64(best + i, vbslq_f64(gt, v, cur));
    if (vgetq_lane_u64(gt, 0)) arg[i] = idx;
    if (vgetq_lane_u64(gt, 1)) arg[i + 1] = idx;
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

const KernelTable& neon_kernels() {
  static const KernelTable table{Isa::neon, dot, sum, axpy, scale, mul_axpy, max_plus};
  return table;
}

}  // namespace efex::simd
