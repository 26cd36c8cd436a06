#include "efex/kernels.hpp"

namespace efex::simd {
namespace {

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void mul_axpy(double a, const double* x, const double* w, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i] * w[i];
}

void max_plus(double base, const double* row, double* best, std::int32_t* arg,
              std::int32_t idx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = base + row[i];
    if (v > best[i]) {
      best[i] = v;
      arg[i] = idx;
    }
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar, dot, sum, axpy, scale, mul_axpy, max_plus};
  return table;
}

}  // namespace efex::simd
