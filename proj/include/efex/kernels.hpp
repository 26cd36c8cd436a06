#pragma once
// Data-parallel inner loops shared by the forward-backward, Viterbi and
// value-iteration code. Every kernel has a scalar reference implementation;
// vector variants (AVX2+FMA on x86-64, NEON on aarch64) are selected once at
// runtime and must agree with the reference (see tests/unit/test_kernels.cpp).

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace efex::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // sum_i x[i]
  double (*sum)(const double* x, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // x[i] *= a
  void (*scale)(double a, double* x, std::size_t n);
  // y[i] += a * x[i] * w[i]
  void (*mul_axpy)(double a, const double* x, const double* w, double* y, std::size_t n);
  // v = base + row[i]; if v > best[i]: best[i] = v, arg[i] = idx.
  // Strict comparison keeps the earliest idx on ties.
  void (*max_plus)(double base, const double* row, double* best, std::int32_t* arg,
                   std::int32_t idx, std::size_t n);
};

const KernelTable& scalar_kernels();

// Table for `isa`, or nullptr when it is not compiled in or the CPU lacks it.
const KernelTable* kernels_for(Isa isa);

// Best available table. EFEX_SIMD=scalar in the environment forces the
// reference kernels.
const KernelTable& kernels();

std::string_view isa_name(Isa isa);

}  // namespace efex::simd
