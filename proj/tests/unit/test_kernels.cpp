#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "efex/kernels.hpp"

using namespace efex::simd;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

std::vector<const KernelTable*> vector_tables() {
  std::vector<const KernelTable*> out;
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (const KernelTable* t = kernels_for(isa)) out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("scalar kernels compute their definitions") {
  const KernelTable& k = scalar_kernels();
  const std::vector<double> x = {1, 2, 3}, y = {4, 5, 6};
  CHECK(k.dot(x.data(), y.data(), 3) == 32.0);
  CHECK(k.sum(x.data(), 3) == 6.0);
  std::vector<double> z = y;
  k.axpy(2.0, x.data(), z.data(), 3);
  CHECK(z == std::vector<double>{6, 9, 12});
  k.scale(0.5, z.data(), 3);
  CHECK(z == std::vector<double>{3, 4.5, 6});
  k.mul_axpy(2.0, x.data(), y.data(), z.data(), 3);
  CHECK(z == std::vector<double>{11, 24.5, 42});
  std::vector<double> best = {0.0, 10.0, -1.0};
  std::vector<std::int32_t> arg = {-1, -1, -1};
  const std::vector<double> row = {1.0, 1.0, -1.0};
  k.max_plus(0.0, row.data(), best.data(), arg.data(), 7, 3);
  CHECK(best == std::vector<double>{1.0, 10.0, -1.0});
  CHECK(arg == std::vector<std::int32_t>{7, -1, -1});  // tie at index 2 keeps the old arg
}

TEST_CASE("dispatch honours the table contract") {
  const KernelTable& k = kernels();
  CHECK(kernels_for(k.isa) != nullptr);
  CHECK(kernels_for(Isa::scalar) == &scalar_kernels());
}

TEST_CASE("vector kernels agree with the scalar reference") {
  const KernelTable& ref = scalar_kernels();
  std::mt19937_64 rng(42);
  for (const KernelTable* t : vector_tables()) {
    CAPTURE(isa_name(t->isa));
    for (std::size_t n = 0; n <= 67; ++n) {
      CAPTURE(n);
      const auto x = random_vec(rng, n), y = random_vec(rng, n), w = random_vec(rng, n, 0.0, 2.0);
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(x[i] * y[i]);
      CHECK(std::abs(t->dot(x.data(), y.data(), n) - ref.dot(x.data(), y.data(), n)) <= 1e-14 * (mag + 1.0));
      double smag = 0.0;
      for (double v : x) smag += std::abs(v);
      CHECK(std::abs(t->sum(x.data(), n) - ref.sum(x.data(), n)) <= 1e-14 * (smag + 1.0));

      // Element-wise kernels: FMA may differ from mul-then-add by one rounding.
      auto y1 = y, y2 = y;
      t->axpy(0.37, x.data(), y1.data(), n);
      ref.axpy(0.37, x.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));
      y1 = y;
      y2 = y;
      t->scale(-1.25, y1.data(), n);
      ref.scale(-1.25, y2.data(), n);
      CHECK(y1 == y2);
      y1 = y;
      y2 = y;
      t->mul_axpy(0.5, x.data(), w.data(), y1.data(), n);
      ref.mul_axpy(0.5, x.data(), w.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));

      // max_plus is exact, including tie handling.
      auto row = random_vec(rng, n);
      for (std::size_t i = 0; i < n; i += 3) row[i] = 0.25;  // ties with best below
      std::vector<double> b1(n, 0.25), b2(n, 0.25);
      for (std::size_t i = 1; i < n; i += 4) b1[i] = b2[i] = -0.5;
      std::vector<std::int32_t> a1(n, -1), a2(n, -1);
      t->max_plus(0.0, row.data(), b1.data(), a1.data(), 5, n);
      ref.max_plus(0.0, row.data(), b2.data(), a2.data(), 5, n);
      CHECK(b1 == b2);
      CHECK(a1 == a2);
    }
  }
}
