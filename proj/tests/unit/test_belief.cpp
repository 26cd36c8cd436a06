#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "../oracles.hpp"
#include "efex/belief.hpp"
#include "efex/special.hpp"

using efex::DirichletBelief;
using efex::utility;

namespace {

// H(E[t]) - E[H(t)] with E[H(t)] = psi(1 + S) - sum_i (b_i / S) psi(1 + b_i).
double utility_by_entropies(const std::vector<double>& b) {
  double s = 0.0;
  for (double x : b) s += x;
  double h = 0.0, eh = efex::digamma(1.0 + s);
  for (double x : b) {
    h -= (x / s) * std::log(x / s);
    eh -= (x / s) * efex::digamma(1.0 + x);
  }
  return h - eh;
}

}  // namespace

TEST_CASE("utility hand values") {
  const std::vector<double> b11 = {1.0, 1.0}, b22 = {2.0, 2.0};
  CHECK(std::abs(utility(b11) - (std::log(2.0) - 0.5)) < 1e-12);
  CHECK(std::abs(utility(b22) - (std::log(2.0) - 7.0 / 12.0)) < 1e-12);
}

TEST_CASE("utility hand values agree with Monte Carlo") {
  const std::vector<double> b11 = {1.0, 1.0}, b22 = {2.0, 2.0};
  for (const auto* b : {&b11, &b22}) {
    const auto mc = oracle::mc_dirichlet_information(*b, 200000, 11);
    CHECK(std::abs(utility(*b) - mc.mean) < 3.0 * mc.se);
  }
}

TEST_CASE("utility matches the entropy decomposition") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> entry(0.001, 30.0);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> b(dim(rng));
    for (double& x : b) x = entry(rng);
    CHECK(utility(b) == doctest::Approx(std::max(0.0, utility_by_entropies(b))).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("utility properties") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> entry(0.01, 20.0);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> b(2 + k % 9);
    for (double& x : b) x = entry(rng);
    const double u = utility(b);
    CHECK(u >= 0.0);
    auto p = b;
    std::shuffle(p.begin(), p.end(), rng);
    CHECK(utility(p) == doctest::Approx(u).epsilon(1e-13));
  }
  // Concentrating counts on one entry drives the utility to zero monotonically.
  double prev = 1e9;
  for (double kappa = 1.0; kappa <= 1e6; kappa *= 10.0) {
    const std::vector<double> b = {kappa + 2e-3, 2e-3, 2e-3, 2e-3};
    const double u = utility(b);
    CHECK(u < prev);
    prev = u;
  }
  CHECK(prev < 1e-5);
  CHECK_THROWS(utility(std::vector<double>{1.0, 0.0}));
}

TEST_CASE("sparse utility equals dense utility") {
  const double alpha = 2e-3;
  const int dim = 9;
  std::vector<efex::SparseCount> nz = {{1, 3.0}, {4, 1.0}, {8, 10.0}};
  std::vector<double> dense(dim, alpha);
  for (const auto& e : nz) dense[e.destination] += e.count;
  CHECK(efex::utility_sparse(nz, alpha, dim) == doctest::Approx(utility(dense)).epsilon(1e-13));
  CHECK(efex::utility_sparse({}, alpha, dim) == doctest::Approx(utility(std::vector<double>(dim, alpha))).epsilon(1e-13));
}

TEST_CASE("belief bookkeeping") {
  DirichletBelief b(2, 4, 0.5);
  const double prior = b.row_utility(0, 0);
  b.add_count(1, 2, 3);
  b.add_count(1, 2, 3);
  b.add_count(1, 2, 0, 0.5);
  CHECK(b.row_total(1, 2) == 2.5);
  CHECK(b.nonzeros(1, 2).size() == 2);
  CHECK(b.nonzeros(1, 2)[0].destination == 0);
  CHECK(b.mean(1, 2, 3) == doctest::Approx(2.5 / 4.5));
  double s = 0.0;
  for (int d = 0; d < 4; ++d) s += b.mean(1, 2, d);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  // Untouched rows keep the prior constant.
  CHECK(b.row_utility(0, 1) == prior);
  CHECK(b.row_utility(1, 2) != prior);

  // Incremental updates agree with a full replacement.
  DirichletBelief c = efex::update_counts(DirichletBelief(2, 4, 0.5), b.counts());
  CHECK(c.counts() == b.counts());
  CHECK(c.row_utility(1, 2) == doctest::Approx(b.row_utility(1, 2)).epsilon(1e-15));

  b.remove_count(1, 2, 0, 0.5);
  CHECK(b.nonzeros(1, 2).size() == 1);
  CHECK(b.row_total(1, 2) == 2.0);
  CHECK_THROWS(b.remove_count(1, 2, 0));
  CHECK_THROWS(b.add_count(2, 0, 0));
}

TEST_CASE("huge one-hot count kills only its own entry") {
  DirichletBelief b(2, 6, 2e-3);
  const double prior = b.row_utility(0, 0);
  b.add_count(0, 3, 1, 1e6);
  const auto u = efex::utility_table(b);
  CHECK(u(3, 0) < 1e-5);
  for (int z = 0; z < 6; ++z) {
    for (int a = 0; a < 2; ++a) {
      if (z != 3 || a != 0) CHECK(u(z, a) == prior);
    }
  }
}

TEST_CASE("counts from a short decode change only the visited rows") {
  DirichletBelief b(2, 3, 1e-3);
  const auto before = efex::utility_table(b);
  // 3-step decode 0 -a1-> 2 -a0-> 1.
  efex::CountTensor c(2, 3, 0.0);
  c(1, 0, 2) = 1.0;
  c(0, 2, 1) = 1.0;
  b.set_counts(c);
  const auto after = efex::utility_table(b);
  for (int z = 0; z < 3; ++z) {
    for (int a = 0; a < 2; ++a) {
      const bool touched = (z == 0 && a == 1) || (z == 2 && a == 0);
      CHECK((after(z, a) != before(z, a)) == touched);
    }
  }
  const auto mean = efex::mean_transition(b);
  CHECK(efex::max_row_sum_error(mean) < 1e-14);
}
