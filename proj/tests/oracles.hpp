#pragma once

// Slow reference implementations used only by tests. None of them share code
// with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "efex/cscg.hpp"
#include "efex/tensor.hpp"

namespace oracle {

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// Calls f(path) for every clone sequence consistent with the observations.
template <class F>
void for_each_path(const efex::CloneAllocation& alloc, const efex::Trajectory& traj, F&& f) {
  const std::size_t n = traj.size();
  std::vector<int> path(n);
  for (std::size_t i = 0; i < n; ++i) path[i] = alloc.begin(traj.observations[i]);
  for (;;) {
    f(path);
    std::size_t i = n;
    for (;;) {
      if (i == 0) return;
      --i;
      if (path[i] + 1 < alloc.end(traj.observations[i])) {
        ++path[i];
        break;
      }
      path[i] = alloc.begin(traj.observations[i]);
    }
  }
}

// log P(x, path) with each episode restarting from the initial distribution.
inline double path_log_prob(const efex::LearnedModel& m, const efex::Trajectory& traj, const std::vector<int>& path) {
  double lp = 0.0;
  std::size_t e = 0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (e < traj.episode_starts.size() && traj.episode_starts[e] == i) {
      lp += std::log(m.initial[path[i]]);
      ++e;
    } else {
      lp += std::log(m.transition(traj.actions[i - 1], path[i - 1], path[i]));
    }
  }
  return lp;
}

inline double brute_log_likelihood(const efex::LearnedModel& m, const efex::CloneAllocation& alloc,
                                   const efex::Trajectory& traj) {
  std::vector<double> terms;
  for_each_path(alloc, traj, [&](const std::vector<int>& p) { terms.push_back(path_log_prob(m, traj, p)); });
  return log_sum_exp(terms);
}

inline double brute_viterbi_score(const efex::LearnedModel& m, const efex::CloneAllocation& alloc,
                                  const efex::Trajectory& traj) {
  double best = -std::numeric_limits<double>::infinity();
  for_each_path(alloc, traj, [&](const std::vector<int>& p) { best = std::max(best, path_log_prob(m, traj, p)); });
  return best;
}

// Monte Carlo estimate of E_{t ~ Dir(b)} KL(t || mean(b)) = H(mean) - E[H(t)].
struct McEstimate {
  double mean;
  double se;
};
inline McEstimate mc_dirichlet_information(const std::vector<double>& b, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (double x : b) total += x;
  double h_mean = 0.0;
  for (double x : b) {
    const double p = x / total;
    if (p > 0.0) h_mean -= p * std::log(p);
  }
  std::vector<std::gamma_distribution<double>> gammas;
  for (double x : b) gammas.emplace_back(x, 1.0);
  std::vector<double> g(b.size());
  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < samples; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) sum += (g[i] = gammas[i](rng));
    double h = 0.0;
    for (double gi : g) {
      const double p = gi / sum;
      if (p > 0.0) h -= p * std::log(p);
    }
    const double v = h_mean - h;
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / samples;
  const double var = std::max(0.0, s2 / samples - mean * mean) * samples / (samples - 1.0);
  return {mean, std::sqrt(var / samples)};
}

// Dense Gaussian elimination with partial pivoting; solves A x = y in place.
inline std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> y) {
  const std::size_t n = y.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(y[c], y[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      y[r] -= f * y[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

// Optimal values of v = max_a [(1-g) u(z,a) + g t_az . v] by evaluating every
// deterministic policy exactly and taking the statewise maximum.
inline std::vector<double> optimal_values_by_enumeration(const efex::TransitionTensor& t,
                                                         const std::vector<std::vector<double>>& u, double gamma) {
  const int ns = t.n_states(), na = t.n_actions();
  std::vector<int> pi(ns, 0);
  std::vector<double> best(ns, -std::numeric_limits<double>::infinity());
  for (;;) {
    std::vector<std::vector<double>> a(ns, std::vector<double>(ns, 0.0));
    std::vector<double> y(ns);
    for (int z = 0; z < ns; ++z) {
      a[z][z] = 1.0;
      for (int d = 0; d < ns; ++d) a[z][d] -= gamma * t(pi[z], z, d);
      y[z] = (1.0 - gamma) * u[z][pi[z]];
    }
    const auto v = solve(a, y);
    for (int z = 0; z < ns; ++z) best[z] = std::max(best[z], v[z]);
    int z = 0;
    while (z < ns && ++pi[z] == na) pi[z++] = 0;
    if (z == ns) break;
  }
  return best;
}

}  // namespace oracle
