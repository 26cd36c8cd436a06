#include "efex/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "efex/kernels.hpp"

namespace efex {
namespace {

constexpr double kTieTolerance = 1e-12;

class DenseRows {
 public:
  explicit DenseRows(const TransitionTensor& t) : t_(t), k_(simd::kernels()) {}
  int n_actions() const { return t_.n_actions(); }
  int n_states() const { return t_.n_states(); }
  void prepare(std::span<const double>) {}
  double expect(int a, int z, const double* v) const { return k_.dot(t_.row(a, z).data(), v, t_.n_states()); }

 private:
  const TransitionTensor& t_;
  const simd::KernelTable& k_;
};

// Posterior mean as sparse counts plus a uniform alpha component:
// tbar . v = (sum_k c_k v_k + alpha * sum(v)) / (total + alpha * n).
class DirichletRows {
 public:
  explicit DirichletRows(const DirichletBelief& b) : b_(b) {}
  int n_actions() const { return b_.n_actions(); }
  int n_states() const { return b_.n_states(); }
  void prepare(std::span<const double> v) { alpha_sum_ = b_.alpha() * std::accumulate(v.begin(), v.end(), 0.0); }
  double expect(int a, int z, const double* v) const {
    double acc = alpha_sum_;
    for (const auto& e : b_.nonzeros(a, z)) acc += e.count * v[e.destination];
    return acc / (b_.row_total(a, z) + b_.alpha() * b_.n_states());
  }

 private:
  const DirichletBelief& b_;
  double alpha_sum_ = 0.0;
};

void check_shapes(int n_actions, int n_states, const UtilityTable& u, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("value iteration: gamma must be in [0,1)");
  if (u.n_states != n_states || u.n_actions != n_actions) throw std::invalid_argument("utility table shape mismatch");
}

template <class Rows>
double action_value(const Rows& rows, const UtilityTable& u, double gamma, const double* v, int z, int a) {
  return (1.0 - gamma) * u(z, a) + gamma * rows.expect(a, z, v);
}

template <class Rows>
int best_action(const Rows& rows, const UtilityTable& u, double gamma, const double* v, int z, double* value) {
  int best = 0;
  double q_best = action_value(rows, u, gamma, v, z, 0);
  for (int a = 1; a < rows.n_actions(); ++a) {
    const double q = action_value(rows, u, gamma, v, z, a);
    if (q > q_best + kTieTolerance * std::abs(q_best)) {
      best = a;
      q_best = q;
    }
  }
  if (value != nullptr) *value = q_best;
  return best;
}

// One Bellman application. Returns (min, max) of bv - v.
template <class Rows>
std::pair<double, double> bellman(Rows& rows, const UtilityTable& u, double gamma, std::span<const double> v,
                                  std::vector<double>& bv) {
  rows.prepare(v);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int z = 0; z < rows.n_states(); ++z) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < rows.n_actions(); ++a) best = std::max(best, action_value(rows, u, gamma, v.data(), z, a));
    bv[z] = best;
    lo = std::min(lo, best - v[z]);
    hi = std::max(hi, best - v[z]);
  }
  return {lo, hi};
}

template <class Rows>
ViResult run_vi(Rows rows, const UtilityTable& u, const ViOptions& options, std::span<const double> v0) {
  const int n = rows.n_states();
  check_shapes(rows.n_actions(), n, u, options.gamma);
  if (!v0.empty() && static_cast<int>(v0.size()) != n) throw std::invalid_argument("value iteration: v0 size mismatch");
  if (options.max_sweeps < 1) throw std::invalid_argument("value iteration: max_sweeps must be >= 1");

  ViResult r;
  r.values.assign(n, 0.0);
  if (!v0.empty()) std::copy(v0.begin(), v0.end(), r.values.begin());
  std::vector<double> bv(n);
  const double g = options.gamma;
  const double lift = options.extrapolate ? g / (1.0 - g) : 0.0;
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    const auto [lo, hi] = bellman(rows, u, g, r.values, bv);
    r.sweeps = sweep;
    r.residual = std::max(std::abs(lo), std::abs(hi));
    r.residual_history.push_back(r.residual);
    const double shift = lift * 0.5 * (lo + hi);
    if (r.residual < options.tol) {
      // Keep the final update too: its error bound is gamma times smaller.
      for (int z = 0; z < n; ++z) r.values[z] = bv[z] + shift;
      const auto [lo2, hi2] = bellman(rows, u, g, r.values, bv);
      r.residual = std::max(std::abs(lo2), std::abs(hi2));
      r.residual_history.push_back(r.residual);
      r.converged = true;
      break;
    }
    for (int z = 0; z < n; ++z) r.values[z] = bv[z] + shift;
  }
  if (!r.converged) {
    // The loop left r.values one update past the last measured residual.
    const auto [lo, hi] = bellman(rows, u, g, r.values, bv);
    r.residual = std::max(std::abs(lo), std::abs(hi));
    r.converged = r.residual < options.tol;
  }
  return r;
}

template <class Rows>
double residual_of(Rows rows, const UtilityTable& u, double gamma, std::span<const double> v) {
  check_shapes(rows.n_actions(), rows.n_states(), u, gamma);
  if (static_cast<int>(v.size()) != rows.n_states()) throw std::invalid_argument("bellman_residual: size mismatch");
  std::vector<double> bv(v.size());
  const auto [lo, hi] = bellman(rows, u, gamma, v, bv);
  return std::max(std::abs(lo), std::abs(hi));
}

template <class Rows>
std::vector<int> policy_of(Rows rows, const UtilityTable& u, double gamma, std::span<const double> v) {
  check_shapes(rows.n_actions(), rows.n_states(), u, gamma);
  if (static_cast<int>(v.size()) != rows.n_states()) throw std::invalid_argument("extract_policy: size mismatch");
  rows.prepare(v);
  std::vector<int> pi(v.size());
  for (int z = 0; z < rows.n_states(); ++z) pi[z] = best_action(rows, u, gamma, v.data(), z, nullptr);
  return pi;
}

}  // namespace

ViResult value_iteration(const TransitionTensor& mean, const UtilityTable& u, const ViOptions& options,
                         std::span<const double> v0) {
  return run_vi(DenseRows(mean), u, options, v0);
}

ViResult value_iteration(const DirichletBelief& belief, const UtilityTable& u, const ViOptions& options,
                         std::span<const double> v0) {
  return run_vi(DirichletRows(belief), u, options, v0);
}

double bellman_residual(const TransitionTensor& mean, const UtilityTable& u, double gamma, std::span<const double> v) {
  return residual_of(DenseRows(mean), u, gamma, v);
}

double bellman_residual(const DirichletBelief& belief, const UtilityTable& u, double gamma,
                        std::span<const double> v) {
  return residual_of(DirichletRows(belief), u, gamma, v);
}

std::vector<int> extract_policy(const TransitionTensor& mean, const UtilityTable& u, double gamma,
                                std::span<const double> v) {
  return policy_of(DenseRows(mean), u, gamma, v);
}

std::vector<int> extract_policy(const DirichletBelief& belief, const UtilityTable& u, double gamma,
                                std::span<const double> v) {
  return policy_of(DirichletRows(belief), u, gamma, v);
}

int greedy_action(const DirichletBelief& belief, const UtilityTable& u, double gamma, std::span<const double> v,
                  int state) {
  DirichletRows rows(belief);
  check_shapes(rows.n_actions(), rows.n_states(), u, gamma);
  rows.prepare(v);
  return best_action(rows, u, gamma, v.data(), state, nullptr);
}

}  // namespace efex
