#pragma once

#include <span>
#include <vector>

#include "efex/tensor.hpp"

namespace efex {

// Expected information gain of one transition draw under t ~ Dir(b):
// H(b / sum b) + sum(b * psi(b + 1)) / sum b - psi(sum b + 1), in nats.
// Throws std::invalid_argument on a nonpositive entry.
double utility(std::span<const double> b);

// Same value for b = counts + alpha over `dim` destinations, where `nonzero`
// lists the entries with counts > 0 and the rest are alpha.
struct SparseCount {
  int destination;
  double count;
};
double utility_sparse(std::span<const SparseCount> nonzero, double alpha, int dim);

// u[z][a], stored row-major by state.
struct UtilityTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> values;

  UtilityTable() = default;
  UtilityTable(int states, int actions, double fill = 0.0)
      : n_states(states), n_actions(actions), values(static_cast<std::size_t>(states) * actions, fill) {}
  double& operator()(int z, int a) { return values[static_cast<std::size_t>(z) * n_actions + a]; }
  double operator()(int z, int a) const { return values[static_cast<std::size_t>(z) * n_actions + a]; }
};

// Symmetric Dirichlet posterior over each transition row: b_az = c_az + alpha.
class DirichletBelief {
 public:
  DirichletBelief(int n_actions, int n_states, double alpha);

  int n_actions() const { return counts_.n_actions(); }
  int n_states() const { return counts_.n_states(); }
  double alpha() const { return alpha_; }
  const CountTensor& counts() const { return counts_; }

  // Replaces all counts (shape must match).
  void set_counts(CountTensor counts);
  void add_count(int a, int z, int z_next, double w = 1.0);
  // Inverse of add_count; throws if the entry holds less than w.
  void remove_count(int a, int z, int z_next, double w = 1.0);

  std::span<const SparseCount> nonzeros(int a, int z) const { return rows_[row_index(a, z)]; }
  double row_total(int a, int z) const { return totals_[row_index(a, z)]; }

  double row_utility(int a, int z) const;
  // E[t_az][z'] = (c + alpha) / (total + alpha * n).
  double mean(int a, int z, int z_next) const;

 private:
  std::size_t row_index(int a, int z) const { return static_cast<std::size_t>(a) * n_states() + z; }
  void rebuild();

  double alpha_;
  CountTensor counts_;
  std::vector<std::vector<SparseCount>> rows_;
  std::vector<double> totals_;
};

// Functional form: a copy of `belief` with its counts replaced.
DirichletBelief update_counts(DirichletBelief belief, CountTensor counts);

UtilityTable utility_table(const DirichletBelief& belief);
TransitionTensor mean_transition(const DirichletBelief& belief);

}  // namespace efex
