#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace efex {

// Dense (action, source, destination) array. Used both for transition
// probabilities P(z'|z,a) and for transition counts c[a][z][z'].
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int n_actions, int n_states, double fill = 0.0);

  int n_actions() const { return n_actions_; }
  int n_states() const { return n_states_; }
  bool empty() const { return values_.empty(); }

  double& operator()(int a, int z, int z_next) { return values_[offset(a, z) + z_next]; }
  double operator()(int a, int z, int z_next) const { return values_[offset(a, z) + z_next]; }

  std::span<double> row(int a, int z) { return {values_.data() + offset(a, z), static_cast<std::size_t>(n_states_)}; }
  std::span<const double> row(int a, int z) const {
    return {values_.data() + offset(a, z), static_cast<std::size_t>(n_states_)};
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  void fill(double v);
  double total() const;

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t offset(int a, int z) const {
    return (static_cast<std::size_t>(a) * n_states_ + z) * n_states_;
  }

  int n_actions_ = 0;
  int n_states_ = 0;
  std::vector<double> values_;
};

using TransitionTensor = Tensor3;
using CountTensor = Tensor3;

// Throws std::invalid_argument unless every row is a probability vector
// (entries in [0,1], sum within `tol` of 1).
void require_stochastic(const TransitionTensor& t, double tol, const char* what);

// Largest |row sum - 1| over all rows.
double max_row_sum_error(const TransitionTensor& t);

// Rows normalized in place; all-zero rows become uniform.
void normalize_rows(Tensor3& t);

}  // namespace efex
