#pragma once

#include <span>
#include <vector>

#include "efex/belief.hpp"
#include "efex/tensor.hpp"

namespace efex {

struct ViOptions {
  double gamma = 0.9999;
  double tol = 1e-9;
  int max_sweeps = 10000;
  // Shift each Jacobi sweep by gamma/(1-gamma) times the midpoint of the
  // Bellman update's range (MacQueen bounds). Removes the constant error mode,
  // which otherwise decays only by gamma per sweep.
  bool extrapolate = true;
};

struct ViResult {
  std::vector<double> values;
  int sweeps = 0;
  double residual = 0.0;  // max |Bv - v| for the returned v
  bool converged = false;
  std::vector<double> residual_history;
};

// Value iteration for v_z = max_a [(1-gamma) u(z,a) + gamma * tbar_az . v].
// v0 may be empty (zeros). Throws std::invalid_argument unless 0 <= gamma < 1.
ViResult value_iteration(const TransitionTensor& mean, const UtilityTable& u, const ViOptions& options,
                         std::span<const double> v0 = {});
// Same, with tbar taken implicitly as the belief's posterior mean.
ViResult value_iteration(const DirichletBelief& belief, const UtilityTable& u, const ViOptions& options,
                         std::span<const double> v0 = {});

// max |Bv - v|.
double bellman_residual(const TransitionTensor& mean, const UtilityTable& u, double gamma, std::span<const double> v);
double bellman_residual(const DirichletBelief& belief, const UtilityTable& u, double gamma,
                        std::span<const double> v);

// Greedy policy; ties (within 1e-12 relative) go to the lowest action id.
std::vector<int> extract_policy(const TransitionTensor& mean, const UtilityTable& u, double gamma,
                                std::span<const double> v);
std::vector<int> extract_policy(const DirichletBelief& belief, const UtilityTable& u, double gamma,
                                std::span<const double> v);

// Greedy action at a single state.
int greedy_action(const DirichletBelief& belief, const UtilityTable& u, double gamma, std::span<const double> v,
                  int state);

}  // namespace efex
