#include "efex/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace efex {

Tensor3::Tensor3(int n_actions, int n_states, double fill)
    : n_actions_(n_actions), n_states_(n_states) {
  if (n_actions < 0 || n_states < 0) throw std::invalid_argument("Tensor3: negative dimension");
  values_.assign(static_cast<std::size_t>(n_actions) * n_states * n_states, fill);
}

void Tensor3::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

double Tensor3::total() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

double max_row_sum_error(const TransitionTensor& t) {
  double worst = 0.0;
  for (int a = 0; a < t.n_actions(); ++a) {
    for (int z = 0; z < t.n_states(); ++z) {
      const auto r = t.row(a, z);
      worst = std::max(worst, std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0));
    }
  }
  return worst;
}

void require_stochastic(const TransitionTensor& t, double tol, const char* what) {
  if (t.n_actions() < 1 || t.n_states() < 1) {
    throw std::invalid_argument(std::string(what) + ": transition tensor needs at least one action and one state");
  }
  for (double p : t.values()) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + ": probability outside [0,1]");
  }
  if (max_row_sum_error(t) > tol) throw std::invalid_argument(std::string(what) + ": transition row does not sum to 1");
}

void normalize_rows(Tensor3& t) {
  const int n = t.n_states();
  for (int a = 0; a < t.n_actions(); ++a) {
    for (int z = 0; z < n; ++z) {
      auto r = t.row(a, z);
      const double s = std::accumulate(r.begin(), r.end(), 0.0);
      if (s > 0.0) {
        for (double& v : r) v /= s;
      } else {
        std::fill(r.begin(), r.end(), 1.0 / n);
      }
    }
  }
}

}  // namespace efex
