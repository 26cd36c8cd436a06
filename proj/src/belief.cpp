#include "efex/belief.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "efex/special.hpp"

namespace efex {
namespace {

// b * (psi(b + 1) - log b): the per-entry term of the rearranged utility
//   u = log S - psi(S + 1) + (1/S) sum_i b_i (psi(b_i + 1) - log b_i).
double entry_term(double b) { return b * (digamma(b + 1.0) - std::log(b)); }

double finish(double total_b, double sum_terms) {
  const double u = std::log(total_b) - digamma(total_b + 1.0) + sum_terms / total_b;
  return std::max(u, 0.0);
}

}  // namespace

double utility(std::span<const double> b) {
  if (b.empty()) throw std::invalid_argument("utility: empty parameter vector");
  double total = 0.0, terms = 0.0;
  for (double x : b) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("utility: parameters must be positive and finite");
    total += x;
    terms += entry_term(x);
  }
  return finish(total, terms);
}

double utility_sparse(std::span<const SparseCount> nonzero, double alpha, int dim) {
  if (!(alpha > 0.0)) throw std::invalid_argument("utility_sparse: alpha must be positive");
  if (dim < 1 || static_cast<int>(nonzero.size()) > dim) throw std::invalid_argument("utility_sparse: bad dimension");
  double total = alpha * dim, terms = 0.0;
  for (const auto& e : nonzero) {
    total += e.count;
    terms += entry_term(e.count + alpha);
  }
  terms += (dim - static_cast<double>(nonzero.size())) * entry_term(alpha);
  return finish(total, terms);
}

DirichletBelief::DirichletBelief(int n_actions, int n_states, double alpha)
    : alpha_(alpha), counts_(n_actions, n_states, 0.0) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("belief: alpha must be positive");
  if (n_actions < 1 || n_states < 1) throw std::invalid_argument("belief: sizes must be positive");
  rows_.assign(static_cast<std::size_t>(n_actions) * n_states, {});
  totals_.assign(rows_.size(), 0.0);
}

void DirichletBelief::set_counts(CountTensor counts) {
  if (counts.n_actions() != n_actions() || counts.n_states() != n_states()) {
    throw std::invalid_argument("belief: count tensor shape mismatch");
  }
  for (double c : counts.values()) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("belief: counts must be nonnegative");
  }
  counts_ = std::move(counts);
  rebuild();
}

void DirichletBelief::rebuild() {
  const int n = n_states();
  for (int a = 0; a < n_actions(); ++a) {
    for (int z = 0; z < n; ++z) {
      auto& row = rows_[row_index(a, z)];
      row.clear();
      double total = 0.0;
      const auto c = counts_.row(a, z);
      for (int d = 0; d < n; ++d) {
        if (c[d] > 0.0) {
          row.push_back({d, c[d]});
          total += c[d];
        }
      }
      totals_[row_index(a, z)] = total;
    }
  }
}

void DirichletBelief::add_count(int a, int z, int z_next, double w) {
  if (a < 0 || a >= n_actions() || z < 0 || z >= n_states() || z_next < 0 || z_next >= n_states()) {
    throw std::out_of_range("belief: index out of range");
  }
  if (!(w >= 0.0)) throw std::invalid_argument("belief: count increment must be nonnegative");
  if (w == 0.0) return;
  counts_(a, z, z_next) += w;
  totals_[row_index(a, z)] += w;
  auto& row = rows_[row_index(a, z)];
  const auto it = std::lower_bound(row.begin(), row.end(), z_next,
                                   [](const SparseCount& e, int d) { return e.destination < d; });
  if (it != row.end() && it->destination == z_next) {
    it->count = counts_(a, z, z_next);
  } else {
    row.insert(it, {z_next, counts_(a, z, z_next)});
  }
}

void DirichletBelief::remove_count(int a, int z, int z_next, double w) {
  if (a < 0 || a >= n_actions() || z < 0 || z >= n_states() || z_next < 0 || z_next >= n_states()) {
    throw std::out_of_range("belief: index out of range");
  }
  if (!(w >= 0.0)) throw std::invalid_argument("belief: count decrement must be nonnegative");
  if (w == 0.0) return;
  if (counts_(a, z, z_next) < w) throw std::invalid_argument("belief: removing more counts than recorded");
  counts_(a, z, z_next) -= w;
  totals_[row_index(a, z)] -= w;
  auto& row = rows_[row_index(a, z)];
  const auto it = std::lower_bound(row.begin(), row.end(), z_next,
                                   [](const SparseCount& e, int d) { return e.destination < d; });
  if (counts_(a, z, z_next) == 0.0) {
    row.erase(it);
  } else {
    it->count = counts_(a, z, z_next);
  }
}

double DirichletBelief::row_utility(int a, int z) const {
  return utility_sparse(nonzeros(a, z), alpha_, n_states());
}

double DirichletBelief::mean(int a, int z, int z_next) const {
  return (counts_(a, z, z_next) + alpha_) / (row_total(a, z) + alpha_ * n_states());
}

DirichletBelief update_counts(DirichletBelief belief, CountTensor counts) {
  belief.set_counts(std::move(counts));
  return belief;
}

UtilityTable utility_table(const DirichletBelief& belief) {
  UtilityTable u(belief.n_states(), belief.n_actions());
  for (int z = 0; z < belief.n_states(); ++z) {
    for (int a = 0; a < belief.n_actions(); ++a) u(z, a) = belief.row_utility(a, z);
  }
  return u;
}

TransitionTensor mean_transition(const DirichletBelief& belief) {
  const int n = belief.n_states();
  TransitionTensor t(belief.n_actions(), n, 0.0);
  for (int a = 0; a < belief.n_actions(); ++a) {
    for (int z = 0; z < n; ++z) {
      const double denom = belief.row_total(a, z) + belief.alpha() * n;
      const auto c = belief.counts().row(a, z);
      auto out = t.row(a, z);
      for (int d = 0; d < n; ++d) out[d] = (c[d] + belief.alpha()) / denom;
    }
  }
  return t;
}

}  // namespace efex
