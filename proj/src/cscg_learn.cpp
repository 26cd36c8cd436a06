#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "efex/cscg.hpp"
#include "efex/special.hpp"
#include "forward_backward.hpp"

namespace efex {
namespace {

// (counts + pseudocount) row-normalized. Rows with no mass at all keep the
// previous model's row, so a zero pseudocount never invents transitions.
void m_step(const CountTensor& counts, double pseudocount, TransitionTensor& t) {
  const int n = t.n_states();
  for (int a = 0; a < t.n_actions(); ++a) {
    for (int z = 0; z < n; ++z) {
      const auto c = counts.row(a, z);
      const double total = std::accumulate(c.begin(), c.end(), 0.0) + pseudocount * n;
      if (!(total > 0.0)) continue;
      auto out = t.row(a, z);
      for (int d = 0; d < n; ++d) out[d] = (c[d] + pseudocount) / total;
    }
  }
}

double log_prior_term(const TransitionTensor& t, double pseudocount) {
  if (pseudocount == 0.0) return 0.0;
  double s = 0.0;
  for (double p : t.values()) s += std::log(p);
  return pseudocount * s;
}

// KL(Dir(w) || Dir(p)) for one row.
double dirichlet_kl(std::span<const double> w, std::span<const double> p) {
  double sw = 0.0, sp = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    sw += w[i];
    sp += p[i];
    acc += std::lgamma(p[i]) - std::lgamma(w[i]);
  }
  const double psi_sw = digamma(sw);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != p[i]) acc += (w[i] - p[i]) * (digamma(w[i]) - psi_sw);
  }
  return acc + std::lgamma(sw) - std::lgamma(sp);
}

}  // namespace

EmResult em_fit(const Trajectory& trajectory, const CloneAllocation& allocation, int n_actions,
                const EmOptions& options) {
  return em_fit(trajectory, allocation, random_model(allocation, n_actions, options.seed, options.pseudocount),
                options);
}

EmResult em_fit(const Trajectory& trajectory, const CloneAllocation& allocation, LearnedModel init,
                const EmOptions& options) {
  if (options.max_iters < 1) throw std::invalid_argument("em_fit: max_iters must be >= 1");
  if (options.pseudocount < 0.0) throw std::invalid_argument("em_fit: pseudocount must be >= 0");
  init.validate(allocation);
  detail::validate_inputs(allocation, init.n_actions(), trajectory);

  EmResult r;
  r.model = std::move(init);
  r.model.pseudocount = options.pseudocount;
  CountTensor counts(r.model.n_actions(), r.model.n_clones(), 0.0);
  for (int it = 0; it < options.max_iters; ++it) {
    counts.fill(0.0);
    const double ll = detail::forward_backward(r.model.transition, r.model.initial, allocation, trajectory, &counts);
    if (!std::isfinite(ll)) throw std::runtime_error("em_fit: model assigns zero probability to the data");
    r.log_likelihood.push_back(ll);
    r.objective.push_back(ll + log_prior_term(r.model.transition, options.pseudocount));
    m_step(counts, options.pseudocount, r.model.transition);
    r.iterations = it + 1;
    if (it > 0) {
      const double prev = r.log_likelihood[it - 1];
      if (ll - prev < options.tol * std::abs(prev)) {
        r.converged = true;
        break;
      }
    }
  }
  return r;
}

ViterbiTrainResult viterbi_train(const LearnedModel& model, const Trajectory& trajectory,
                                 const CloneAllocation& allocation, double pseudocount, int iters) {
  if (iters < 1) throw std::invalid_argument("viterbi_train: iters must be >= 1");
  if (pseudocount < 0.0) throw std::invalid_argument("viterbi_train: pseudocount must be >= 0");
  ViterbiTrainResult r;
  r.model = model;
  r.model.pseudocount = pseudocount;
  for (int it = 0; it < iters; ++it) {
    const Decoding d = ViterbiDecoder(r.model, allocation).decode(trajectory);
    r.path_score.push_back(d.log_probability);
    r.objective.push_back(d.log_probability + log_prior_term(r.model.transition, pseudocount));
    const CountTensor c = counts_from_decoding(d.clones, trajectory, r.model.n_actions(), r.model.n_clones());
    m_step(c, pseudocount, r.model.transition);
  }
  return r;
}

VbResult vb_refine(const LearnedModel& model, const Trajectory& trajectory, const CloneAllocation& allocation,
                   const Tensor3& prior, int iters) {
  if (iters < 1) throw std::invalid_argument("vb_refine: iters must be >= 1");
  if (prior.n_actions() != model.n_actions() || prior.n_states() != model.n_clones()) {
    throw std::invalid_argument("vb_refine: prior shape does not match model");
  }
  for (double p : prior.values()) {
    if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("vb_refine: prior entries must be positive");
  }
  detail::validate_inputs(allocation, model.n_actions(), trajectory);

  const int na = model.n_actions(), n = model.n_clones();
  CountTensor counts(na, n, 0.0);
  if (!std::isfinite(detail::forward_backward(model.transition, model.initial, allocation, trajectory, &counts))) {
    throw std::runtime_error("vb_refine: model assigns zero probability to the data");
  }
  Tensor3 w = prior;
  for (std::size_t i = 0; i < w.values().size(); ++i) w.values()[i] += counts.values()[i];

  VbResult r;
  TransitionTensor geo(na, n, 0.0);  // exp E[log T]
  for (int it = 0; it < iters; ++it) {
    double kl = 0.0;
    for (int a = 0; a < na; ++a) {
      for (int z = 0; z < n; ++z) {
        const auto wr = w.row(a, z);
        const double psi_total = digamma(std::accumulate(wr.begin(), wr.end(), 0.0));
        auto g = geo.row(a, z);
        for (int d = 0; d < n; ++d) g[d] = std::exp(digamma(wr[d]) - psi_total);
        kl += dirichlet_kl(wr, prior.row(a, z));
      }
    }
    counts.fill(0.0);
    const double log_z = detail::forward_backward(geo, model.initial, allocation, trajectory, &counts);
    r.free_energy.push_back(log_z - kl);
    for (std::size_t i = 0; i < w.values().size(); ++i) w.values()[i] = prior.values()[i] + counts.values()[i];
  }
  r.model = model;
  r.model.transition = w;
  normalize_rows(r.model.transition);
  return r;
}

VbResult vb_refine(const LearnedModel& model, const Trajectory& trajectory, const CloneAllocation& allocation,
                   double symmetric_prior, int iters) {
  return vb_refine(model, trajectory, allocation, Tensor3(model.n_actions(), model.n_clones(), symmetric_prior), iters);
}

}  // namespace efex
