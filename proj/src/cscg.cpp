#include "efex/cscg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "efex/kernels.hpp"
#include "efex/random.hpp"
#include "forward_backward.hpp"

namespace efex {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Smoothing used by the decoder fallback when the model carries no pseudocount.
constexpr double kFallbackPseudocount = 2e-3;
}  // namespace

CloneAllocation::CloneAllocation(std::vector<int> clones_per_obs) : counts_(std::move(clones_per_obs)) {
  if (counts_.empty()) throw std::invalid_argument("clone allocation needs at least one observation");
  offsets_.assign(counts_.size() + 1, 0);
  for (std::size_t x = 0; x < counts_.size(); ++x) {
    if (counts_[x] < 1) throw std::invalid_argument("every observation needs at least one clone");
    offsets_[x + 1] = offsets_[x] + counts_[x];
  }
  obs_of_clone_.resize(offsets_.back());
  for (std::size_t x = 0; x < counts_.size(); ++x) {
    std::fill(obs_of_clone_.begin() + offsets_[x], obs_of_clone_.begin() + offsets_[x + 1], static_cast<int>(x));
  }
}

CloneAllocation CloneAllocation::uniform(int n_observations, int clones_per_obs) {
  if (n_observations < 1) throw std::invalid_argument("clone allocation needs at least one observation");
  return CloneAllocation(std::vector<int>(n_observations, clones_per_obs));
}

int default_clones_per_obs(int n_nodes, int n_observations) {
  if (n_nodes < 1 || n_observations < 1) throw std::invalid_argument("default_clones_per_obs: sizes must be positive");
  return 2 * ((n_nodes + n_observations - 1) / n_observations);
}

void LearnedModel::validate(const CloneAllocation& allocation) const {
  if (n_actions() < 1) throw std::invalid_argument("model: needs at least one action");
  if (n_clones() != allocation.n_clones()) throw std::invalid_argument("model: clone count does not match allocation");
  require_stochastic(transition, 1e-10, "model");
  if (static_cast<int>(initial.size()) != n_clones()) throw std::invalid_argument("model: initial distribution size");
  double s = 0.0;
  for (double p : initial) {
    if (!(p >= 0.0)) throw std::invalid_argument("model: negative initial probability");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-10) throw std::invalid_argument("model: initial distribution does not sum to 1");
}

bool Trajectory::has_transition(std::size_t n) const {
  if (n + 1 >= observations.size() || actions[n] == kNoAction) return false;
  return !std::binary_search(episode_starts.begin(), episode_starts.end(), n + 1);
}

void Trajectory::start_episode(int observation, std::optional<int> node) {
  episode_starts.push_back(observations.size());
  observations.push_back(observation);
  actions.push_back(kNoAction);
  if (node) true_nodes.push_back(*node);
}

void Trajectory::append(int action, int observation, std::optional<int> node) {
  if (observations.empty()) throw std::logic_error("append before start_episode");
  actions.back() = action;
  observations.push_back(observation);
  actions.push_back(kNoAction);
  if (node) true_nodes.push_back(*node);
}

void Trajectory::validate(int n_observations, int n_actions) const {
  const std::size_t n = observations.size();
  if (n == 0) throw std::invalid_argument("trajectory is empty");
  if (actions.size() != n) throw std::invalid_argument("trajectory: actions length must equal observations length");
  if (!true_nodes.empty() && true_nodes.size() != n) throw std::invalid_argument("trajectory: true_nodes length");
  if (episode_starts.empty() || episode_starts[0] != 0) throw std::invalid_argument("trajectory: first episode must start at 0");
  for (std::size_t e = 1; e < episode_starts.size(); ++e) {
    if (episode_starts[e] <= episode_starts[e - 1] || episode_starts[e] >= n) {
      throw std::invalid_argument("trajectory: episode markers must be strictly increasing and in range");
    }
  }
  for (int x : observations) {
    if (x < 0 || x >= n_observations) throw std::invalid_argument("trajectory: observation id out of range");
  }
  for (std::size_t e = 0; e < episode_starts.size(); ++e) {
    for (std::size_t i = episode_starts[e]; i + 1 < episode_end(e); ++i) {
      if (actions[i] < 0 || actions[i] >= n_actions) {
        throw std::invalid_argument("trajectory: action id out of range at step " + std::to_string(i));
      }
    }
  }
}

Trajectory make_trajectory(std::vector<int> observations, std::vector<int> actions,
                           std::vector<std::size_t> episode_starts) {
  Trajectory t;
  if (actions.size() + 1 == observations.size()) actions.push_back(kNoAction);
  t.observations = std::move(observations);
  t.actions = std::move(actions);
  t.episode_starts = std::move(episode_starts);
  return t;
}

LearnedModel uniform_model(const CloneAllocation& allocation, int n_actions, double pseudocount) {
  const int n = allocation.n_clones();
  LearnedModel m;
  m.transition = TransitionTensor(n_actions, n, 1.0 / n);
  m.initial.assign(n, 1.0 / n);
  m.pseudocount = pseudocount;
  return m;
}

LearnedModel random_model(const CloneAllocation& allocation, int n_actions, std::uint64_t seed, double pseudocount) {
  LearnedModel m = uniform_model(allocation, n_actions, pseudocount);
  Rng rng(seed);
  for (double& v : m.transition.values()) v = rng.gamma(1.0);
  normalize_rows(m.transition);
  return m;
}

namespace detail {

void validate_inputs(const CloneAllocation& allocation, int n_actions, const Trajectory& trajectory) {
  if (allocation.n_clones() == 0) throw std::invalid_argument("empty clone allocation");
  trajectory.validate(allocation.n_observations(), n_actions);
}

double forward_backward(const TransitionTensor& t, std::span<const double> initial, const CloneAllocation& allocation,
                        const Trajectory& trajectory, CountTensor* counts) {
  const auto& k = simd::kernels();
  const auto& obs = trajectory.observations;
  const auto& act = trajectory.actions;
  std::vector<double> alpha, beta, scale;
  std::vector<std::size_t> off;
  double total = 0.0;

  for (std::size_t e = 0; e < trajectory.n_episodes(); ++e) {
    const std::size_t s = trajectory.episode_starts[e];
    const std::size_t len = trajectory.episode_end(e) - s;
    off.assign(len + 1, 0);
    for (std::size_t n = 0; n < len; ++n) off[n + 1] = off[n] + allocation.size(obs[s + n]);
    alpha.assign(off[len], 0.0);
    scale.assign(len, 0.0);

    {
      const int b = allocation.begin(obs[s]);
      const std::size_t m = allocation.size(obs[s]);
      std::copy_n(initial.begin() + b, m, alpha.begin());
      const double c = k.sum(alpha.data(), m);
      if (!(c > 0.0)) return kNegInf;
      k.scale(1.0 / c, alpha.data(), m);
      scale[0] = c;
    }
    for (std::size_t n = 1; n < len; ++n) {
      const int a = act[s + n - 1];
      const int bp = allocation.begin(obs[s + n - 1]);
      const int b = allocation.begin(obs[s + n]);
      const std::size_t mp = allocation.size(obs[s + n - 1]);
      const std::size_t m = allocation.size(obs[s + n]);
      const double* prev = alpha.data() + off[n - 1];
      double* cur = alpha.data() + off[n];
      for (std::size_t i = 0; i < mp; ++i) {
        if (prev[i] != 0.0) k.axpy(prev[i], t.row(a, bp + static_cast<int>(i)).data() + b, cur, m);
      }
      const double c = k.sum(cur, m);
      if (!(c > 0.0)) return kNegInf;
      k.scale(1.0 / c, cur, m);
      scale[n] = c;
    }
    for (double c : scale) total += std::log(c);

    if (counts == nullptr) continue;
    beta.assign(off[len], 0.0);
    std::fill(beta.begin() + off[len - 1], beta.end(), 1.0);
    for (std::size_t n = len - 1; n-- > 0;) {
      const int a = act[s + n];
      const int b = allocation.begin(obs[s + n]);
      const int bn = allocation.begin(obs[s + n + 1]);
      const std::size_t m = allocation.size(obs[s + n]);
      const std::size_t mn = allocation.size(obs[s + n + 1]);
      const double inv = 1.0 / scale[n + 1];
      const double* next = beta.data() + off[n + 1];
      const double* al = alpha.data() + off[n];
      double* cur = beta.data() + off[n];
      for (std::size_t i = 0; i < m; ++i) {
        const int z = b + static_cast<int>(i);
        const double* row = t.row(a, z).data() + bn;
        cur[i] = k.dot(row, next, mn) * inv;
        const double w = al[i] * inv;
        if (w != 0.0) k.mul_axpy(w, row, next, counts->row(a, z).data() + bn, mn);
      }
    }
  }
  return total;
}

}  // namespace detail

double log_likelihood(const LearnedModel& model, const CloneAllocation& allocation, const Trajectory& trajectory) {
  detail::validate_inputs(allocation, model.n_actions(), trajectory);
  if (model.n_clones() != allocation.n_clones()) throw std::invalid_argument("model/allocation clone count mismatch");
  return detail::forward_backward(model.transition, model.initial, allocation, trajectory, nullptr);
}

double expected_counts(const LearnedModel& model, const CloneAllocation& allocation, const Trajectory& trajectory,
                       CountTensor& counts) {
  detail::validate_inputs(allocation, model.n_actions(), trajectory);
  if (counts.n_actions() != model.n_actions() || counts.n_states() != model.n_clones()) {
    counts = CountTensor(model.n_actions(), model.n_clones(), 0.0);
  }
  return detail::forward_backward(model.transition, model.initial, allocation, trajectory, &counts);
}

TransitionTensor normalize_counts(const CountTensor& counts, double pseudocount) {
  TransitionTensor t = counts;
  if (pseudocount != 0.0) {
    for (double& v : t.values()) v += pseudocount;
  }
  normalize_rows(t);
  return t;
}

namespace {

TransitionTensor log_tensor(const TransitionTensor& t) {
  TransitionTensor out = t;
  for (double& v : out.values()) v = v > 0.0 ? std::log(v) : kNegInf;
  return out;
}

std::vector<double> log_vector(std::span<const double> p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > 0.0 ? std::log(p[i]) : kNegInf;
  return out;
}

}  // namespace

ViterbiDecoder::ViterbiDecoder(const LearnedModel& model, const CloneAllocation& allocation)
    : allocation_(&allocation),
      pseudocount_(model.pseudocount > 0.0 ? model.pseudocount : kFallbackPseudocount),
      log_t_(log_tensor(model.transition)),
      log_initial_(log_vector(model.initial)) {
  if (model.n_clones() != allocation.n_clones()) throw std::invalid_argument("model/allocation clone count mismatch");
}

Decoding ViterbiDecoder::decode_with(const TransitionTensor& log_t, std::span<const double> log_initial,
                                     const Trajectory& trajectory, bool& impossible) const {
  const auto& k = simd::kernels();
  const CloneAllocation& alloc = *allocation_;
  const auto& obs = trajectory.observations;
  const auto& act = trajectory.actions;
  Decoding out;
  out.clones.assign(trajectory.size(), -1);
  std::vector<double> delta;
  std::vector<std::int32_t> back;
  std::vector<std::size_t> off;
  impossible = false;

  for (std::size_t e = 0; e < trajectory.n_episodes(); ++e) {
    const std::size_t s = trajectory.episode_starts[e];
    const std::size_t len = trajectory.episode_end(e) - s;
    off.assign(len + 1, 0);
    for (std::size_t n = 0; n < len; ++n) off[n + 1] = off[n] + alloc.size(obs[s + n]);
    delta.assign(off[len], kNegInf);
    back.assign(off[len], -1);

    {
      const int b = alloc.begin(obs[s]);
      std::copy_n(log_initial.begin() + b, alloc.size(obs[s]), delta.begin());
    }
    for (std::size_t n = 1; n < len; ++n) {
      const int a = act[s + n - 1];
      const int bp = alloc.begin(obs[s + n - 1]);
      const int b = alloc.begin(obs[s + n]);
      const std::size_t mp = alloc.size(obs[s + n - 1]);
      const std::size_t m = alloc.size(obs[s + n]);
      const double* prev = delta.data() + off[n - 1];
      double* cur = delta.data() + off[n];
      std::int32_t* arg = back.data() + off[n];
      for (std::size_t i = 0; i < mp; ++i) {
        if (prev[i] == kNegInf) continue;
        k.max_plus(prev[i], log_t.row(a, bp + static_cast<int>(i)).data() + b, cur, arg, static_cast<std::int32_t>(i), m);
      }
    }
    const double* last = delta.data() + off[len - 1];
    const std::size_t m_last = alloc.size(obs[s + len - 1]);
    std::size_t best = 0;
    for (std::size_t j = 1; j < m_last; ++j) {
      if (last[j] > last[best]) best = j;
    }
    if (last[best] == kNegInf) {
      impossible = true;
      return out;
    }
    out.log_probability += last[best];
    std::size_t j = best;
    for (std::size_t n = len; n-- > 0;) {
      out.clones[s + n] = alloc.begin(obs[s + n]) + static_cast<int>(j);
      if (n > 0) j = static_cast<std::size_t>(back[off[n] + j]);
    }
  }
  return out;
}

Decoding ViterbiDecoder::decode(const Trajectory& trajectory) const {
  detail::validate_inputs(*allocation_, log_t_.n_actions(), trajectory);
  bool impossible = false;
  Decoding d = decode_with(log_t_, log_initial_, trajectory, impossible);
  if (!impossible) return d;

  // Zero-probability data: decode against pseudocount-smoothed parameters.
  const int n = log_t_.n_states();
  TransitionTensor smooth = log_t_;
  for (double& v : smooth.values()) v = std::exp(v) + pseudocount_;
  normalize_rows(smooth);
  std::vector<double> init(n);
  for (int i = 0; i < n; ++i) init[i] = std::exp(log_initial_[i]) + pseudocount_;
  const double total = std::accumulate(init.begin(), init.end(), 0.0);
  for (double& p : init) p /= total;
  d = decode_with(log_tensor(smooth), log_vector(init), trajectory, impossible);
  d.smoothed = true;
  return d;
}

Decoding viterbi_decode(const LearnedModel& model, const CloneAllocation& allocation, const Trajectory& trajectory) {
  return ViterbiDecoder(model, allocation).decode(trajectory);
}

CountTensor counts_from_decoding(std::span<const int> clones, std::span<const int> actions,
                                 std::span<const std::size_t> episode_starts, int n_actions, int n_clones) {
  const std::size_t n = clones.size();
  if (n > 0 && actions.size() + 1 < n) throw std::invalid_argument("counts_from_decoding: too few actions");
  CountTensor c(n_actions, n_clones, 0.0);
  std::size_t next_start = 0;
  while (next_start < episode_starts.size() && episode_starts[next_start] <= 0) ++next_start;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (next_start < episode_starts.size() && episode_starts[next_start] == i + 1) {
      ++next_start;
      continue;
    }
    const int a = actions[i];
    if (a == kNoAction) continue;
    if (a < 0 || a >= n_actions) throw std::invalid_argument("counts_from_decoding: action out of range");
    const int z = clones[i], zn = clones[i + 1];
    if (z < 0 || z >= n_clones || zn < 0 || zn >= n_clones) {
      throw std::invalid_argument("counts_from_decoding: clone id out of range");
    }
    c(a, z, zn) += 1.0;
  }
  return c;
}

CountTensor counts_from_decoding(std::span<const int> clones, const Trajectory& trajectory, int n_actions,
                                 int n_clones) {
  return counts_from_decoding(clones, trajectory.actions, trajectory.episode_starts, n_actions, n_clones);
}

}  // namespace efex
