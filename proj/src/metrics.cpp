#include "efex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "efex/random.hpp"

namespace efex {
namespace {

Estimate summarize(const std::vector<double>& xs) {
  Estimate e;
  if (xs.empty()) return e;
  e.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - e.mean) * (x - e.mean);
    e.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return e;
}

}  // namespace

std::vector<Trajectory> sample_walks(const GroundTruthGraph& graph, SlippageConfig slip, const EvalProtocol& protocol) {
  if (protocol.n_walks < 1 || protocol.walk_length < 1) throw std::invalid_argument("eval protocol sizes must be >= 1");
  const EdgeSet law(effective_step_law(graph, slip));
  const Rng root(protocol.seed);
  std::vector<Trajectory> walks(protocol.n_walks);
  for (int w = 0; w < protocol.n_walks; ++w) {
    Rng rng = root.split(static_cast<std::uint64_t>(w));
    Trajectory& t = walks[w];
    t.observations.reserve(protocol.walk_length);
    t.actions.reserve(protocol.walk_length);
    t.true_nodes.reserve(protocol.walk_length);
    int z = static_cast<int>(rng.index(static_cast<std::size_t>(graph.n_nodes())));
    t.start_episode(graph.emission[z], z);
    for (long i = 1; i < protocol.walk_length; ++i) {
      const int a = static_cast<int>(rng.index(static_cast<std::size_t>(graph.n_actions())));
      const auto row = law.row(a, z);
      double r = rng.uniform();
      int next = row.back().destination;
      for (const Edge& e : row) {
        r -= e.probability;
        if (r < 0.0) {
          next = e.destination;
          break;
        }
      }
      z = next;
      t.append(a, graph.emission[z], z);
    }
  }
  return walks;
}

Estimate expected_log_likelihood(const LearnedModel& model, const CloneAllocation& allocation,
                                 std::span<const Trajectory> walks) {
  std::vector<double> per_walk;
  per_walk.reserve(walks.size());
  for (const Trajectory& w : walks) {
    per_walk.push_back(log_likelihood(model, allocation, w) / static_cast<double>(w.size()));
  }
  return summarize(per_walk);
}

Estimate paired_log_likelihood_gap(const LearnedModel& model, const CloneAllocation& allocation,
                                   const LearnedModel& reference, const CloneAllocation& reference_allocation,
                                   std::span<const Trajectory> walks) {
  std::vector<double> diffs;
  diffs.reserve(walks.size());
  for (const Trajectory& w : walks) {
    const double n = static_cast<double>(w.size());
    diffs.push_back(log_likelihood(model, allocation, w) / n - log_likelihood(reference, reference_allocation, w) / n);
  }
  return summarize(diffs);
}

double precision(std::span<const int> decoded, std::span<const int> truth) {
  if (decoded.size() != truth.size()) throw std::invalid_argument("precision: length mismatch");
  if (decoded.empty()) throw std::invalid_argument("precision: empty sequence");
  std::vector<std::pair<int, int>> pairs(decoded.size());
  for (std::size_t n = 0; n < decoded.size(); ++n) pairs[n] = {decoded[n], truth[n]};
  std::sort(pairs.begin(), pairs.end());
  std::size_t hits = 0;
  std::size_t i = 0;
  while (i < pairs.size()) {
    // One decoded id: find its most frequent true state.
    std::size_t best = 0;
    std::size_t j = i;
    while (j < pairs.size() && pairs[j].first == pairs[i].first) {
      std::size_t k = j;
      while (k < pairs.size() && pairs[k] == pairs[j]) ++k;
      best = std::max(best, k - j);
      j = k;
    }
    hits += best;
    i = j;
  }
  return static_cast<double>(hits) / static_cast<double>(decoded.size());
}

Estimate walk_precision(const LearnedModel& model, const CloneAllocation& allocation,
                        std::span<const Trajectory> walks) {
  const ViterbiDecoder decoder(model, allocation);
  std::vector<double> per_walk;
  per_walk.reserve(walks.size());
  for (const Trajectory& w : walks) {
    if (w.true_nodes.size() != w.size()) throw std::invalid_argument("walk_precision: walk lacks ground-truth nodes");
    per_walk.push_back(precision(decoder.decode(w).clones, w.true_nodes));
  }
  return summarize(per_walk);
}

CoverageTracker::CoverageTracker(EdgeSet support) : support_(std::move(support)), seen_(support_.size(), 0) {}

bool CoverageTracker::visit(int action, int source, int destination) {
  const long i = support_.find(action, source, destination);
  if (i < 0 || seen_[i]) return false;
  seen_[i] = 1;
  ++n_visited_;
  mass_ += support_.edges()[i].probability;
  return true;
}

double CoverageTracker::weighted() const {
  return support_.total_weight() > 0.0 ? std::min(1.0, mass_ / support_.total_weight()) : 0.0;
}

double CoverageTracker::unweighted() const {
  return support_.size() > 0 ? static_cast<double>(n_visited_) / static_cast<double>(support_.size()) : 0.0;
}

double weighted_coverage(std::span<const VisitedTriple> visited, const EdgeSet& support) {
  CoverageTracker t(support);
  for (const auto& v : visited) t.visit(v.action, v.source, v.destination);
  return t.weighted();
}

double unweighted_coverage(std::span<const VisitedTriple> visited, const EdgeSet& support) {
  CoverageTracker t(support);
  for (const auto& v : visited) t.visit(v.action, v.source, v.destination);
  return t.unweighted();
}

GroundTruthModel gt_as_model(const GroundTruthGraph& graph, SlippageConfig slip) {
  const int n = graph.n_nodes();
  std::vector<int> per_obs(graph.n_observations, 0);
  for (int x : graph.emission) ++per_obs[x];
  // Symbols no node emits still need a (never reached) clone.
  int padding = 0;
  for (int& c : per_obs) {
    if (c == 0) {
      c = 1;
      ++padding;
    }
  }
  GroundTruthModel out;
  out.allocation = CloneAllocation(per_obs);
  std::vector<int> next(graph.n_observations);
  for (int x = 0; x < graph.n_observations; ++x) next[x] = out.allocation.begin(x);
  out.node_to_clone.resize(n);
  for (int z = 0; z < n; ++z) out.node_to_clone[z] = next[graph.emission[z]]++;

  const TransitionTensor law = effective_step_law(graph, slip);
  const int nh = n + padding;
  out.model.transition = TransitionTensor(graph.n_actions(), nh, 0.0);
  for (int a = 0; a < graph.n_actions(); ++a) {
    for (int z = 0; z < n; ++z) {
      for (int d = 0; d < n; ++d) out.model.transition(a, out.node_to_clone[z], out.node_to_clone[d]) = law(a, z, d);
    }
    for (int x = 0; x < graph.n_observations; ++x) {
      if (next[x] < out.allocation.end(x)) out.model.transition(a, next[x], next[x]) = 1.0;
    }
  }
  out.model.initial.assign(nh, 1.0 / nh);
  return out;
}

SplitModel clone_split(const LearnedModel& model, const CloneAllocation& allocation, int clone, double ratio) {
  const int n = model.n_clones();
  if (clone < 0 || clone >= n) throw std::invalid_argument("clone_split: clone id out of range");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("clone_split: ratio must be in (0,1)");
  const int x = allocation.observation_of(clone);
  std::vector<int> counts = allocation.clones_per_obs();
  ++counts[x];
  SplitModel out;
  out.allocation = CloneAllocation(counts);
  const int insert_at = allocation.end(x);
  out.old_to_new.resize(n);
  for (int k = 0; k < n; ++k) out.old_to_new[k] = k < insert_at ? k : k + 1;
  out.new_clone = insert_at;

  const auto& m = out.old_to_new;
  out.model.pseudocount = model.pseudocount;
  out.model.transition = TransitionTensor(model.n_actions(), n + 1, 0.0);
  for (int a = 0; a < model.n_actions(); ++a) {
    for (int i = 0; i < n; ++i) {
      const auto src = model.transition.row(a, i);
      auto dst = out.model.transition.row(a, m[i]);
      for (int j = 0; j < n; ++j) dst[m[j]] = src[j];
      dst[out.new_clone] = (1.0 - ratio) * src[clone];
      dst[m[clone]] = ratio * src[clone];
    }
    const auto orig = out.model.transition.row(a, m[clone]);
    auto copy = out.model.transition.row(a, out.new_clone);
    std::copy(orig.begin(), orig.end(), copy.begin());
  }
  out.model.initial.assign(n + 1, 0.0);
  for (int i = 0; i < n; ++i) out.model.initial[m[i]] = model.initial[i];
  out.model.initial[out.new_clone] = (1.0 - ratio) * model.initial[clone];
  out.model.initial[m[clone]] = ratio * model.initial[clone];
  return out;
}

LearnedModel relabel(const LearnedModel& model, const CloneAllocation& allocation, std::span<const int> permutation) {
  const int n = model.n_clones();
  if (static_cast<int>(permutation.size()) != n) throw std::invalid_argument("relabel: permutation size mismatch");
  std::vector<std::uint8_t> hit(n, 0);
  for (int i = 0; i < n; ++i) {
    const int p = permutation[i];
    if (p < 0 || p >= n || hit[p]) throw std::invalid_argument("relabel: not a permutation");
    if (allocation.observation_of(p) != allocation.observation_of(i)) {
      throw std::invalid_argument("relabel: permutation moves a clone across observation blocks");
    }
    hit[p] = 1;
  }
  LearnedModel out = model;
  for (int a = 0; a < model.n_actions(); ++a) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) out.transition(a, permutation[i], permutation[j]) = model.transition(a, i, j);
    }
  }
  for (int i = 0; i < n; ++i) out.initial[permutation[i]] = model.initial[i];
  return out;
}

void MetricTrace::validate() const {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].step <= rows[i - 1].step) throw std::invalid_argument("metric trace: steps must strictly increase");
    if (rows[i].wcov < rows[i - 1].wcov) throw std::invalid_argument("metric trace: weighted coverage decreased");
  }
}

}  // namespace efex
