#include "efex/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace efex {

void GroundTruthGraph::validate() const {
  if (n_actions() < 1) throw std::invalid_argument("graph: needs at least one action");
  if (n_nodes() < 1) throw std::invalid_argument("graph: needs at least one node");
  require_stochastic(transition, 1e-12, "graph");
  if (static_cast<int>(emission.size()) != n_nodes()) throw std::invalid_argument("graph: emission length != n_nodes");
  if (n_observations < 1) throw std::invalid_argument("graph: n_observations must be positive");
  for (int x : emission) {
    if (x < 0 || x >= n_observations) throw std::invalid_argument("graph: emission id out of range");
  }
  if (home < 0 || home >= n_nodes()) throw std::invalid_argument("graph: home out of range");
  if (!boundary.empty() && boundary.size() != static_cast<std::size_t>(n_actions()) * n_nodes()) {
    throw std::invalid_argument("graph: boundary mask has wrong size");
  }
  if (layout) {
    if (static_cast<int>(layout->cell.size()) != n_nodes()) throw std::invalid_argument("graph: layout size mismatch");
    for (int c : layout->cell) {
      if (c < 0 || c >= layout->rows * layout->cols) throw std::invalid_argument("graph: layout cell out of range");
    }
  }
}

GroundTruthGraph with_teleport(GroundTruthGraph graph, double p_teleport) {
  if (!(p_teleport >= 0.0 && p_teleport <= 1.0)) throw std::invalid_argument("teleport probability outside [0,1]");
  const int n = graph.n_nodes();
  for (int a = 0; a < graph.n_actions(); ++a) {
    for (int z = 0; z < n; ++z) {
      if (!graph.is_boundary(a, z)) continue;
      auto row = graph.transition.row(a, z);
      for (double& p : row) p = 0.0;
      row[z] += 1.0 - p_teleport;
      row[graph.home] += p_teleport;
    }
  }
  return graph;
}

Environment::Environment(GroundTruthGraph graph, SlippageConfig slip, EpisodeConfig episode, std::uint64_t seed)
    : slip_(slip), episode_(episode), seed_(seed), rng_(seed) {
  graph.validate();
  if (!(slip.p_slip >= 0.0 && slip.p_slip < 1.0)) throw std::invalid_argument("p_slip must be in [0,1)");
  if (episode.episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
  if (!(episode.p_teleport >= 0.0 && episode.p_teleport <= 1.0)) {
    throw std::invalid_argument("p_teleport must be in [0,1]");
  }
  graph_ = episode.reset == ResetMode::teleport ? with_teleport(std::move(graph), episode.p_teleport) : std::move(graph);
  node_ = graph_.home;
  const int n = graph_.n_nodes();
  row_begin_.reserve(static_cast<std::size_t>(n_actions()) * n + 1);
  for (int a = 0; a < n_actions(); ++a) {
    for (int z = 0; z < n; ++z) {
      row_begin_.push_back(row_dest_.size());
      const auto row = graph_.transition.row(a, z);
      for (int d = 0; d < n; ++d) {
        if (row[d] > 0.0) {
          row_dest_.push_back(d);
          row_prob_.push_back(row[d]);
        }
      }
    }
  }
  row_begin_.push_back(row_dest_.size());
}

int Environment::reset() {
  node_ = graph_.home;
  step_in_episode_ = 0;
  return observation();
}

int Environment::sample_repeats() {
  int k = 1;
  if (slip_.p_slip <= 0.0) return k;
  while (k < kMaxSlipRepeats && rng_.uniform() < slip_.p_slip) ++k;
  return k;
}

int Environment::sample_next(int action, int node) {
  // Zero entries never change the categorical draw, so sampling over the
  // support gives the same stream as sampling the dense row.
  const std::size_t r = static_cast<std::size_t>(action) * graph_.n_nodes() + node;
  const std::size_t b = row_begin_[r], e = row_begin_[r + 1];
  const std::size_t i = rng_.categorical(std::span<const double>(row_prob_.data() + b, e - b));
  return row_dest_[b + i];
}

StepOutcome Environment::step(int action) {
  if (action < 0 || action >= n_actions()) {
    throw std::out_of_range("step: action id " + std::to_string(action) + " out of range");
  }
  StepOutcome out;
  out.repeats = sample_repeats();
  for (int r = 0; r < out.repeats; ++r) node_ = sample_next(action, node_);
  out.node = node_;
  out.observation = graph_.emission[node_];
  ++step_in_episode_;
  if (episode_.reset == ResetMode::hard && step_in_episode_ >= episode_.episode_length) {
    out.episode_ended = true;
    reset();
  }
  return out;
}

EdgeSet::EdgeSet(const TransitionTensor& law) : n_states_(law.n_states()) {
  const int n = law.n_states();
  row_begin_.reserve(static_cast<std::size_t>(law.n_actions()) * n + 1);
  for (int a = 0; a < law.n_actions(); ++a) {
    for (int z = 0; z < n; ++z) {
      row_begin_.push_back(edges_.size());
      const auto row = law.row(a, z);
      for (int d = 0; d < n; ++d) {
        if (row[d] > 0.0) {
          edges_.push_back({a, z, d, row[d]});
          total_weight_ += row[d];
        }
      }
    }
  }
  row_begin_.push_back(edges_.size());
}

long EdgeSet::find(int action, int source, int destination) const {
  const std::size_t r = static_cast<std::size_t>(action) * n_states_ + source;
  if (r + 1 >= row_begin_.size()) return -1;
  for (std::size_t i = row_begin_[r]; i < row_begin_[r + 1]; ++i) {
    if (edges_[i].destination == destination) return static_cast<long>(i);
    if (edges_[i].destination > destination) break;
  }
  return -1;
}

TransitionTensor effective_step_law(const GroundTruthGraph& graph, SlippageConfig slip) {
  const int n = graph.n_nodes();
  const double p = slip.p_slip;
  if (p <= 0.0) return graph.transition;

  TransitionTensor law(graph.n_actions(), n, 0.0);
  std::vector<double> dist(n), next(n);
  std::vector<int> support, next_support;
  std::vector<char> mark(n, 0);
  for (int a = 0; a < graph.n_actions(); ++a) {
    for (int z = 0; z < n; ++z) {
      std::fill(dist.begin(), dist.end(), 0.0);
      dist[z] = 1.0;
      support.assign(1, z);
      auto out = law.row(a, z);
      double tail = 1.0;  // P(k >= current repeat)
      for (int k = 1; k <= kMaxSlipRepeats; ++k) {
        // One more application of the basic action, over the sparse support.
        next_support.clear();
        for (int s : support) {
          const double w = dist[s];
          dist[s] = 0.0;
          const auto row = graph.transition.row(a, s);
          for (int d = 0; d < n; ++d) {
            if (row[d] <= 0.0) continue;
            if (!mark[d]) {
              mark[d] = 1;
              next[d] = 0.0;
              next_support.push_back(d);
            }
            next[d] += w * row[d];
          }
        }
        for (int d : next_support) {
          mark[d] = 0;
          dist[d] = next[d];
        }
        support.swap(next_support);
        const double stop = (k == kMaxSlipRepeats) ? tail : tail * (1.0 - p);
        for (int d : support) out[d] += stop * dist[d];
        tail *= p;
        if (tail < 1e-300) break;
      }
    }
  }
  normalize_rows(law);
  return law;
}

EdgeSet transition_support(const Environment& env) {
  return EdgeSet(effective_step_law(env.graph(), env.slippage()));
}

}  // namespace efex
