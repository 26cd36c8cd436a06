#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "efex/random.hpp"
#include "efex/tensor.hpp"

namespace efex {

// Row-major 2D embedding used for occupancy previews. cell[node] is
// row * cols + col.
struct GridLayout {
  int rows = 0;
  int cols = 0;
  std::vector<int> cell;
};

// Ground-truth latent multigraph with deterministic (possibly aliased)
// emissions.
struct GroundTruthGraph {
  TransitionTensor transition;  // (n_actions, n_nodes, n_nodes)
  std::vector<int> emission;    // observation id per node
  int home = 0;
  int n_observations = 0;
  // boundary[a * n_nodes + z] != 0 when action a at z is a self-loop created
  // by trying to leave the topology.
  std::vector<std::uint8_t> boundary;
  std::optional<GridLayout> layout;

  int n_actions() const { return transition.n_actions(); }
  int n_nodes() const { return transition.n_states(); }
  bool is_boundary(int a, int z) const {
    return !boundary.empty() && boundary[static_cast<std::size_t>(a) * n_nodes() + z] != 0;
  }

  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

struct SlippageConfig {
  double p_slip = 0.0;
};

enum class ResetMode { hard, teleport, none };

struct EpisodeConfig {
  int episode_length = 100;
  ResetMode reset = ResetMode::hard;
  double p_teleport = 0.1;
};

// Slippage repeats are capped so a step does bounded work.
inline constexpr int kMaxSlipRepeats = 64;

struct StepOutcome {
  int observation = 0;  // observation at the landing node
  int node = 0;         // landing node; evaluation only
  bool episode_ended = false;
  int repeats = 1;
};

// Boundary self-loops become "stay with 1 - p, jump home with p".
GroundTruthGraph with_teleport(GroundTruthGraph graph, double p_teleport);

class Environment {
 public:
  Environment(GroundTruthGraph graph, SlippageConfig slip, EpisodeConfig episode, std::uint64_t seed);

  int reset();
  StepOutcome step(int action);

  int observation() const { return graph_.emission[node_]; }
  int node() const { return node_; }
  int step_in_episode() const { return step_in_episode_; }

  // Effective graph: teleport edges are already folded in when enabled.
  const GroundTruthGraph& graph() const { return graph_; }
  const SlippageConfig& slippage() const { return slip_; }
  const EpisodeConfig& episode() const { return episode_; }
  std::uint64_t seed() const { return seed_; }

  int n_actions() const { return graph_.n_actions(); }
  int n_observations() const { return graph_.n_observations; }

 private:
  int sample_repeats();
  int sample_next(int action, int node);

  GroundTruthGraph graph_;
  // Nonzero transition entries per (a, z) row, in destination order.
  std::vector<std::size_t> row_begin_;
  std::vector<int> row_dest_;
  std::vector<double> row_prob_;
  SlippageConfig slip_;
  EpisodeConfig episode_;
  std::uint64_t seed_;
  Rng rng_;
  int node_ = 0;
  int step_in_episode_ = 0;
};

struct Edge {
  int action = 0;
  int source = 0;
  int destination = 0;
  double probability = 0.0;
};

// Support of a one-step transition law, with probabilities.
class EdgeSet {
 public:
  EdgeSet() = default;
  explicit EdgeSet(const TransitionTensor& law);

  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }
  double total_weight() const { return total_weight_; }
  // Index into edges(), or -1 when (a, z, z') is not in the support.
  long find(int action, int source, int destination) const;
  // Edges leaving `source` under `action`, sorted by destination.
  std::span<const Edge> row(int action, int source) const {
    const std::size_t r = static_cast<std::size_t>(action) * n_states_ + source;
    return {edges_.data() + row_begin_[r], row_begin_[r + 1] - row_begin_[r]};
  }
  int n_states() const { return n_states_; }

 private:
  int n_states_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> row_begin_;  // CSR offsets per (a, z)
  double total_weight_ = 0.0;
};

// One-step law of an executed action under slippage: the basic action
// repeated k times with P(k) = (1-p) p^(k-1), k capped at kMaxSlipRepeats.
TransitionTensor effective_step_law(const GroundTruthGraph& graph, SlippageConfig slip);

// Exact support of the environment's one-step law.
EdgeSet transition_support(const Environment& env);

}  // namespace efex
