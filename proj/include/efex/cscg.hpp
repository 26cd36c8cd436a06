#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "efex/tensor.hpp"

namespace efex {

// Maps each observation symbol to a contiguous block of clone ids.
class CloneAllocation {
 public:
  CloneAllocation() = default;
  explicit CloneAllocation(std::vector<int> clones_per_obs);
  static CloneAllocation uniform(int n_observations, int clones_per_obs);

  int n_observations() const { return static_cast<int>(counts_.size()); }
  int n_clones() const { return offsets_.empty() ? 0 : offsets_.back(); }
  int begin(int x) const { return offsets_[x]; }
  int end(int x) const { return offsets_[x + 1]; }
  int size(int x) const { return counts_[x]; }
  int observation_of(int clone) const { return obs_of_clone_[clone]; }
  const std::vector<int>& clones_per_obs() const { return counts_; }

  friend bool operator==(const CloneAllocation& a, const CloneAllocation& b) { return a.counts_ == b.counts_; }

 private:
  std::vector<int> counts_;
  std::vector<int> offsets_;
  std::vector<int> obs_of_clone_;
};

// Twice the average number of ground-truth nodes per observation, rounded up.
int default_clones_per_obs(int n_nodes, int n_observations);

struct LearnedModel {
  TransitionTensor transition;  // (n_actions, n_clones, n_clones)
  std::vector<double> initial;  // P(z_1)
  double pseudocount = 0.0;

  int n_actions() const { return transition.n_actions(); }
  int n_clones() const { return transition.n_states(); }
  // Throws std::invalid_argument on shape or normalization errors.
  void validate(const CloneAllocation& allocation) const;
};

inline constexpr int kNoAction = -1;

// Observation-action stream split into episodes. actions[n] is taken after
// observations[n]; it is kNoAction at the last step of an episode.
struct Trajectory {
  std::vector<int> observations;
  std::vector<int> actions;
  std::vector<int> true_nodes;  // empty, or one per observation (evaluation only)
  std::vector<std::size_t> episode_starts;

  std::size_t size() const { return observations.size(); }
  bool empty() const { return observations.empty(); }
  std::size_t n_episodes() const { return episode_starts.size(); }
  std::size_t episode_end(std::size_t e) const {
    return e + 1 < episode_starts.size() ? episode_starts[e + 1] : observations.size();
  }
  // True when step n -> n+1 is a transition inside one episode.
  bool has_transition(std::size_t n) const;

  void start_episode(int observation, std::optional<int> node = std::nullopt);
  void append(int action, int observation, std::optional<int> node = std::nullopt);

  void validate(int n_observations, int n_actions) const;
};

// Builds a single-episode trajectory; actions may have length N or N-1.
Trajectory make_trajectory(std::vector<int> observations, std::vector<int> actions,
                           std::vector<std::size_t> episode_starts = {0});

// Uniform initial distribution and symmetric Dirichlet(1) rows.
LearnedModel random_model(const CloneAllocation& allocation, int n_actions, std::uint64_t seed, double pseudocount);

LearnedModel uniform_model(const CloneAllocation& allocation, int n_actions, double pseudocount);

// log P(x_1..x_N | a_1..a_N, T). -inf if the data are impossible under the model.
double log_likelihood(const LearnedModel& model, const CloneAllocation& allocation, const Trajectory& trajectory);

struct EmOptions {
  double pseudocount = 2e-3;
  int max_iters = 100;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct EmResult {
  LearnedModel model;
  std::vector<double> log_likelihood;  // data log-likelihood of each E-step's model
  std::vector<double> objective;       // log-likelihood + pseudocount * sum(log T)
  int iterations = 0;
  bool converged = false;
};

EmResult em_fit(const Trajectory& trajectory, const CloneAllocation& allocation, int n_actions,
                const EmOptions& options);
// Same, starting from `init` instead of a random model.
EmResult em_fit(const Trajectory& trajectory, const CloneAllocation& allocation, LearnedModel init,
                const EmOptions& options);

struct Decoding {
  std::vector<int> clones;
  double log_probability = 0.0;  // log P(x, z_hat) under the decoding model
  bool smoothed = false;         // fell back to pseudocount-smoothed transitions
};

// Max-probability clone path, restarting at each episode. Ties go to the
// lowest clone id.
class ViterbiDecoder {
 public:
  ViterbiDecoder(const LearnedModel& model, const CloneAllocation& allocation);
  Decoding decode(const Trajectory& trajectory) const;

 private:
  Decoding decode_with(const TransitionTensor& log_t, std::span<const double> log_initial,
                       const Trajectory& trajectory, bool& impossible) const;

  const CloneAllocation* allocation_;
  double pseudocount_;
  const LearnedModel* model_;
  TransitionTensor log_t_;
  std::vector<double> log_initial_;
};

Decoding viterbi_decode(const LearnedModel& model, const CloneAllocation& allocation, const Trajectory& trajectory);

CountTensor counts_from_decoding(std::span<const int> clones, std::span<const int> actions,
                                 std::span<const std::size_t> episode_starts, int n_actions, int n_clones);
CountTensor counts_from_decoding(std::span<const int> clones, const Trajectory& trajectory, int n_actions,
                                 int n_clones);

struct ViterbiTrainResult {
  LearnedModel model;
  std::vector<double> path_score;  // log P(x, z_hat_k | T_k) for the model decoded at iteration k
  std::vector<double> objective;   // path_score + pseudocount * sum(log T_k)
};

ViterbiTrainResult viterbi_train(const LearnedModel& model, const Trajectory& trajectory,
                                 const CloneAllocation& allocation, double pseudocount, int iters);

struct VbResult {
  LearnedModel model;                // posterior-mean transitions
  std::vector<double> free_energy;   // one value per iteration
};

// Dirichlet prior per transition row entry (a, z, z').
VbResult vb_refine(const LearnedModel& model, const Trajectory& trajectory, const CloneAllocation& allocation,
                   const Tensor3& prior, int iters);
VbResult vb_refine(const LearnedModel& model, const Trajectory& trajectory, const CloneAllocation& allocation,
                   double symmetric_prior, int iters);

// Expected transition counts and data log-likelihood under `model`.
double expected_counts(const LearnedModel& model, const CloneAllocation& allocation, const Trajectory& trajectory,
                       CountTensor& counts);

// Row-normalized (counts + pseudocount) over all destinations.
TransitionTensor normalize_counts(const CountTensor& counts, double pseudocount);

}  // namespace efex
