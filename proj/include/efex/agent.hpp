#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "efex/belief.hpp"
#include "efex/cscg.hpp"
#include "efex/env.hpp"
#include "efex/planner.hpp"
#include "efex/random.hpp"

namespace efex {

enum class PolicyKind { efex, random };

std::string policy_name(PolicyKind kind);
std::optional<PolicyKind> parse_policy(const std::string& name);

struct AgentConfig {
  double alpha = 2e-3;
  double gamma = 0.9999;
  // Clones per observation symbol; empty means 1 per symbol (unaliased mode
  // forces that anyway).
  std::vector<int> clones_per_obs;
  long steps = 10000;
  std::uint64_t seed = 0;
  bool unaliased = false;
  // Refit the model every `refit_period` steps; the period doubles after
  // every `refit_doubling_after` refits (0 disables doubling).
  int refit_period = 100;
  int refit_doubling_after = 20;
  bool learn = true;  // false: no model refits (coverage-only runs)
  int replan_period = 1;
  int em_max_iters = 100;
  double em_tol = 1e-6;
  int viterbi_iters = 5;
  // Warm-started EM mixes the previous soft model with this much fresh
  // Dirichlet noise, so idle clones can still be recruited.
  double warm_start_noise = 0.05;
  double vi_tol = 1e-9;
  int vi_max_sweeps_cold = 10000;
  int vi_max_sweeps_warm = 500;
  std::vector<long> checkpoints;  // steps at which to snapshot the model

  void validate() const;
};

struct ModelSnapshot {
  long step = 0;
  LearnedModel model;  // Viterbi-trained model used for decoding
  CountTensor counts;
};

struct PhaseTimes {
  double act = 0.0;
  double plan = 0.0;
  double learn = 0.0;
};

struct PlanStats {
  long plans = 0;
  long unconverged = 0;  // stopped at the sweep cap
  double max_residual = 0.0;
};

struct RunRecord {
  PolicyKind policy = PolicyKind::efex;
  std::uint64_t seed = 0;
  CloneAllocation allocation;
  Trajectory trajectory;  // includes ground-truth nodes for evaluation
  std::vector<ModelSnapshot> snapshots;
  PhaseTimes seconds;
  PlanStats planning;
  LearnedModel final_model;  // last fitted model; empty when never refit
  long steps = 0;
  bool stopped_early = false;
  int refits = 0;
};

// Ground-truth view of one executed step, for observers outside the agent.
struct TrueTransition {
  long step = 0;  // 1-based
  int source = 0;
  int action = 0;
  int destination = 0;
  bool episode_ended = false;
};

struct RunHooks {
  // Return true to stop the run after this step.
  std::function<bool(const TrueTransition&)> on_step;
  std::function<void(const ModelSnapshot&)> on_checkpoint;
};

// Decision-making side of a run. It sees observations and its own actions
// only; ground-truth nodes never reach it.
class ExplorationAgent {
 public:
  ExplorationAgent(PolicyKind policy, int n_observations, int n_actions, const AgentConfig& config);

  void begin_episode(int observation);
  int choose_action();
  void observe(int action, int observation);
  // Refits the model on all data and re-decodes.
  void refit();
  bool refit_due(long step) const;

  const CloneAllocation& allocation() const { return allocation_; }
  const LearnedModel& model() const { return hard_model_; }
  const DirichletBelief& belief() const { return belief_; }
  const std::vector<int>& decoding() const { return decoded_; }
  const Trajectory& data() const { return data_; }
  const std::vector<double>& values() const { return values_; }
  int refits() const { return refits_; }
  const PhaseTimes& seconds() const { return seconds_; }
  const PlanStats& planning() const { return plan_stats_; }

 private:
  int anchor_clone(int observation);
  // Advances the running MAP track; returns (predecessor, current) clones.
  std::pair<int, int> extend(int action, int observation);
  void restart_track(int clone);
  void replan();
  void refresh_utilities();

  PolicyKind policy_;
  AgentConfig config_;
  int n_actions_;
  CloneAllocation allocation_;
  Rng rng_;
  Trajectory data_;
  std::vector<int> decoded_;
  LearnedModel soft_model_;
  LearnedModel hard_model_;
  bool has_fit_ = false;
  DirichletBelief belief_;
  UtilityTable utilities_;
  std::vector<double> track_;  // log max-product scores, -inf off the current block
  std::vector<double> step_scores_;
  std::vector<int> step_from_;
  std::vector<double> values_;
  bool planned_ = false;
  long steps_since_plan_ = 0;
  int refits_ = 0;
  long next_refit_ = 0;
  int period_ = 0;
  PhaseTimes seconds_;
  PlanStats plan_stats_;
};

// Runs `policy` in `env` for config.steps steps (or until a hook stops it).
RunRecord run_agent(Environment& env, PolicyKind policy, const AgentConfig& config, const RunHooks& hooks = {});

inline RunRecord run_efex(Environment& env, const AgentConfig& config, const RunHooks& hooks = {}) {
  return run_agent(env, PolicyKind::efex, config, hooks);
}
inline RunRecord run_random(Environment& env, const AgentConfig& config, const RunHooks& hooks = {}) {
  return run_agent(env, PolicyKind::random, config, hooks);
}

}  // namespace efex
