#include "efex/agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace efex {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

enum Stream : std::uint64_t { kActions = 1, kInitModel = 2, kAnchor = 3, kValues = 4, kNoise = 5 };

CloneAllocation make_allocation(const AgentConfig& config, int n_observations) {
  if (config.unaliased || config.clones_per_obs.empty()) return CloneAllocation::uniform(n_observations, 1);
  if (config.clones_per_obs.size() == 1) return CloneAllocation::uniform(n_observations, config.clones_per_obs[0]);
  if (static_cast<int>(config.clones_per_obs.size()) != n_observations) {
    throw std::invalid_argument("clones_per_obs must have one entry per observation symbol");
  }
  return CloneAllocation(config.clones_per_obs);
}

}  // namespace

std::string policy_name(PolicyKind kind) { return kind == PolicyKind::efex ? "efex" : "random"; }

std::optional<PolicyKind> parse_policy(const std::string& name) {
  if (name == "efex") return PolicyKind::efex;
  if (name == "random") return PolicyKind::random;
  return std::nullopt;
}

void AgentConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("agent: alpha must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("agent: gamma must be in [0,1)");
  if (steps < 1) throw std::invalid_argument("agent: step budget must be >= 1");
  if (refit_period < 1 || replan_period < 1) throw std::invalid_argument("agent: schedules must be >= 1");
  if (refit_doubling_after < 0) throw std::invalid_argument("agent: refit_doubling_after must be >= 0");
  if (em_max_iters < 1 || viterbi_iters < 1) throw std::invalid_argument("agent: iteration counts must be >= 1");
  if (!(warm_start_noise >= 0.0 && warm_start_noise <= 1.0)) throw std::invalid_argument("agent: noise outside [0,1]");
  if (vi_max_sweeps_cold < 1 || vi_max_sweeps_warm < 1) throw std::invalid_argument("agent: VI sweeps must be >= 1");
  for (int c : clones_per_obs) {
    if (c < 1) throw std::invalid_argument("agent: clone counts must be >= 1");
  }
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] < 1 || checkpoints[i] > steps || (i > 0 && checkpoints[i] <= checkpoints[i - 1])) {
      throw std::invalid_argument("agent: checkpoints must be strictly increasing within [1, steps]");
    }
  }
}

ExplorationAgent::ExplorationAgent(PolicyKind policy, int n_observations, int n_actions, const AgentConfig& config)
    : policy_(policy),
      config_(config),
      n_actions_(n_actions),
      allocation_(make_allocation(config, n_observations)),
      rng_(config.seed),
      belief_(n_actions, allocation_.n_clones(), config.alpha),
      track_(allocation_.n_clones(), -std::numeric_limits<double>::infinity()) {
  config_.validate();
  soft_model_ = random_model(allocation_, n_actions, rng_.split(kInitModel).seed(), config.alpha);
  hard_model_ = soft_model_;
  utilities_ = utility_table(belief_);
  Rng value_rng = rng_.split(kValues);
  values_.resize(allocation_.n_clones());
  for (double& v : values_) v = value_rng.uniform();
  period_ = config.refit_period;
  next_refit_ = config.refit_period;
}

int ExplorationAgent::anchor_clone(int observation) {
  const int lo = allocation_.begin(observation), size = allocation_.size(observation);
  if (size == 1) return lo;
  // Most common clone at earlier episode starts with the same observation.
  std::map<int, int> votes;
  for (std::size_t e = 0; e + 1 < data_.episode_starts.size(); ++e) {
    const std::size_t n = data_.episode_starts[e];
    if (data_.observations[n] == observation) ++votes[decoded_[n]];
  }
  if (votes.empty()) {
    Rng anchor = rng_.split(kAnchor + 16 * data_.episode_starts.size());
    return lo + static_cast<int>(anchor.index(size));
  }
  int best = votes.begin()->first, best_votes = votes.begin()->second;
  for (const auto& [clone, n] : votes) {
    if (n > best_votes) {
      best = clone;
      best_votes = n;
    }
  }
  return best;
}

void ExplorationAgent::begin_episode(int observation) {
  data_.start_episode(observation);
  decoded_.push_back(anchor_clone(observation));
  restart_track(decoded_.back());
}

void ExplorationAgent::restart_track(int clone) {
  std::fill(track_.begin(), track_.end(), -std::numeric_limits<double>::infinity());
  track_[clone] = 0.0;
}

std::pair<int, int> ExplorationAgent::extend(int action, int observation) {
  // One max-product step of Viterbi over the current block: the end of the
  // MAP path and its predecessor. Transitions are the posterior mean of the
  // current counts, i.e. one Viterbi-training update of the decoded path, so
  // the track never lags behind transitions counted since the last refit.
  const int prev = data_.observations[data_.size() - 2];
  const int plo = allocation_.begin(prev), phi = allocation_.end(prev);
  const int lo = allocation_.begin(observation), hi = allocation_.end(observation);
  const double alpha = belief_.alpha();
  const double prior_mass = alpha * allocation_.n_clones();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  step_scores_.assign(hi - lo, kNegInf);
  step_from_.assign(hi - lo, plo);
  auto offer = [&](int j, double s, int i) {
    if (s > step_scores_[j - lo]) {
      step_scores_[j - lo] = s;
      step_from_[j - lo] = i;
    }
  };
  for (int i = plo; i < phi; ++i) {
    if (track_[i] == kNegInf) continue;
    const double log_denom = std::log(belief_.row_total(action, i) + prior_mass);
    const double base = track_[i] + std::log(alpha) - log_denom;
    for (int j = lo; j < hi; ++j) offer(j, base, i);
    for (const SparseCount& e : belief_.nonzeros(action, i)) {
      if (e.destination >= lo && e.destination < hi) offer(e.destination, track_[i] + std::log(e.count + alpha) - log_denom, i);
    }
  }
  int best = 0;
  for (int k = 1; k < hi - lo; ++k) {
    if (step_scores_[k] > step_scores_[best]) best = k;
  }
  const double top = step_scores_[best];
  std::fill(track_.begin() + plo, track_.begin() + phi, kNegInf);
  for (int k = 0; k < hi - lo; ++k) track_[lo + k] = step_scores_[k] - top;
  return {step_from_[best], lo + best};
}

void ExplorationAgent::replan() {
  const auto t0 = Clock::now();
  ViOptions opt;
  opt.gamma = config_.gamma;
  opt.tol = config_.vi_tol;
  opt.max_sweeps = planned_ ? config_.vi_max_sweeps_warm : config_.vi_max_sweeps_cold;
  ViResult r = value_iteration(belief_, utilities_, opt, values_);
  values_ = std::move(r.values);
  ++plan_stats_.plans;
  if (!r.converged) ++plan_stats_.unconverged;
  plan_stats_.max_residual = std::max(plan_stats_.max_residual, r.residual);
  planned_ = true;
  steps_since_plan_ = 0;
  seconds_.plan += seconds_since(t0);
}

int ExplorationAgent::choose_action() {
  if (data_.empty()) throw std::logic_error("choose_action before begin_episode");
  if (policy_ == PolicyKind::random) return static_cast<int>(rng_.index(static_cast<std::size_t>(n_actions_)));
  if (!planned_ || steps_since_plan_ >= config_.replan_period) replan();
  const auto t0 = Clock::now();
  const int a = greedy_action(belief_, utilities_, config_.gamma, values_, decoded_.back());
  seconds_.act += seconds_since(t0);
  return a;
}

void ExplorationAgent::observe(int action, int observation) {
  if (action < 0 || action >= n_actions_) throw std::out_of_range("observe: action out of range");
  data_.append(action, observation);
  const auto [from, to] = extend(action, observation);
  const std::size_t n = decoded_.size() - 1;
  if (from != decoded_[n]) {
    // The MAP track revised the previous state; move its incoming count.
    if (n > 0 && data_.has_transition(n - 1)) {
      const int a_prev = data_.actions[n - 1];
      belief_.remove_count(a_prev, decoded_[n - 1], decoded_[n]);
      belief_.add_count(a_prev, decoded_[n - 1], from);
      utilities_(decoded_[n - 1], a_prev) = belief_.row_utility(a_prev, decoded_[n - 1]);
    }
    decoded_[n] = from;
  }
  decoded_.push_back(to);
  belief_.add_count(action, from, to);
  utilities_(from, action) = belief_.row_utility(action, from);
  ++steps_since_plan_;
}

bool ExplorationAgent::refit_due(long step) const { return step >= next_refit_; }

void ExplorationAgent::refit() {
  const long step = static_cast<long>(data_.size()) - static_cast<long>(data_.n_episodes());
  if (step >= next_refit_) {
    next_refit_ += period_;
    ++refits_;
    if (config_.refit_doubling_after > 0 && refits_ % config_.refit_doubling_after == 0) period_ *= 2;
  }
  const auto t0 = Clock::now();
  if (config_.unaliased || !config_.learn) {
    // Counts are exact (or the model is frozen); only the point model moves.
    hard_model_.transition = mean_transition(belief_);
    seconds_.learn += seconds_since(t0);
    return;
  }
  LearnedModel init = soft_model_;
  if (has_fit_ && config_.warm_start_noise > 0.0) {
    Rng noise = rng_.split(kNoise + 16 * static_cast<std::uint64_t>(step));
    const LearnedModel fresh = random_model(allocation_, n_actions_, noise.seed(), config_.alpha);
    const double eps = config_.warm_start_noise;
    auto& t = init.transition.values();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - eps) * t[i] + eps * fresh.transition.values()[i];
  }
  EmOptions em;
  em.pseudocount = config_.alpha;
  em.max_iters = config_.em_max_iters;
  em.tol = config_.em_tol;
  soft_model_ = em_fit(data_, allocation_, std::move(init), em).model;
  hard_model_ = viterbi_train(soft_model_, data_, allocation_, config_.alpha, config_.viterbi_iters).model;
  decoded_ = viterbi_decode(hard_model_, allocation_, data_).clones;
  belief_.set_counts(counts_from_decoding(decoded_, data_, n_actions_, allocation_.n_clones()));
  restart_track(decoded_.back());
  utilities_ = utility_table(belief_);
  planned_ = false;
  has_fit_ = true;
  seconds_.learn += seconds_since(t0);
}

RunRecord run_agent(Environment& env, PolicyKind policy, const AgentConfig& config, const RunHooks& hooks) {
  config.validate();
  ExplorationAgent agent(policy, env.n_observations(), env.n_actions(), config);
  RunRecord rec;
  rec.policy = policy;
  rec.seed = config.seed;
  rec.allocation = agent.allocation();

  const int first = env.reset();
  rec.trajectory.start_episode(first, env.node());
  agent.begin_episode(first);
  std::size_t next_checkpoint = 0;
  for (long step = 1; step <= config.steps; ++step) {
    const int action = agent.choose_action();
    const int source = env.node();
    const StepOutcome out = env.step(action);
    rec.trajectory.append(action, out.observation, out.node);
    agent.observe(action, out.observation);
    if (out.episode_ended) {
      const int o = env.observation();
      rec.trajectory.start_episode(o, env.node());
      agent.begin_episode(o);
    }
    rec.steps = step;
    const bool stop = hooks.on_step && hooks.on_step({step, source, action, out.node, out.episode_ended});
    const bool checkpoint = next_checkpoint < config.checkpoints.size() && config.checkpoints[next_checkpoint] == step;
    bool refitted = false;
    if (!stop && agent.refit_due(step)) {
      agent.refit();
      refitted = true;
    }
    if (checkpoint) {
      if (!refitted) agent.refit();
      ModelSnapshot snap{step, agent.model(), agent.belief().counts()};
      if (hooks.on_checkpoint) hooks.on_checkpoint(snap);
      rec.snapshots.push_back(std::move(snap));
      ++next_checkpoint;
    }
    if (stop) {
      rec.stopped_early = step < config.steps;
      break;
    }
  }
  rec.seconds = agent.seconds();
  rec.planning = agent.planning();
  rec.refits = agent.refits();
  if (agent.refits() > 0) rec.final_model = agent.model();
  return rec;
}

}  // namespace efex
