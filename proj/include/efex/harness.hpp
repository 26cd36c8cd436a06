#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "efex/agent.hpp"
#include "efex/metrics.hpp"
#include "efex/serialization.hpp"
#include "efex/topologies.hpp"

namespace efex {

// Invalid experiment description (maps to CLI exit code 2).
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
  std::string name = "experiment";
  TopologySpec topology;
  double p_slip = 0.0;
  EpisodeConfig episode;
  AgentConfig agent;      // seed, steps and checkpoints are filled per cell
  bool auto_clones = true;  // 2 x ceil(nodes per observation)
  std::vector<PolicyKind> policies = {PolicyKind::efex};
  int n_seeds = 1;
  std::uint64_t seed = 0;
  long steps = 10000;
  std::vector<long> checkpoints;
  EvalProtocol eval;
  // Optional sweep axes; empty means the single base value.
  std::vector<double> sweep_unique_fraction;
  std::vector<double> sweep_p_slip;
};

// Parses and validates; throws SpecError. EFEX_SEED, when set, replaces the
// base seed.
ExperimentSpec parse_experiment_spec(const Json& j);
Json experiment_spec_to_json(const ExperimentSpec& spec);

// One (configuration, policy, seed) run.
struct CellSpec {
  std::string config_label;  // e.g. "uf=0.1,slip=0"
  double unique_fraction = 1.0;
  double p_slip = 0.0;
  PolicyKind policy = PolicyKind::efex;
  int seed_index = 0;
};

std::vector<CellSpec> expand_cells(const ExperimentSpec& spec);

// Canonical JSON of everything that determines a cell's output.
Json cell_key(const ExperimentSpec& spec, const CellSpec& cell);
std::uint64_t fnv1a64(const std::string& bytes);
std::string cell_id(const ExperimentSpec& spec, const CellSpec& cell);

// Seeds shared by both policies of a seed index, so runs are paired.
std::uint64_t graph_seed(const ExperimentSpec& spec, int seed_index);
std::uint64_t run_seed(const ExperimentSpec& spec, int seed_index);

// Log-likelihood gap against the ground-truth model at one checkpoint.
struct BoundCheck {
  long step = 0;
  double gap = 0.0;  // ELL(model) - ELL(ground truth)
  double gap_se = 0.0;
};

struct CellResult {
  CellSpec cell;
  MetricTrace trace;
  std::vector<BoundCheck> bound;
  RunRecord record;
};

// Runs one cell in memory. `progress` (optional) receives checkpoint rows.
CellResult run_cell(const ExperimentSpec& spec, const CellSpec& cell,
                    const std::function<void(const MetricRow&)>& progress = {});

struct AggregateRow {
  std::string config_label;
  std::string policy;
  long step = 0;
  int n = 0;
  double ell_mean = 0.0, ell_ci = 0.0;
  double wcov_mean = 0.0, wcov_ci = 0.0;
  double prec_mean = 0.0, prec_ci = 0.0;
};

// Mean and 1.96 * sd / sqrt(n) across seeds at each checkpoint.
std::vector<AggregateRow> aggregate_traces(const std::vector<std::pair<CellSpec, MetricTrace>>& traces);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

struct SweepOptions {
  std::filesystem::path out_dir = "efex-out";
  int jobs = 1;
  bool quiet = false;
};

struct SweepResult {
  std::vector<std::pair<CellSpec, MetricTrace>> traces;
  std::vector<AggregateRow> aggregate;
  int cells_run = 0;
  int cells_skipped = 0;
};

// Resumable: completed cells (by content hash) are loaded, not rerun.
// Writes spec.json, traces/*.csv, cells/*.json, graphs/*.dot, models/*.json,
// aggregate.csv and summary.json under out_dir.
SweepResult run_sweep(const ExperimentSpec& spec, const SweepOptions& options);

// A value that may be censored by a budget.
struct Censored {
  double value = 0.0;
  bool censored = false;
};

// Median of possibly censored values (censored count as +inf). nullopt when
// the median itself is censored.
std::optional<double> censored_quantile(std::vector<Censored> xs, double q);

struct ChainOptions {
  int length = 50;
  bool trap = false;
  int n_seeds = 20;
  int max_episodes_efex = 200;
  int max_episodes_random = 200;
  std::uint64_t seed = 0;
  double alpha = 2e-3;
  double gamma = 0.9999;
};

struct ChainPolicyResult {
  PolicyKind policy = PolicyKind::efex;
  std::vector<Censored> episodes;  // per seed
  std::optional<double> median, q25, q75;
};

struct ChainResult {
  ChainOptions options;
  int episode_length = 0;
  ChainPolicyResult efex;
  ChainPolicyResult random;
};

// Episodes until every chain transition has been seen once; episodes have
// length L + 9 and restart at node 1. Unaliased eFeX vs uniform random.
ChainResult chain_experiment(const ChainOptions& options);
Json chain_result_to_json(const ChainResult& r);

struct ScalingOptions {
  std::vector<int> sides = {11, 17, 23};
  double unique_fraction = 0.1;
  int n_seeds = 10;
  double threshold = 0.9;
  long efex_step_cap = 200000;
  // Random budget: this multiple of the eFeX median at the largest side, and
  // `random_cap_factor_small` times the eFeX median at the other sides.
  double random_budget_factor = 20.0;
  double random_cap_factor_small = 1000.0;
  double p_teleport = 0.1;
  std::uint64_t seed = 0;
  AgentConfig agent;  // alpha, gamma, learning schedule
  // Score each eFeX run's last learned model against the ground truth.
  bool check_bound = false;
  EvalProtocol bound_eval;
};

struct ScalingRow {
  int side = 0;
  int n_nodes = 0;
  std::string policy;
  long budget = 0;
  std::vector<Censored> steps;  // per seed
  std::optional<double> median;
  int censored = 0;
  std::vector<BoundCheck> bound;  // eFeX with check_bound only
  double seconds = 0.0;           // wall time for the row
};

struct ScalingResult {
  ScalingOptions options;
  std::vector<ScalingRow> rows;  // efex and random per side
  // random / eFeX median ratio per side; `ratio_is_lower_bound` when random
  // is censored (the ratio is then budget / eFeX median).
  std::vector<double> ratio;
  std::vector<bool> ratio_is_lower_bound;
};

// Steps until weighted coverage reaches the threshold on sparse mazes with
// teleport-on-exit.
ScalingResult scaling_experiment(const ScalingOptions& options,
                                 const std::function<void(const std::string&)>& log = {});
Json scaling_result_to_json(const ScalingResult& r);

}  // namespace efex
