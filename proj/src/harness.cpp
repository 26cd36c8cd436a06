#include "efex/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace efex {
namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw SpecError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw SpecError(std::string(where) + ": unknown field '" + key + "'");
  }
}

template <class T>
void read_opt(const Json& j, const char* key, T& out, const char* where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw SpecError(std::string(where) + "." + key + ": wrong type");
  }
}

std::string reset_name(ResetMode m) {
  switch (m) {
    case ResetMode::hard: return "hard";
    case ResetMode::teleport: return "teleport";
    case ResetMode::none: return "none";
  }
  return "hard";
}

ResetMode parse_reset(const std::string& s) {
  if (s == "hard") return ResetMode::hard;
  if (s == "teleport") return ResetMode::teleport;
  if (s == "none") return ResetMode::none;
  throw SpecError("episode.reset: expected hard, teleport or none, got '" + s + "'");
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::string config_label(double uf, double slip) { return "uf=" + format_double(uf) + ",slip=" + format_double(slip); }

std::string trace_name(const ExperimentSpec& spec, const CellSpec& cell) {
  return policy_name(cell.policy) + "-s" + std::to_string(cell.seed_index) + "-" + cell_id(spec, cell) + ".csv";
}

CloneAllocation agent_allocation(const AgentConfig& cfg, int n_observations) {
  if (cfg.unaliased || cfg.clones_per_obs.empty()) return CloneAllocation::uniform(n_observations, 1);
  if (cfg.clones_per_obs.size() == 1) return CloneAllocation::uniform(n_observations, cfg.clones_per_obs[0]);
  return CloneAllocation(cfg.clones_per_obs);
}

Json row_to_json(const MetricRow& r) {
  return {{"step", r.step}, {"ell", r.ell}, {"ell_se", r.ell_se}, {"wcov", r.wcov}, {"prec", r.prec}, {"prec_se", r.prec_se}};
}

Json optional_json(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

Json censored_json(const std::vector<Censored>& xs) {
  Json out = Json::array();
  for (const auto& c : xs) out.push_back(c.censored ? Json(nullptr) : Json(c.value));
  return out;
}

}  // namespace

ExperimentSpec parse_experiment_spec(const Json& j) {
  ExperimentSpec s;
  check_keys(j, "spec",
             {"name", "topology", "p_slip", "episode", "agent", "policies", "n_seeds", "seed", "steps", "checkpoints",
              "eval", "sweep"});
  read_opt(j, "name", s.name, "spec");
  if (!j.contains("topology")) throw SpecError("spec: missing field 'topology'");
  const Json& t = j.at("topology");
  check_keys(t, "topology", {"kind", "size", "unique_fraction", "stochastic_trap", "loop_fraction", "seed"});
  std::string kind;
  read_opt(t, "kind", kind, "topology");
  const auto k = parse_topology_kind(kind);
  if (!k) throw SpecError("topology.kind: unknown kind '" + kind + "'");
  s.topology.kind = *k;
  read_opt(t, "size", s.topology.size, "topology");
  read_opt(t, "unique_fraction", s.topology.unique_fraction, "topology");
  read_opt(t, "stochastic_trap", s.topology.stochastic_trap, "topology");
  read_opt(t, "loop_fraction", s.topology.loop_fraction, "topology");
  read_opt(t, "seed", s.topology.seed, "topology");

  read_opt(j, "p_slip", s.p_slip, "spec");
  if (j.contains("episode")) {
    const Json& e = j.at("episode");
    check_keys(e, "episode", {"length", "reset", "p_teleport"});
    read_opt(e, "length", s.episode.episode_length, "episode");
    std::string reset = reset_name(s.episode.reset);
    read_opt(e, "reset", reset, "episode");
    s.episode.reset = parse_reset(reset);
    read_opt(e, "p_teleport", s.episode.p_teleport, "episode");
  }
  if (j.contains("agent")) {
    const Json& a = j.at("agent");
    check_keys(a, "agent",
               {"alpha", "gamma", "clones_per_obs", "unaliased", "refit_period", "refit_doubling_after", "learn",
                "replan_period", "em_max_iters", "em_tol", "viterbi_iters", "warm_start_noise", "vi_tol",
                "vi_max_sweeps_cold", "vi_max_sweeps_warm"});
    AgentConfig& c = s.agent;
    read_opt(a, "alpha", c.alpha, "agent");
    read_opt(a, "gamma", c.gamma, "agent");
    if (a.contains("clones_per_obs")) {
      const Json& v = a.at("clones_per_obs");
      if (v.is_string() && v.get<std::string>() == "auto") {
        s.auto_clones = true;
      } else if (v.is_number_integer()) {
        s.auto_clones = false;
        c.clones_per_obs = {v.get<int>()};
      } else if (v.is_array()) {
        s.auto_clones = false;
        read_opt(a, "clones_per_obs", c.clones_per_obs, "agent");
      } else {
        throw SpecError("agent.clones_per_obs: expected \"auto\", an integer or a list");
      }
    }
    read_opt(a, "unaliased", c.unaliased, "agent");
    read_opt(a, "refit_period", c.refit_period, "agent");
    read_opt(a, "refit_doubling_after", c.refit_doubling_after, "agent");
    read_opt(a, "learn", c.learn, "agent");
    read_opt(a, "replan_period", c.replan_period, "agent");
    read_opt(a, "em_max_iters", c.em_max_iters, "agent");
    read_opt(a, "em_tol", c.em_tol, "agent");
    read_opt(a, "viterbi_iters", c.viterbi_iters, "agent");
    read_opt(a, "warm_start_noise", c.warm_start_noise, "agent");
    read_opt(a, "vi_tol", c.vi_tol, "agent");
    read_opt(a, "vi_max_sweeps_cold", c.vi_max_sweeps_cold, "agent");
    read_opt(a, "vi_max_sweeps_warm", c.vi_max_sweeps_warm, "agent");
  }
  if (j.contains("policies")) {
    std::vector<std::string> names;
    read_opt(j, "policies", names, "spec");
    s.policies.clear();
    for (const auto& n : names) {
      const auto p = parse_policy(n);
      if (!p) throw SpecError("policies: unknown policy '" + n + "'");
      s.policies.push_back(*p);
    }
  }
  read_opt(j, "n_seeds", s.n_seeds, "spec");
  read_opt(j, "seed", s.seed, "spec");
  read_opt(j, "steps", s.steps, "spec");
  read_opt(j, "checkpoints", s.checkpoints, "spec");
  if (j.contains("eval")) {
    const Json& e = j.at("eval");
    check_keys(e, "eval", {"n_walks", "walk_length", "seed"});
    read_opt(e, "n_walks", s.eval.n_walks, "eval");
    read_opt(e, "walk_length", s.eval.walk_length, "eval");
    read_opt(e, "seed", s.eval.seed, "eval");
  }
  if (j.contains("sweep")) {
    const Json& w = j.at("sweep");
    check_keys(w, "sweep", {"unique_fraction", "p_slip"});
    read_opt(w, "unique_fraction", s.sweep_unique_fraction, "sweep");
    read_opt(w, "p_slip", s.sweep_p_slip, "sweep");
  }

  if (const char* env_seed = std::getenv("EFEX_SEED"); env_seed && *env_seed) {
    try {
      s.seed = std::stoull(env_seed);
    } catch (const std::exception&) {
      throw SpecError(std::string("EFEX_SEED: not an unsigned integer: ") + env_seed);
    }
  }

  if (s.checkpoints.empty()) {
    const long every = std::max(1L, s.steps / 10);
    for (long c = every; c <= s.steps; c += every) s.checkpoints.push_back(c);
  }

  // Semantic checks.
  if (s.n_seeds < 1) throw SpecError("n_seeds must be >= 1");
  if (s.steps < 1) throw SpecError("steps must be >= 1");
  if (s.policies.empty()) throw SpecError("policies must not be empty");
  for (std::size_t i = 0; i < s.checkpoints.size(); ++i) {
    if (s.checkpoints[i] < 1 || s.checkpoints[i] > s.steps) throw SpecError("checkpoints must lie in [1, steps]");
    if (i > 0 && s.checkpoints[i] <= s.checkpoints[i - 1]) throw SpecError("checkpoints must strictly increase");
  }
  auto check_fraction = [](double uf) {
    if (!(uf > 0.0 && uf <= 1.0)) throw SpecError("unique_fraction must lie in (0, 1]");
  };
  auto check_slip = [](double p) {
    if (!(p >= 0.0 && p < 1.0)) throw SpecError("p_slip must lie in [0, 1)");
  };
  check_fraction(s.topology.unique_fraction);
  check_slip(s.p_slip);
  for (double uf : s.sweep_unique_fraction) check_fraction(uf);
  for (double p : s.sweep_p_slip) check_slip(p);
  if (s.episode.episode_length < 1) throw SpecError("episode.length must be >= 1");
  if (!(s.episode.p_teleport > 0.0 && s.episode.p_teleport <= 1.0)) throw SpecError("episode.p_teleport must lie in (0, 1]");
  if (s.eval.n_walks < 1 || s.eval.walk_length < 2) throw SpecError("eval: n_walks >= 1 and walk_length >= 2 required");
  try {
    AgentConfig probe = s.agent;
    probe.steps = s.steps;
    probe.checkpoints = s.checkpoints;
    probe.validate();
    TopologySpec t0 = s.topology;
    (void)build_topology(t0);
  } catch (const SpecError&) {
    throw;
  } catch (const std::exception& e) {
    throw SpecError(e.what());
  }
  return s;
}

Json experiment_spec_to_json(const ExperimentSpec& s) {
  Json j;
  j["name"] = s.name;
  j["topology"] = {{"kind", topology_kind_name(s.topology.kind)},
                   {"size", s.topology.size},
                   {"unique_fraction", s.topology.unique_fraction},
                   {"stochastic_trap", s.topology.stochastic_trap},
                   {"loop_fraction", s.topology.loop_fraction},
                   {"seed", s.topology.seed}};
  j["p_slip"] = s.p_slip;
  j["episode"] = {{"length", s.episode.episode_length},
                  {"reset", reset_name(s.episode.reset)},
                  {"p_teleport", s.episode.p_teleport}};
  const AgentConfig& c = s.agent;
  Json clones = s.auto_clones ? Json("auto")
                : c.clones_per_obs.size() == 1 ? Json(c.clones_per_obs[0])
                                               : Json(c.clones_per_obs);
  j["agent"] = {{"alpha", c.alpha},
                {"gamma", c.gamma},
                {"clones_per_obs", clones},
                {"unaliased", c.unaliased},
                {"refit_period", c.refit_period},
                {"refit_doubling_after", c.refit_doubling_after},
                {"learn", c.learn},
                {"replan_period", c.replan_period},
                {"em_max_iters", c.em_max_iters},
                {"em_tol", c.em_tol},
                {"viterbi_iters", c.viterbi_iters},
                {"warm_start_noise", c.warm_start_noise},
                {"vi_tol", c.vi_tol},
                {"vi_max_sweeps_cold", c.vi_max_sweeps_cold},
                {"vi_max_sweeps_warm", c.vi_max_sweeps_warm}};
  Json policies = Json::array();
  for (PolicyKind p : s.policies) policies.push_back(policy_name(p));
  j["policies"] = policies;
  j["n_seeds"] = s.n_seeds;
  j["seed"] = s.seed;
  j["steps"] = s.steps;
  j["checkpoints"] = s.checkpoints;
  j["eval"] = {{"n_walks", s.eval.n_walks}, {"walk_length", s.eval.walk_length}, {"seed", s.eval.seed}};
  if (!s.sweep_unique_fraction.empty() || !s.sweep_p_slip.empty()) {
    j["sweep"] = {{"unique_fraction", s.sweep_unique_fraction}, {"p_slip", s.sweep_p_slip}};
  }
  return j;
}

std::vector<CellSpec> expand_cells(const ExperimentSpec& spec) {
  const std::vector<double> ufs =
      spec.sweep_unique_fraction.empty() ? std::vector<double>{spec.topology.unique_fraction} : spec.sweep_unique_fraction;
  const std::vector<double> slips = spec.sweep_p_slip.empty() ? std::vector<double>{spec.p_slip} : spec.sweep_p_slip;
  std::vector<CellSpec> cells;
  for (double uf : ufs) {
    for (double slip : slips) {
      for (PolicyKind p : spec.policies) {
        for (int s = 0; s < spec.n_seeds; ++s) cells.push_back({config_label(uf, slip), uf, slip, p, s});
      }
    }
  }
  return cells;
}

Json cell_key(const ExperimentSpec& spec, const CellSpec& cell) {
  Json base = experiment_spec_to_json(spec);
  base.erase("name");
  base.erase("policies");
  base.erase("n_seeds");
  base.erase("sweep");
  base["topology"]["unique_fraction"] = cell.unique_fraction;
  base["p_slip"] = cell.p_slip;
  base["policy"] = policy_name(cell.policy);
  base["seed_index"] = cell.seed_index;
  return base;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string cell_id(const ExperimentSpec& spec, const CellSpec& cell) {
  // nlohmann objects are key-sorted, so dump() is canonical.
  return hex64(fnv1a64(cell_key(spec, cell).dump()));
}

std::uint64_t graph_seed(const ExperimentSpec& spec, int seed_index) {
  return Rng(spec.seed ^ splitmix64(spec.topology.seed)).split(2 * static_cast<std::uint64_t>(seed_index)).seed();
}

std::uint64_t run_seed(const ExperimentSpec& spec, int seed_index) {
  return Rng(spec.seed ^ splitmix64(spec.topology.seed)).split(2 * static_cast<std::uint64_t>(seed_index) + 1).seed();
}

CellResult run_cell(const ExperimentSpec& spec, const CellSpec& cell,
                    const std::function<void(const MetricRow&)>& progress) {
  TopologySpec ts = spec.topology;
  ts.unique_fraction = cell.unique_fraction;
  ts.seed = graph_seed(spec, cell.seed_index);
  const GroundTruthGraph graph = build_topology(ts);
  const SlippageConfig slip{cell.p_slip};
  const std::uint64_t seed = run_seed(spec, cell.seed_index);
  Environment env(graph, slip, spec.episode, Rng(seed).split(1).seed());

  CoverageTracker tracker(transition_support(env));
  EvalProtocol protocol = spec.eval;
  protocol.seed = Rng(ts.seed ^ splitmix64(spec.eval.seed)).split(3).seed();
  const std::vector<Trajectory> walks = sample_walks(env.graph(), slip, protocol);
  const GroundTruthModel truth = gt_as_model(env.graph(), slip);

  AgentConfig cfg = spec.agent;
  cfg.seed = seed;
  cfg.steps = spec.steps;
  cfg.checkpoints = spec.checkpoints;
  if (spec.auto_clones) cfg.clones_per_obs = {default_clones_per_obs(graph.n_nodes(), graph.n_observations)};
  const CloneAllocation alloc = agent_allocation(cfg, graph.n_observations);

  CellResult out;
  out.cell = cell;
  RunHooks hooks;
  hooks.on_step = [&](const TrueTransition& t) {
    tracker.visit(t.action, t.source, t.destination);
    return false;
  };
  hooks.on_checkpoint = [&](const ModelSnapshot& snap) {
    MetricRow row;
    row.step = snap.step;
    const Estimate ell = expected_log_likelihood(snap.model, alloc, walks);
    const Estimate prec = walk_precision(snap.model, alloc, walks);
    row.ell = ell.mean;
    row.ell_se = ell.se;
    row.wcov = tracker.weighted();
    row.prec = prec.mean;
    row.prec_se = prec.se;
    row.seed = static_cast<std::uint64_t>(cell.seed_index);
    row.policy = policy_name(cell.policy);
    const Estimate gap = paired_log_likelihood_gap(snap.model, alloc, truth.model, truth.allocation, walks);
    out.bound.push_back({snap.step, gap.mean, gap.se});
    if (progress) progress(row);
    out.trace.rows.push_back(std::move(row));
  };
  out.record = run_agent(env, cell.policy, cfg, hooks);
  out.trace.validate();
  return out;
}

std::vector<AggregateRow> aggregate_traces(const std::vector<std::pair<CellSpec, MetricTrace>>& traces) {
  struct Acc {
    std::vector<double> ell, wcov, prec;
  };
  // Keep first-seen order of (label, policy) and sort steps within each.
  std::vector<std::pair<std::string, std::string>> groups;
  std::map<std::pair<std::string, std::string>, std::map<long, Acc>> acc;
  for (const auto& [cell, trace] : traces) {
    const auto key = std::make_pair(cell.config_label, policy_name(cell.policy));
    if (!acc.count(key)) groups.push_back(key);
    auto& by_step = acc[key];
    for (const auto& r : trace.rows) {
      Acc& a = by_step[r.step];
      a.ell.push_back(r.ell);
      a.wcov.push_back(r.wcov);
      a.prec.push_back(r.prec);
    }
  }
  auto mean_ci = [](const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double m = 0.0;
    for (double x : xs) m += x;
    m /= n;
    if (xs.size() < 2) return std::make_pair(m, 0.0);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::make_pair(m, 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n));
  };
  std::vector<AggregateRow> rows;
  for (const auto& key : groups) {
    for (const auto& [step, a] : acc[key]) {
      AggregateRow r;
      r.config_label = key.first;
      r.policy = key.second;
      r.step = step;
      r.n = static_cast<int>(a.ell.size());
      std::tie(r.ell_mean, r.ell_ci) = mean_ci(a.ell);
      std::tie(r.wcov_mean, r.wcov_ci) = mean_ci(a.wcov);
      std::tie(r.prec_mean, r.prec_ci) = mean_ci(a.prec);
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "config,policy,step,n,ell_mean,ell_ci,wcov_mean,wcov_ci,prec_mean,prec_ci\n";
  for (const auto& r : rows) {
    out << '"' << r.config_label << "\"," << r.policy << ',' << r.step << ',' << r.n << ',' << format_double(r.ell_mean)
        << ',' << format_double(r.ell_ci) << ',' << format_double(r.wcov_mean) << ',' << format_double(r.wcov_ci)
        << ',' << format_double(r.prec_mean) << ',' << format_double(r.prec_ci) << '\n';
  }
}

SweepResult run_sweep(const ExperimentSpec& spec, const SweepOptions& options) {
  const fs::path root = options.out_dir;
  fs::create_directories(root / "traces");
  fs::create_directories(root / "cells");
  fs::create_directories(root / "graphs");
  fs::create_directories(root / "models");
  write_text_file_atomic(root / "spec.json", experiment_spec_to_json(spec).dump(2) + "\n");

  const std::vector<CellSpec> cells = expand_cells(spec);
  std::vector<std::size_t> pending;
  SweepResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string id = cell_id(spec, cells[i]);
    const fs::path meta = root / "cells" / (id + ".json");
    bool done = false;
    if (fs::exists(meta) && fs::exists(root / "traces" / trace_name(spec, cells[i]))) {
      try {
        done = Json::parse(read_text_file(meta)).value("complete", false);
      } catch (const std::exception&) {
        done = false;
      }
    }
    if (done) {
      ++result.cells_skipped;
    } else {
      pending.push_back(i);
    }
  }

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size()) return;
      {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (failure) return;
      }
      const CellSpec& cell = cells[pending[k]];
      try {
        const std::string id = cell_id(spec, cell);
        const std::string label = cell.config_label + " " + policy_name(cell.policy) + " seed " +
                                  std::to_string(cell.seed_index);
        CellResult r = run_cell(spec, cell, [&](const MetricRow& row) {
          if (options.quiet) return;
          std::lock_guard<std::mutex> lock(log_mutex);
          std::cerr << "[" << label << "] step " << row.step << " ell " << row.ell << " wcov " << row.wcov << " prec "
                    << row.prec << "\n";
        });
        std::ostringstream csv;
        write_trace_csv(csv, r.trace);
        write_text_file_atomic(root / "traces" / trace_name(spec, cell), csv.str());
        if (!r.record.snapshots.empty()) {
          const auto& last = r.record.snapshots.back();
          write_text_file_atomic(root / "graphs" / (id + ".dot"), model_to_dot(last.model, r.record.allocation));
          write_text_file_atomic(root / "models" / (id + ".json"), model_to_json(last.model, r.record.allocation).dump() + "\n");
        }
        Json bound = Json::array();
        for (const auto& b : r.bound) bound.push_back({{"step", b.step}, {"gap", b.gap}, {"gap_se", b.gap_se}});
        Json meta = {{"id", id},
                     {"key", cell_key(spec, cell)},
                     {"config", cell.config_label},
                     {"policy", policy_name(cell.policy)},
                     {"seed_index", cell.seed_index},
                     {"trace", trace_name(spec, cell)},
                     {"steps", r.record.steps},
                     {"refits", r.record.refits},
                     {"seconds", {{"act", r.record.seconds.act}, {"plan", r.record.seconds.plan},
                                  {"learn", r.record.seconds.learn}}},
                     {"ground_truth_gap", bound},
                     {"complete", true}};
        // Written last: its presence marks the cell as complete.
        write_text_file_atomic(root / "cells" / (id + ".json"), meta.dump(2) + "\n");
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(std::max<std::size_t>(1, pending.size()))));
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  result.cells_run = static_cast<int>(pending.size());

  // Aggregate from the files on disk, not from memory.
  Json cell_list = Json::array();
  for (const CellSpec& cell : cells) {
    std::istringstream in(read_text_file(root / "traces" / trace_name(spec, cell)));
    MetricTrace trace = read_trace_csv(in);
    Json meta = Json::parse(read_text_file(root / "cells" / (cell_id(spec, cell) + ".json")));
    Json entry = {{"id", cell_id(spec, cell)},
                  {"config", cell.config_label},
                  {"policy", policy_name(cell.policy)},
                  {"seed_index", cell.seed_index},
                  {"trace", trace_name(spec, cell)},
                  {"ground_truth_gap", meta.at("ground_truth_gap")}};
    if (!trace.rows.empty()) entry["final"] = row_to_json(trace.rows.back());
    cell_list.push_back(std::move(entry));
    result.traces.emplace_back(cell, std::move(trace));
  }
  result.aggregate = aggregate_traces(result.traces);
  std::ostringstream agg;
  write_aggregate_csv(agg, result.aggregate);
  write_text_file_atomic(root / "aggregate.csv", agg.str());

  Json aggregate = Json::array();
  for (const auto& r : result.aggregate) {
    aggregate.push_back({{"config", r.config_label}, {"policy", r.policy}, {"step", r.step}, {"n", r.n},
                         {"ell_mean", r.ell_mean}, {"ell_ci", r.ell_ci}, {"wcov_mean", r.wcov_mean},
                         {"wcov_ci", r.wcov_ci}, {"prec_mean", r.prec_mean}, {"prec_ci", r.prec_ci}});
  }
  Json summary = {{"name", spec.name},
                  {"cells", cell_list},
                  {"aggregate", aggregate},
                  {"cells_run", result.cells_run},
                  {"cells_skipped", result.cells_skipped}};
  write_text_file_atomic(root / "summary.json", summary.dump(2) + "\n");
  return result;
}

std::optional<double> censored_quantile(std::vector<Censored> xs, double q) {
  if (xs.empty()) return std::nullopt;
  std::sort(xs.begin(), xs.end(), [](const Censored& a, const Censored& b) {
    if (a.censored != b.censored) return !a.censored;
    return a.value < b.value;
  });
  // Linear interpolation between order statistics.
  const double pos = q * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  if (xs[hi].censored) return std::nullopt;
  const double f = pos - static_cast<double>(lo);
  return xs[lo].value + f * (xs[hi].value - xs[lo].value);
}

namespace {

ChainPolicyResult run_chain_policy(const ChainOptions& o, PolicyKind policy, bool trap) {
  ChainPolicyResult out;
  out.policy = policy;
  const int episode_length = o.length + 9;
  const int max_episodes = policy == PolicyKind::efex ? o.max_episodes_efex : o.max_episodes_random;
  const Rng root(o.seed);
  for (int s = 0; s < o.n_seeds; ++s) {
    // Same graph and environment stream for both policies and both trap
    // settings of a seed.
    const Rng seed_rng = root.split(static_cast<std::uint64_t>(s));
    const GroundTruthGraph g = build_chain(o.length, trap, seed_rng.split(0).seed());
    Environment env(g, SlippageConfig{}, EpisodeConfig{episode_length, ResetMode::hard, 0.1}, seed_rng.split(1).seed());
    CoverageTracker tracker(transition_support(env));
    AgentConfig cfg;
    cfg.alpha = o.alpha;
    cfg.gamma = o.gamma;
    cfg.unaliased = true;
    cfg.learn = policy == PolicyKind::efex;
    cfg.steps = static_cast<long>(max_episodes) * episode_length;
    cfg.seed = seed_rng.split(2).seed();
    long done_at = -1;
    RunHooks hooks;
    hooks.on_step = [&](const TrueTransition& t) {
      tracker.visit(t.action, t.source, t.destination);
      if (tracker.visited_edges() == tracker.support().size()) {
        done_at = t.step;
        return true;
      }
      return false;
    };
    run_agent(env, policy, cfg, hooks);
    if (done_at > 0) {
      out.episodes.push_back({std::ceil(static_cast<double>(done_at) / episode_length), false});
    } else {
      out.episodes.push_back({static_cast<double>(max_episodes), true});
    }
  }
  out.median = censored_quantile(out.episodes, 0.5);
  out.q25 = censored_quantile(out.episodes, 0.25);
  out.q75 = censored_quantile(out.episodes, 0.75);
  return out;
}

Json chain_policy_json(const ChainPolicyResult& r) {
  int censored = 0;
  for (const auto& c : r.episodes) censored += c.censored ? 1 : 0;
  return {{"policy", policy_name(r.policy)},
          {"episodes", censored_json(r.episodes)},
          {"censored", censored},
          {"median", optional_json(r.median)},
          {"q25", optional_json(r.q25)},
          {"q75", optional_json(r.q75)}};
}

}  // namespace

ChainResult chain_experiment(const ChainOptions& options) {
  if (options.length < 2) throw std::invalid_argument("chain length must be >= 2");
  if (options.n_seeds < 1) throw std::invalid_argument("n_seeds must be >= 1");
  ChainResult r;
  r.options = options;
  r.episode_length = options.length + 9;
  r.efex = run_chain_policy(options, PolicyKind::efex, options.trap);
  r.random = run_chain_policy(options, PolicyKind::random, options.trap);
  return r;
}

Json chain_result_to_json(const ChainResult& r) {
  return {{"length", r.options.length},
          {"trap", r.options.trap},
          {"n_seeds", r.options.n_seeds},
          {"episode_length", r.episode_length},
          {"max_episodes", {{"efex", r.options.max_episodes_efex}, {"random", r.options.max_episodes_random}}},
          {"efex", chain_policy_json(r.efex)},
          {"random", chain_policy_json(r.random)}};
}

ScalingResult scaling_experiment(const ScalingOptions& options, const std::function<void(const std::string&)>& log) {
  if (options.sides.size() < 3) throw std::invalid_argument("scaling: at least 3 sides required");
  if (options.n_seeds < 1) throw std::invalid_argument("scaling: n_seeds must be >= 1");
  ScalingResult result;
  result.options = options;
  const Rng root(options.seed);

  struct Instance {
    GroundTruthGraph graph;
    std::uint64_t env_seed;
    std::uint64_t agent_seed;
  };
  auto instance = [&](int side, int s) {
    const Rng r = root.split(static_cast<std::uint64_t>(side)).split(static_cast<std::uint64_t>(s));
    TopologySpec ts;
    ts.kind = TopologyKind::sparse_maze;
    ts.size = {side};
    ts.unique_fraction = options.unique_fraction;
    ts.seed = r.split(0).seed();
    return Instance{build_topology(ts), r.split(1).seed(), r.split(2).seed()};
  };
  // Steps until the threshold is reached, or censored at `budget`.
  auto run_to_threshold = [&](const Instance& inst, PolicyKind policy, long budget,
                              std::vector<BoundCheck>* bound = nullptr) {
    Environment env(inst.graph, SlippageConfig{}, EpisodeConfig{100, ResetMode::teleport, options.p_teleport},
                    inst.env_seed);
    CoverageTracker tracker(transition_support(env));
    if (policy == PolicyKind::random) {
      // Random walks can run for 10^8 steps here; skip the trajectory record.
      Rng actions(inst.agent_seed);
      env.reset();
      for (long step = 1; step <= budget; ++step) {
        const int source = env.node();
        const int a = static_cast<int>(actions.index(static_cast<std::size_t>(env.n_actions())));
        const StepOutcome out = env.step(a);
        tracker.visit(a, source, out.node);
        if (tracker.weighted() >= options.threshold) return Censored{static_cast<double>(step), false};
      }
      return Censored{static_cast<double>(budget), true};
    }
    AgentConfig cfg = options.agent;
    cfg.seed = inst.agent_seed;
    cfg.steps = budget;
    cfg.checkpoints.clear();
    cfg.learn = policy == PolicyKind::efex && options.agent.learn;
    cfg.clones_per_obs = {default_clones_per_obs(inst.graph.n_nodes(), inst.graph.n_observations)};
    long reached = -1;
    RunHooks hooks;
    hooks.on_step = [&](const TrueTransition& t) {
      tracker.visit(t.action, t.source, t.destination);
      if (tracker.weighted() >= options.threshold) {
        reached = t.step;
        return true;
      }
      return false;
    };
    const RunRecord rec = run_agent(env, policy, cfg, hooks);
    if (bound && rec.refits > 0) {
      const auto walks = sample_walks(inst.graph, {}, options.bound_eval);
      const GroundTruthModel truth = gt_as_model(inst.graph, {});
      const Estimate gap = paired_log_likelihood_gap(rec.final_model, rec.allocation, truth.model, truth.allocation, walks);
      bound->push_back({rec.steps, gap.mean, gap.se});
    }
    return reached > 0 ? Censored{static_cast<double>(reached), false} : Censored{static_cast<double>(budget), true};
  };
  auto finish = [](ScalingRow& row) {
    row.median = censored_quantile(row.steps, 0.5);
    row.censored = 0;
    for (const auto& c : row.steps) row.censored += c.censored ? 1 : 0;
  };

  std::vector<std::vector<Instance>> instances;
  std::vector<ScalingRow> efex_rows;
  for (int side : options.sides) {
    instances.emplace_back();
    ScalingRow row;
    row.side = side;
    row.policy = "efex";
    row.budget = options.efex_step_cap;
    const auto t0 = std::chrono::steady_clock::now();
    for (int s = 0; s < options.n_seeds; ++s) {
      instances.back().push_back(instance(side, s));
      row.n_nodes = instances.back().back().graph.n_nodes();
      row.steps.push_back(run_to_threshold(instances.back().back(), PolicyKind::efex, options.efex_step_cap,
                                           options.check_bound ? &row.bound : nullptr));
      if (log) {
        const auto& c = row.steps.back();
        log("side " + std::to_string(side) + " efex seed " + std::to_string(s) + ": " +
            (c.censored ? ">" : "") + std::to_string(static_cast<long>(c.value)) + " steps");
      }
    }
    finish(row);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    efex_rows.push_back(std::move(row));
  }
  const std::size_t last = options.sides.size() - 1;
  for (std::size_t i = 0; i < options.sides.size(); ++i) {
    ScalingRow row;
    row.side = options.sides[i];
    row.n_nodes = efex_rows[i].n_nodes;
    row.policy = "random";
    const double ref = efex_rows[i].median.value_or(static_cast<double>(options.efex_step_cap));
    const double factor = i == last ? options.random_budget_factor : options.random_cap_factor_small;
    row.budget = static_cast<long>(std::ceil(factor * ref));
    const auto t0 = std::chrono::steady_clock::now();
    for (int s = 0; s < options.n_seeds; ++s) {
      row.steps.push_back(run_to_threshold(instances[i][s], PolicyKind::random, row.budget));
      if (log) {
        const auto& c = row.steps.back();
        log("side " + std::to_string(row.side) + " random seed " + std::to_string(s) + ": " +
            (c.censored ? ">" : "") + std::to_string(static_cast<long>(c.value)) + " steps");
      }
    }
    finish(row);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool efex_ok = efex_rows[i].median.has_value();
    if (efex_ok && row.median) {
      result.ratio.push_back(*row.median / *efex_rows[i].median);
      result.ratio_is_lower_bound.push_back(false);
    } else if (efex_ok) {
      result.ratio.push_back(static_cast<double>(row.budget) / *efex_rows[i].median);
      result.ratio_is_lower_bound.push_back(true);
    } else {
      result.ratio.push_back(std::nan(""));
      result.ratio_is_lower_bound.push_back(false);
    }
    result.rows.push_back(efex_rows[i]);
    result.rows.push_back(std::move(row));
  }
  return result;
}

Json scaling_result_to_json(const ScalingResult& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"side", row.side},
                    {"n_nodes", row.n_nodes},
                    {"policy", row.policy},
                    {"budget", row.budget},
                    {"steps", censored_json(row.steps)},
                    {"censored", row.censored},
                    {"median", optional_json(row.median)},
                    {"seconds", row.seconds}});
  }
  Json ratios = Json::array();
  for (std::size_t i = 0; i < r.ratio.size(); ++i) {
    ratios.push_back({{"side", r.options.sides[i]},
                      {"ratio", std::isnan(r.ratio[i]) ? Json(nullptr) : Json(r.ratio[i])},
                      {"lower_bound", static_cast<bool>(r.ratio_is_lower_bound[i])}});
  }
  return {{"unique_fraction", r.options.unique_fraction},
          {"threshold", r.options.threshold},
          {"n_seeds", r.options.n_seeds},
          {"rows", rows},
          {"ratios", ratios}};
}

}  // namespace efex
