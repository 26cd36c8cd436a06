// efex: experiment runner for active exploration of aliased graphs.
//
// Exit codes: 0 ok, 1 runtime failure, 2 invalid input.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "efex/harness.hpp"
#include "efex/metrics.hpp"
#include "efex/serialization.hpp"
#include "efex/topologies.hpp"

namespace {

using efex::Json;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Json load_json(const std::string& path) {
  std::string text;
  try {
    text = efex::read_text_file(path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    efex::write_text_file_atomic(out_path, text);
  }
}

std::string describe_optional(const std::optional<double>& x) {
  return x ? efex::format_double(*x) : std::string("censored");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active exploration of aliased latent graphs"};
  app.require_subcommand(1);

  // run
  std::string spec_path, out_dir = "efex-out";
  int jobs = 1;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run a resumable sweep described by a JSON spec");
  int runs = 0;
  run->add_option("spec,--spec", spec_path, "Experiment spec (JSON)")->required();
  run->add_option("--runs", runs, "Override the number of seeds")->check(CLI::PositiveNumber);
  run->add_option("-o,--out", out_dir, "Output directory");
  run->add_option("-j,--jobs", jobs, "Parallel cells")->check(CLI::PositiveNumber);
  run->add_flag("-q,--quiet", quiet, "No per-checkpoint progress");

  // chain
  efex::ChainOptions chain;
  std::string chain_out;
  auto* chain_cmd = app.add_subcommand("chain", "Episodes to full coverage on the chain, eFeX vs random");
  chain_cmd->add_option("-L,--L,--length", chain.length, "Chain length")->check(CLI::Range(2, 100000));
  chain_cmd->add_flag("--trap", chain.trap, "Make node 0 a stochastic trap");
  chain_cmd->add_option("--seeds", chain.n_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  chain_cmd->add_option("--max-episodes", chain.max_episodes_efex, "Episode cap for eFeX")->check(CLI::PositiveNumber);
  chain_cmd->add_option("--max-episodes-random", chain.max_episodes_random, "Episode cap for random")
      ->check(CLI::PositiveNumber);
  chain_cmd->add_option("--seed", chain.seed, "Base seed");
  chain_cmd->add_option("--out", chain_out, "Write JSON here instead of stdout");

  // scale
  efex::ScalingOptions scale;
  std::string scale_out;
  auto* scale_cmd = app.add_subcommand("scale", "Steps to 90% weighted coverage on sparse mazes");
  scale_cmd->add_option("--sides", scale.sides, "Maze sides (odd, >= 5)")->delimiter(',');
  scale_cmd->add_option("--uf", scale.unique_fraction, "Unique fraction")->check(CLI::Range(1e-9, 1.0));
  scale_cmd->add_option("--seeds", scale.n_seeds, "Seeds per side")->check(CLI::PositiveNumber);
  scale_cmd->add_option("--threshold", scale.threshold, "Weighted coverage target")->check(CLI::Range(1e-9, 1.0));
  scale_cmd->add_option("--efex-cap", scale.efex_step_cap, "Step cap for eFeX")->check(CLI::PositiveNumber);
  scale_cmd->add_option("--budget-factor", scale.random_budget_factor,
                        "Random budget at the largest side, in eFeX medians");
  scale_cmd->add_option("--seed", scale.seed, "Base seed");
  scale_cmd->add_option("--out", scale_out, "Write JSON here instead of stdout");

  // gen-env
  std::string kind = "grid2d";
  std::vector<int> size = {11, 11};
  double uf = 1.0;
  std::uint64_t env_seed = 0;
  bool ascii = false, trap = false;
  std::string env_out;
  auto* gen = app.add_subcommand("gen-env", "Generate a ground-truth graph");
  gen->add_option("--kind", kind, "chain, grid2d, grid3d, interconnected_grids, dense_maze, sparse_maze");
  gen->add_option("--size", size, "Size parameters (see README)")->delimiter(',');
  gen->add_option("--uf", uf, "Unique fraction")->check(CLI::Range(1e-9, 1.0));
  gen->add_option("--seed", env_seed, "Seed");
  gen->add_flag("--trap", trap, "Chain only: stochastic trap at node 0");
  gen->add_flag("--ascii", ascii, "Print an occupancy preview instead of JSON");
  gen->add_option("--out", env_out, "Write here instead of stdout");

  // eval
  std::string eval_env, eval_model;
  efex::EvalProtocol protocol;
  double p_slip = 0.0;
  auto* eval = app.add_subcommand("eval", "Score a saved model against a saved graph");
  eval->add_option("--env", eval_env, "Graph JSON (from gen-env)")->required();
  eval->add_option("--model", eval_model, "Model JSON (from a sweep's models/)")->required();
  eval->add_option("--walks", protocol.n_walks, "Evaluation walks")->check(CLI::PositiveNumber);
  eval->add_option("--length", protocol.walk_length, "Observations per walk")->check(CLI::Range(2L, 100000000L));
  eval->add_option("--seed", protocol.seed, "Walk seed");
  eval->add_option("--slip", p_slip, "Slip probability")->check(CLI::Range(0.0, 0.999999));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      efex::ExperimentSpec spec = efex::parse_experiment_spec(load_json(spec_path));
      if (runs > 0) spec.n_seeds = runs;
      efex::SweepOptions opts;
      opts.out_dir = out_dir;
      opts.jobs = jobs;
      opts.quiet = quiet;
      const efex::SweepResult r = efex::run_sweep(spec, opts);
      std::cout << "cells run " << r.cells_run << ", skipped " << r.cells_skipped << "; results in " << out_dir
                << "\n";
    } else if (*chain_cmd) {
      const efex::ChainResult r = efex::chain_experiment(chain);
      emit(efex::chain_result_to_json(r).dump(2) + "\n", chain_out);
      if (!chain_out.empty()) {
        std::cout << "efex median " << describe_optional(r.efex.median) << ", random median "
                  << describe_optional(r.random.median) << " episodes\n";
      }
    } else if (*scale_cmd) {
      if (scale.sides.size() < 3) throw InputError("--sides needs at least 3 values");
      for (int s : scale.sides) {
        if (s < 5 || s % 2 == 0) throw InputError("--sides values must be odd and >= 5");
      }
      const efex::ScalingResult r =
          efex::scaling_experiment(scale, [](const std::string& line) { std::cerr << line << "\n"; });
      emit(efex::scaling_result_to_json(r).dump(2) + "\n", scale_out);
    } else if (*gen) {
      const auto k = efex::parse_topology_kind(kind);
      if (!k) throw InputError("unknown --kind '" + kind + "'");
      efex::TopologySpec ts;
      ts.kind = *k;
      ts.size = size;
      ts.unique_fraction = uf;
      ts.stochastic_trap = trap;
      ts.seed = env_seed;
      efex::GroundTruthGraph g;
      try {
        g = efex::build_topology(ts);
      } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
      }
      if (ascii) {
        if (!g.layout) throw InputError("--ascii needs a topology with a 2D layout");
        emit(efex::ascii_preview(g), env_out);
      } else {
        emit(efex::env_to_json(g).dump() + "\n", env_out);
      }
    } else if (*eval) {
      efex::GroundTruthGraph g;
      std::pair<efex::LearnedModel, efex::CloneAllocation> m;
      try {
        g = efex::env_from_json(load_json(eval_env));
        m = efex::model_from_json(load_json(eval_model));
      } catch (const Json::exception& e) {
        throw InputError(e.what());
      } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
      }
      if (m.second.n_observations() != g.n_observations || m.first.n_actions() != g.n_actions()) {
        throw InputError("model and graph disagree on observations or actions");
      }
      const efex::SlippageConfig slip{p_slip};
      const auto walks = efex::sample_walks(g, slip, protocol);
      const efex::Estimate ell = efex::expected_log_likelihood(m.first, m.second, walks);
      const efex::Estimate prec = efex::walk_precision(m.first, m.second, walks);
      const efex::GroundTruthModel truth = efex::gt_as_model(g, slip);
      const efex::Estimate gap =
          efex::paired_log_likelihood_gap(m.first, m.second, truth.model, truth.allocation, walks);
      const Json out = {{"ell", ell.mean}, {"ell_se", ell.se},           {"prec", prec.mean},
                        {"prec_se", prec.se}, {"ground_truth_gap", gap.mean}, {"ground_truth_gap_se", gap.se}};
      std::cout << out.dump(2) << "\n";
    }
  } catch (const efex::SpecError& e) {
    std::cerr << "invalid spec: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
