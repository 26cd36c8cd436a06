#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "efex/harness.hpp"

using namespace efex;
namespace fs = std::filesystem;

namespace {

Json tiny_spec() {
  return Json::parse(R"({
    "name": "tiny",
    "topology": {"kind": "grid2d", "size": [3, 3], "unique_fraction": 0.5, "seed": 1},
    "episode": {"length": 20},
    "agent": {"refit_period": 40, "em_max_iters": 10},
    "policies": ["efex", "random"],
    "n_seeds": 2,
    "steps": 120,
    "checkpoints": [60, 120],
    "eval": {"n_walks": 4, "walk_length": 50}
  })");
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("efex-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("spec parsing and validation") {
  const ExperimentSpec s = parse_experiment_spec(tiny_spec());
  CHECK(s.policies.size() == 2);
  CHECK(s.n_seeds == 2);
  CHECK(s.agent.alpha == 2e-3);
  CHECK(s.agent.gamma == 0.9999);
  CHECK(expand_cells(s).size() == 4);
  const ExperimentSpec again = parse_experiment_spec(experiment_spec_to_json(s));
  CHECK(experiment_spec_to_json(again) == experiment_spec_to_json(s));

  Json bad = tiny_spec();
  bad["n_seeds"] = 0;
  CHECK_THROWS_AS(parse_experiment_spec(bad), SpecError);
  bad = tiny_spec();
  bad["checkpoints"] = Json::array({120, 60});
  CHECK_THROWS_AS(parse_experiment_spec(bad), SpecError);
  bad = tiny_spec();
  bad["topology"]["kind"] = "torus";
  CHECK_THROWS_AS(parse_experiment_spec(bad), SpecError);
  bad = tiny_spec();
  bad["stepz"] = 1;
  CHECK_THROWS_AS(parse_experiment_spec(bad), SpecError);
  bad = tiny_spec();
  bad["topology"]["unique_fraction"] = 0.01;  // fewer than one symbol
  CHECK_THROWS_AS(parse_experiment_spec(bad), SpecError);
}

TEST_CASE("cell ids depend on content only") {
  const ExperimentSpec s = parse_experiment_spec(tiny_spec());
  const auto cells = expand_cells(s);
  CHECK(cell_id(s, cells[0]) == cell_id(s, cells[0]));
  CHECK(cell_id(s, cells[0]) != cell_id(s, cells[1]));
  CHECK(cell_id(s, cells[0]).size() == 16);
  ExperimentSpec renamed = s;
  renamed.name = "other";
  CHECK(cell_id(renamed, cells[0]) == cell_id(s, cells[0]));
  ExperimentSpec longer = s;
  longer.steps = 240;
  CHECK(cell_id(longer, cells[0]) != cell_id(s, cells[0]));
  // FNV-1a reference values.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  // Seeds differ per seed index and between the graph and run streams.
  CHECK(graph_seed(s, 0) != graph_seed(s, 1));
  CHECK(run_seed(s, 0) != graph_seed(s, 0));
}

TEST_CASE("aggregate confidence intervals") {
  std::vector<std::pair<CellSpec, MetricTrace>> traces;
  const double wcov[3] = {0.2, 0.4, 0.9};
  for (int i = 0; i < 3; ++i) {
    CellSpec c{"uf=1,slip=0", 1.0, 0.0, PolicyKind::efex, i};
    MetricTrace t;
    t.rows = {{10, -1.0 - i, 0.0, wcov[i], 0.5, 0.0, 0, "efex"}};
    traces.emplace_back(c, t);
  }
  const auto agg = aggregate_traces(traces);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].n == 3);
  CHECK(agg[0].ell_mean == doctest::Approx(-2.0));
  CHECK(agg[0].ell_ci == doctest::Approx(1.96 * 1.0 / std::sqrt(3.0)));
  CHECK(agg[0].wcov_mean == doctest::Approx(0.5));
  CHECK(agg[0].wcov_ci == doctest::Approx(1.96 * std::sqrt(0.13) / std::sqrt(3.0)));
  CHECK(agg[0].prec_ci == 0.0);
}

TEST_CASE("censored medians") {
  std::vector<Censored> xs = {{3, false}, {1, false}, {2, false}};
  CHECK(censored_quantile(xs, 0.5) == 2.0);
  CHECK(censored_quantile(xs, 0.25) == 1.5);
  xs = {{3, false}, {1, false}, {100, true}, {100, true}};
  CHECK(censored_quantile(xs, 0.25) == doctest::Approx(2.5));
  CHECK_FALSE(censored_quantile(xs, 0.5).has_value());
  CHECK_FALSE(censored_quantile({}, 0.5).has_value());
}

TEST_CASE("sweep writes resumable results") {
  const ExperimentSpec s = parse_experiment_spec(tiny_spec());
  const fs::path dir = scratch("sweep");
  SweepOptions opt;
  opt.out_dir = dir;
  opt.quiet = true;
  const SweepResult first = run_sweep(s, opt);
  CHECK(first.cells_run == 4);
  CHECK(fs::exists(dir / "aggregate.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  int traces = 0;
  for (const auto& e : fs::directory_iterator(dir / "traces")) traces += e.path().extension() == ".csv" ? 1 : 0;
  CHECK(traces == 4);
  const std::string aggregate = read_text_file(dir / "aggregate.csv");

  // Drop one completed cell, as if interrupted, and resume.
  const auto cells = expand_cells(s);
  fs::remove(dir / "cells" / (cell_id(s, cells[1]) + ".json"));
  opt.jobs = 2;
  const SweepResult second = run_sweep(s, opt);
  CHECK(second.cells_run == 1);
  CHECK(second.cells_skipped == 3);
  CHECK(read_text_file(dir / "aggregate.csv") == aggregate);
  fs::remove_all(dir);
}

TEST_CASE("short chain is covered in one episode") {
  ChainOptions o;
  o.length = 2;
  o.n_seeds = 3;
  const ChainResult r = chain_experiment(o);
  CHECK(r.episode_length == 11);
  REQUIRE(r.efex.median.has_value());
  CHECK(*r.efex.median == 1.0);
}

TEST_CASE("EFEX_SEED overrides the base seed") {
  ::setenv("EFEX_SEED", "1234", 1);
  const ExperimentSpec s = parse_experiment_spec(tiny_spec());
  ::unsetenv("EFEX_SEED");
  CHECK(s.seed == 1234);
  CHECK(parse_experiment_spec(tiny_spec()).seed == 0);
}
