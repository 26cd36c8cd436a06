#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "../oracles.hpp"
#include "efex/metrics.hpp"
#include "efex/topologies.hpp"

using namespace efex;

TEST_CASE("ground truth scores zero on a deterministic unaliased graph") {
  const std::vector<int> d2 = {4, 5};
  const GroundTruthGraph g = build_grid(d2, 0);
  const GroundTruthModel gt = gt_as_model(g, {});
  const auto walks = sample_walks(g, {}, {5, 200, 3});
  const Estimate e = expected_log_likelihood(gt.model, gt.allocation, walks);
  // Only the first step pays for the start: log(1/n) / walk length.
  CHECK(e.mean == doctest::Approx(-std::log(20.0) / 200.0).epsilon(1e-12));
  CHECK(walk_precision(gt.model, gt.allocation, walks).mean == 1.0);
}

TEST_CASE("uniform transitions cost log n per step") {
  const std::vector<int> d2 = {3, 3};
  const GroundTruthGraph g = build_grid(d2, 0);
  const auto walks = sample_walks(g, {}, {4, 50, 1});
  const CloneAllocation alloc = CloneAllocation::uniform(9, 1);
  const LearnedModel u = uniform_model(alloc, 4, 0.0);
  CHECK(expected_log_likelihood(u, alloc, walks).mean == doctest::Approx(-std::log(9.0)).epsilon(1e-12));
  CHECK(expected_log_likelihood(u, alloc, walks).se < 1e-12);
}

TEST_CASE("walks are reproducible and start anywhere") {
  const std::vector<int> d2 = {6, 6};
  const GroundTruthGraph g = build_grid(d2, 0);
  const auto a = sample_walks(g, {0.2}, {200, 3, 9});
  const auto b = sample_walks(g, {0.2}, {200, 3, 9});
  std::vector<int> starts(36, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].observations == b[i].observations);
    CHECK(a[i].size() == 3);
    ++starts[a[i].observations[0]];
  }
  int distinct = 0;
  for (int s : starts) distinct += s > 0 ? 1 : 0;
  CHECK(distinct > 25);
}

TEST_CASE("coverage counts each edge once") {
  const GroundTruthGraph g = build_chain(5, false, 0);
  const EdgeSet e(g.transition);
  std::vector<VisitedTriple> v;
  for (const Edge& edge : e.edges()) v.push_back({edge.action, edge.source, edge.destination});
  CHECK(weighted_coverage(v, e) == 1.0);
  CHECK(unweighted_coverage(v, e) == 1.0);
  CHECK(weighted_coverage({}, e) == 0.0);
  CHECK(unweighted_coverage({}, e) == 0.0);
  std::vector<VisitedTriple> seven(v.begin(), v.begin() + 7);
  seven.push_back(seven[0]);
  seven.push_back(seven[3]);
  CHECK(weighted_coverage(seven, e) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(unweighted_coverage(seven, e) == doctest::Approx(0.7).epsilon(1e-15));

  CoverageTracker t(e);
  double prev = 0.0;
  for (std::size_t i = 0; i < seven.size(); ++i) {
    const bool first = t.visit(seven[i].action, seven[i].source, seven[i].destination);
    CHECK(first == (i < 7));
    CHECK(t.weighted() >= prev);
    prev = t.weighted();
  }
  CHECK(t.weighted() == doctest::Approx(0.7));
  CHECK(t.visited_edges() == 7);
  CHECK_FALSE(t.visit(0, 0, 4));  // not an edge of the chain
}

TEST_CASE("weighted coverage uses edge probabilities") {
  const GroundTruthGraph g = build_chain(3, true, 0);
  const EdgeSet e(g.transition);
  // Trap rows split 0.5 / 0.5: visiting one half of one trap row.
  const Edge& half = e.row(0, 0)[0];
  const std::vector<VisitedTriple> v = {{half.action, half.source, half.destination}};
  CHECK(weighted_coverage(v, e) == doctest::Approx(0.5 / e.total_weight()));
  CHECK(unweighted_coverage(v, e) == doctest::Approx(1.0 / e.size()));
  CHECK(EdgeSet(build_chain(50, false, 3).transition).size() == 100);
}

TEST_CASE("precision examples") {
  const std::vector<int> z = {3, 1, 4, 1, 5, 9, 2, 6, 5, 3};
  CHECK(precision(z, z) == 1.0);
  const std::vector<int> constant(10, 0);
  // Most common true state occurs twice (1, 3, 5 each).
  CHECK(precision(constant, z) == doctest::Approx(0.2));
  const std::vector<int> decoded = {0, 0, 1, 1};
  const std::vector<int> truth = {5, 5, 5, 6};
  CHECK(precision(decoded, truth) == doctest::Approx(0.75));
  // Splitting a pure decoded id leaves precision unchanged.
  const std::vector<int> split = {0, 7, 1, 1};
  CHECK(precision(split, truth) == precision(decoded, truth));
  CHECK_THROWS(precision(decoded, z));
}

TEST_CASE("precision stays in (0, 1]") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> id(0, 5);
  for (int k = 0; k < 100; ++k) {
    std::vector<int> a(1 + k % 20), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = id(rng);
      b[i] = id(rng);
    }
    const double p = precision(a, b);
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("clone split and relabel preserve likelihood exactly") {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 60; ++k) {
    const CloneAllocation alloc({2, 1, 2});
    const LearnedModel m = random_model(alloc, 2, rng(), 1e-2);
    Trajectory t;
    std::uniform_int_distribution<int> obs(0, 2), act(0, 1);
    t.start_episode(obs(rng));
    for (int n = 1; n < 1 + k % 6; ++n) t.append(act(rng), obs(rng));
    const double ll = oracle::brute_log_likelihood(m, alloc, t);

    const int clone = k % 5;
    const SplitModel s = clone_split(m, alloc, clone, 0.3 + 0.01 * k);
    s.model.validate(s.allocation);
    CHECK(s.allocation.n_clones() == 6);
    CHECK(s.allocation.observation_of(s.new_clone) == alloc.observation_of(clone));
    CHECK(std::abs(oracle::brute_log_likelihood(s.model, s.allocation, t) - ll) < 1e-12);
    CHECK(std::abs(log_likelihood(s.model, s.allocation, t) - ll) < 1e-12);

    const std::vector<int> swap = {1, 0, 2, 4, 3};
    const LearnedModel r = relabel(m, alloc, swap);
    CHECK(std::abs(log_likelihood(r, alloc, t) - log_likelihood(m, alloc, t)) < 1e-12);
  }
  const CloneAllocation alloc({2, 1});
  const LearnedModel m = random_model(alloc, 1, 5, 1e-2);
  const std::vector<int> identity = {0, 1, 2};
  CHECK(relabel(m, alloc, identity).transition.values() == m.transition.values());
  const std::vector<int> crossing = {2, 1, 0};
  CHECK_THROWS(relabel(m, alloc, crossing));
  CHECK_THROWS(clone_split(m, alloc, 3, 0.5));
}

TEST_CASE("transforms leave evaluation metrics unchanged") {
  const GroundTruthGraph g = build_topology({TopologyKind::grid2d, {5, 5}, 0.3, false, 0.0, 2});
  const auto walks = sample_walks(g, {}, {10, 300, 4});
  // A learned-looking model: ground truth plus noise.
  GroundTruthModel gt = gt_as_model(g, {});
  std::mt19937_64 rng(6);
  for (double& p : gt.model.transition.values()) p += 0.05 * std::uniform_real_distribution<double>(0, 1)(rng);
  normalize_rows(gt.model.transition);
  const Estimate ell = expected_log_likelihood(gt.model, gt.allocation, walks);
  const Estimate prec = walk_precision(gt.model, gt.allocation, walks);

  std::vector<int> perm(gt.allocation.n_clones());
  std::iota(perm.begin(), perm.end(), 0);
  for (int o = 0; o < gt.allocation.n_observations(); ++o) {
    if (gt.allocation.size(o) > 1) std::reverse(perm.begin() + gt.allocation.begin(o), perm.begin() + gt.allocation.end(o));
  }
  const LearnedModel r = relabel(gt.model, gt.allocation, perm);
  CHECK(std::abs(expected_log_likelihood(r, gt.allocation, walks).mean - ell.mean) < 1e-12);
  CHECK(walk_precision(r, gt.allocation, walks).mean == prec.mean);

  const SplitModel s = clone_split(gt.model, gt.allocation, 3, 0.5);
  CHECK(std::abs(expected_log_likelihood(s.model, s.allocation, walks).mean - ell.mean) < 1e-12);
}

TEST_CASE("learned models do not beat the ground truth") {
  const GroundTruthGraph g = build_topology({TopologyKind::grid2d, {4, 4}, 0.5, false, 0.0, 8});
  const auto walks = sample_walks(g, {0.1}, {20, 500, 5});
  const GroundTruthModel gt = gt_as_model(g, {0.1});
  const Estimate ref = expected_log_likelihood(gt.model, gt.allocation, walks);
  const CloneAllocation alloc = CloneAllocation::uniform(g.n_observations, 3);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const LearnedModel m = random_model(alloc, 4, seed, 1e-3);
    const Estimate gap = paired_log_likelihood_gap(m, alloc, gt.model, gt.allocation, walks);
    CHECK(gap.mean <= 3.0 * gap.se);
    CHECK(expected_log_likelihood(m, alloc, walks).mean <= ref.mean + 3.0 * ref.se);
  }
}

TEST_CASE("trace validation") {
  auto row = [](long step, double wcov) {
    MetricRow r;
    r.step = step;
    r.wcov = wcov;
    return r;
  };
  MetricTrace t;
  t.rows = {row(100, 0.2), row(200, 0.3)};
  CHECK_NOTHROW(t.validate());
  t.rows.push_back(row(200, 0.4));
  CHECK_THROWS(t.validate());
  t.rows.back().step = 300;
  t.rows.back().wcov = 0.1;
  CHECK_THROWS(t.validate());
}
