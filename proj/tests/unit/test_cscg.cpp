#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "../instances.hpp"
#include "../oracles.hpp"
#include "efex/cscg.hpp"

using namespace efex;

using test_instances::Instance;
using test_instances::random_instance;

TEST_CASE("log-likelihood equals exhaustive enumeration") {
  std::mt19937_64 rng(101);
  for (int k = 0; k < 300; ++k) {
    const Instance in = random_instance(rng, 6, 1 + k % 6, 1 + k % 3, k % 3 == 0);
    const double ll = log_likelihood(in.model, in.alloc, in.traj);
    CHECK(std::abs(ll - oracle::brute_log_likelihood(in.model, in.alloc, in.traj)) < 1e-10);
  }
}

TEST_CASE("Viterbi path is optimal and consistent") {
  std::mt19937_64 rng(103);
  for (int k = 0; k < 300; ++k) {
    const Instance in = random_instance(rng, 6, 1 + k % 6, 1 + k % 3, k % 3 == 0);
    const Decoding d = viterbi_decode(in.model, in.alloc, in.traj);
    const double best = oracle::brute_viterbi_score(in.model, in.alloc, in.traj);
    CHECK(std::abs(d.log_probability - best) < 1e-10);
    CHECK(std::abs(oracle::path_log_prob(in.model, in.traj, d.clones) - best) < 1e-10);
    for (std::size_t n = 0; n < d.clones.size(); ++n) {
      CHECK(in.alloc.observation_of(d.clones[n]) == in.traj.observations[n]);
    }
  }
}

TEST_CASE("impossible data gives -inf likelihood and a smoothed decoding") {
  const CloneAllocation alloc({1, 1});
  LearnedModel m = uniform_model(alloc, 1, 1e-3);
  m.transition.fill(0.0);
  m.transition(0, 0, 0) = 1.0;
  m.transition(0, 1, 1) = 1.0;
  const Trajectory t = make_trajectory({0, 1}, {0});
  CHECK(log_likelihood(m, alloc, t) == -std::numeric_limits<double>::infinity());
  const Decoding d = viterbi_decode(m, alloc, t);
  CHECK(d.smoothed);
  CHECK(d.clones == std::vector<int>{0, 1});
}

TEST_CASE("expected counts total the number of transitions") {
  std::mt19937_64 rng(107);
  for (int k = 0; k < 50; ++k) {
    const Instance in = random_instance(rng, 6, 6, 2, true);
    CountTensor c(2, in.alloc.n_clones(), 0.0);
    const double ll = expected_counts(in.model, in.alloc, in.traj, c);
    CHECK(ll == doctest::Approx(log_likelihood(in.model, in.alloc, in.traj)).epsilon(1e-12));
    const double transitions = static_cast<double>(in.traj.size() - in.traj.n_episodes());
    CHECK(c.total() == doctest::Approx(transitions).epsilon(1e-12));
  }
}

TEST_CASE("EM objective, Viterbi objective and VB free energy never decrease") {
  std::mt19937_64 rng(109);
  for (int k = 0; k < 40; ++k) {
    const Instance in = random_instance(rng, 6, 40, 2, k % 2 == 0);
    EmOptions opt;
    opt.max_iters = 30;
    opt.tol = 0.0;
    opt.seed = k;
    const EmResult em = em_fit(in.traj, in.alloc, 2, opt);
    for (std::size_t i = 1; i < em.objective.size(); ++i) {
      CHECK(em.objective[i] >= em.objective[i - 1] - 1e-8 * std::abs(em.objective[i - 1]));
    }
    const auto vt = viterbi_train(em.model, in.traj, in.alloc, 2e-3, 5);
    for (std::size_t i = 1; i < vt.objective.size(); ++i) {
      CHECK(vt.objective[i] >= vt.objective[i - 1] - 1e-8 * std::abs(vt.objective[i - 1]));
    }
    const auto vb = vb_refine(em.model, in.traj, in.alloc, 0.5, 10);
    for (std::size_t i = 1; i < vb.free_energy.size(); ++i) {
      CHECK(vb.free_energy[i] >= vb.free_energy[i - 1] - 1e-8 * std::abs(vb.free_energy[i - 1]));
    }
    vb.model.validate(in.alloc);
  }
}

TEST_CASE("EM on an aliased two-node loop reaches the true likelihood") {
  // Two nodes, one symbol, one action cycling them: indistinguishable from a
  // single self-looping node, so both models score log 1 per step.
  const CloneAllocation alloc({2});
  Trajectory t;
  t.start_episode(0);
  for (int n = 1; n < 200; ++n) t.append(0, 0);
  EmOptions opt;
  opt.pseudocount = 1e-6;
  const EmResult em = em_fit(t, alloc, 1, opt);
  LearnedModel truth = uniform_model(alloc, 1, 0.0);
  truth.transition.fill(0.0);
  truth.transition(0, 0, 1) = 1.0;
  truth.transition(0, 1, 0) = 1.0;
  Trajectory held;
  held.start_episode(0);
  for (int n = 1; n < 5000; ++n) held.append(0, 0);
  const double per_step_model = log_likelihood(em.model, alloc, held) / 5000.0;
  const double per_step_truth = log_likelihood(truth, alloc, held) / 5000.0;
  CHECK(std::abs(per_step_model - per_step_truth) < 1e-6);
}

TEST_CASE("one M-step sends an unused edge to the pseudocount floor") {
  const CloneAllocation alloc({1, 1});
  LearnedModel init = uniform_model(alloc, 1, 0.0);
  init.transition.fill(0.0);
  init.transition(0, 0, 1) = 0.99;
  init.transition(0, 0, 0) = 0.01;  // never used by the data
  init.transition(0, 1, 0) = 1.0;
  const Trajectory t = make_trajectory({0, 1, 0, 1, 0}, {0, 0, 0, 0});
  EmOptions opt;
  opt.pseudocount = 0.01;
  opt.max_iters = 1;
  const EmResult em = em_fit(t, alloc, init, opt);
  // Row (0, clone 0) saw two transitions, both to clone 1.
  CHECK(em.model.transition(0, 0, 0) == doctest::Approx(0.01 / (2.0 + 2 * 0.01)).epsilon(1e-12));
}

TEST_CASE("decoding separates two same-colored clones by action context") {
  // Nodes: A(x=0), G1(x=1), B(x=2), G2(x=1). Action 0 walks A->G1->B->G2->A.
  const CloneAllocation alloc({1, 2, 1});
  LearnedModel m = uniform_model(alloc, 1, 0.0);
  m.transition.fill(0.0);
  m.transition(0, 0, 1) = 1.0;  // A -> G1 (clone 1)
  m.transition(0, 1, 3) = 1.0;  // G1 -> B (clone 3)
  m.transition(0, 3, 2) = 1.0;  // B -> G2 (clone 2)
  m.transition(0, 2, 0) = 1.0;  // G2 -> A
  const Trajectory t = make_trajectory({0, 1, 2, 1, 0, 1}, {0, 0, 0, 0, 0});
  CHECK(viterbi_decode(m, alloc, t).clones == std::vector<int>{0, 1, 3, 2, 0, 1});
}

TEST_CASE("counts from a decoding skip episode boundaries") {
  // 5 steps, episode break between steps 2 and 3 (0-based 1 and 2).
  Trajectory t;
  t.start_episode(0);
  t.append(1, 0);
  t.start_episode(0);
  t.append(0, 0);
  t.append(1, 0);
  const std::vector<int> z = {0, 1, 2, 0, 1};
  const CountTensor c = counts_from_decoding(z, t, 2, 3);
  CHECK(c.total() == 3.0);
  CHECK(c(1, 0, 1) == 2.0);
  CHECK(c(0, 2, 0) == 1.0);
  CHECK(c(1, 1, 2) == 0.0);  // the cross-episode pair is not a transition
}

TEST_CASE("trajectory and allocation validation") {
  CHECK_THROWS(CloneAllocation({1, 0}));
  const CloneAllocation a = CloneAllocation::uniform(3, 2);
  CHECK(a.n_clones() == 6);
  CHECK(a.begin(2) == 4);
  CHECK(a.observation_of(3) == 1);
  CHECK(default_clones_per_obs(441, 44) == 22);
  Trajectory t = make_trajectory({0, 5}, {0});
  CHECK_THROWS(t.validate(3, 1));
  CHECK_THROWS(log_likelihood(uniform_model(a, 1, 0.0), a, t));
}
