#pragma once

#include <random>
#include <vector>

#include "efex/cscg.hpp"

namespace test_instances {

// Random instance: allocation with n_H <= 6 clones, trajectory of length N
// with optional episode breaks.
struct Instance {
  efex::CloneAllocation alloc;
  efex::LearnedModel model;
  efex::Trajectory traj;
};

inline Instance random_instance(std::mt19937_64& rng, int max_clones, int length, int n_actions, bool breaks) {
  std::uniform_int_distribution<int> n_obs_d(1, 3);
  const int n_obs = n_obs_d(rng);
  std::vector<int> counts(n_obs, 1);
  int total = n_obs;
  while (total < max_clones && std::uniform_real_distribution<double>(0, 1)(rng) < 0.7) {
    ++counts[std::uniform_int_distribution<int>(0, n_obs - 1)(rng)];
    ++total;
  }
  Instance in{efex::CloneAllocation(counts), {}, {}};
  in.model = efex::random_model(in.alloc, n_actions, rng(), 1e-3);
  // Non-uniform initial distribution exercises the first-step term.
  for (double& p : in.model.initial) p = 0.1 + std::uniform_real_distribution<double>(0, 1)(rng);
  double s = 0.0;
  for (double p : in.model.initial) s += p;
  for (double& p : in.model.initial) p /= s;
  std::uniform_int_distribution<int> obs(0, n_obs - 1), act(0, n_actions - 1);
  in.traj.start_episode(obs(rng));
  for (int n = 1; n < length; ++n) {
    if (breaks && std::uniform_real_distribution<double>(0, 1)(rng) < 0.2) {
      in.traj.start_episode(obs(rng));
    } else {
      in.traj.append(act(rng), obs(rng));
    }
  }
  return in;
}

}  // namespace test_instances
