#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace efex {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded generator. Child streams derived with split() are independent of the
// parent's consumption state, so components can be reseeded reproducibly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  Rng split(std::uint64_t stream) const { return Rng(splitmix64(seed_ ^ splitmix64(stream + 1))); }

  std::mt19937_64& engine() { return engine_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  // Uniform in [0, n).
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

  // Index drawn from unnormalized nonnegative weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double r = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      r -= weights[i];
      if (r < 0.0) return i;
    }
    // Rounding left r >= 0: return the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;) {
      if (weights[i] > 0.0) return i;
    }
    return weights.size() - 1;
  }

  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace efex
