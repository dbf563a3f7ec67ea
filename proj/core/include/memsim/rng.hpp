#pragma once

#include <cstdint>

namespace memsim {

// Deterministic counter-seeded generator (xoshiro256** with splitmix64
// seeding). Every stochastic operation in the library draws from an Rng
// passed by the caller, so a run is a pure function of its seed. We do not
// use <random> distributions because their output is implementation
// defined; the Box-Muller transform below is pinned.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; the second deviate of each pair is
  // cached so consecutive draws stay cheap.
  double normal();
  double normal(double mean, double stddev);

  bool bernoulli(double p);

  // Independent child stream. Children of distinct ids never collide with
  // each other or with the parent.
  Rng split(std::uint64_t stream_id) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t s_[4] = {};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace memsim
