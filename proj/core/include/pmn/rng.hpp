#pragma once

#include <cstdint>

namespace pmn {

/// Counter-based random source.
///
/// Draw i is splitmix64(seed + (i + 1) * golden), so the stream depends only
/// on (seed, number of prior draws). Gaussians use the basic Box-Muller cosine
/// branch and always consume exactly two uniform draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, bound); bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound);
  double gaussian(double mean = 0.0, double stddev = 1.0);

  // Independent stream for a worker / sub-task.
  Rng derive(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace pmn
