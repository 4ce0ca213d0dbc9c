#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedsched {

// Deterministic, platform-independent random stream.
//
// Engine: xoshiro256** (Blackman & Vigna), state filled from SplitMix64.
// A labelled stream is seeded with
//     splitmix64(seed ^ fnv1a64(label))
// and Rng::fork(key) derives a child seed as splitmix64(seed_ ^ splitmix64(key)),
// so children never consume draws from the parent. All distributions below
// are implemented here rather than with <random> distributions, whose output
// is implementation-defined.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);
  static Rng from_label(std::uint64_t seed, std::string_view label);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  Rng fork(std::uint64_t key) const;
  std::uint64_t seed() const { return seed_; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n), n >= 1.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via the Marsaglia polar method.
  double normal();
  // Exponential with the given mean.
  double exponential(double mean);
  // Gamma(shape, 1), Marsaglia-Tsang; returns log of the variate so very small
  // shapes do not underflow to zero.
  double log_gamma_variate(double shape);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

// One stream per label, seeded independently from (seed, label). Labels must
// be distinct; a duplicate throws ConfigError.
std::vector<Rng> rng_streams(std::uint64_t seed, std::span<const std::string> labels);

}  // namespace fedsched
