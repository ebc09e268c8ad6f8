#pragma once

#include <cstdint>
#include <random>

namespace amopt {

/// Seeded random stream. The engine is mt19937_64 (bit-exact across standard
/// libraries); uniforms, Gaussians and exponentials are derived here rather
/// than through <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform on the open interval (0, 1), 53 bits.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal, Marsaglia polar method.
  double normal();

  /// Exponential with the given mean.
  double exponential(double mean);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stream splitting rule: root XOR a hash of the index tuple. Used for
/// (trial), (trial, time, node) and similar sub-streams.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace amopt
