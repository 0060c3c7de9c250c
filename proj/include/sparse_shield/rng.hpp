#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace sparse_shield {

/// Seeded 64-bit generator with platform-independent derived draws
/// (std distributions are implementation-defined, so we avoid them).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller.
  double normal();

  /// Inverse-CDF draw over non-negative weights. Returns weights.size() when
  /// every weight is zero.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sparse_shield
