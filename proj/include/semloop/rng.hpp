#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace semloop {

/// Seeded generator with platform-independent derived draws. The standard
/// distributions are implementation-defined, so every draw used by the
/// library goes through the members below.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  /// Index drawn proportionally to non-negative weights summing to `total`.
  std::size_t categorical(std::span<const double> weights, double total);

  /// Index drawn from a cumulative (non-decreasing) weight table.
  std::size_t from_cdf(std::span<const double> cdf);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with context values (iteration, instance id, ...) so
/// that per-call seeds do not depend on call order.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> parts);

}  // namespace semloop
