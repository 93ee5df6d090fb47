#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "muonad/tensor.hpp"

namespace muonad {

/// xoshiro256** seeded through SplitMix64. Normals come from the basic
/// Box-Muller transform, consuming two uniforms per pair and caching the
/// second deviate. Streams are bit-identical for a given seed on any IEEE-754
/// platform with a correctly rounded libm.
class SeededRng {
 public:
  static constexpr std::string_view kAlgorithm = "xoshiro256**/splitmix64/box-muller";

  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  std::optional<double> spare_;
};

Tensor draw_normal(SeededRng& rng, const Shape& shape);
Tensor draw_uniform(SeededRng& rng, const Shape& shape, double lo, double hi);

}  // namespace muonad
