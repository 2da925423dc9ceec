#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace shiftcam {

/// SplitMix64 (Steele, Lea, Flood 2014). Used for seeding and seed derivation.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  result_type operator()() noexcept;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman, Vigna). The stream for a given seed is part of
/// the artifact format: patterns are regenerated from the recorded seed.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;
  explicit Xoshiro256(std::uint64_t seed) noexcept;
  result_type operator()() noexcept;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  /// Fair coin from the top bit.
  bool bit() noexcept { return ((*this)() >> 63) != 0; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

/// Mixes a base seed with a list of tags into an independent child seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept;

}  // namespace shiftcam
