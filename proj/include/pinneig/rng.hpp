#pragma once

#include <cstdint>

namespace pinneig {

// Counter-based SplitMix64. The i-th draw of stream `seed` is
// mix(seed + (i + 1) * golden_gamma), so every draw is a pure function of
// (seed, i) and identical on every platform.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() noexcept {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from a parent seed and a label.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label) noexcept {
  return SplitMix64::mix(parent ^ SplitMix64::mix(label + SplitMix64::kGamma));
}

}  // namespace pinneig
