#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace persist {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based 64-bit generator: the i-th output of a stream with key k is
/// mix64(k + (i + 1) * 0x9E3779B97F4A7C15). The whole state is (key, counter),
/// so any position of any stream can be reproduced without replaying it.
///
/// Satisfies UniformRandomBitGenerator, but the samplers below are written out
/// explicitly so results do not depend on the standard library's distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit constexpr CounterRng(std::uint64_t key = 0, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  /// Stream for replicate `replicate` of an experiment seeded with `master_seed`:
  /// key = mix64(mix64(master_seed) ^ mix64(replicate + 0xD1B54A32D192ED03)).
  static constexpr CounterRng stream(std::uint64_t master_seed, std::uint64_t replicate) noexcept {
    return CounterRng(mix64(mix64(master_seed) ^ mix64(replicate + 0xD1B54A32D192ED03ULL)));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGamma); }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

  /// Uniform on the open interval (0,1), 53-bit resolution.
  double uniform01() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double p) noexcept { return uniform01() < p; }

  /// Uniform on {0, ..., bound-1}; bound must be positive.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = (*this)();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        x = (*this)();
        m = static_cast<__uint128_t>(x) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Number of failures before the first success of Bernoulli(p) trials.
  /// Returns max() when p <= 0.
  std::uint64_t geometric_skip(double p) noexcept {
    if (p >= 1.0) return 0;
    if (p <= 0.0) return max();
    const double g = std::floor(std::log(uniform01()) / std::log1p(-p));
    return g >= 1.8e19 ? max() : static_cast<std::uint64_t>(g);
  }

  /// Uniformly random permutation of {1..n} as a 1-based image vector
  /// (entry 0 unused).
  std::vector<std::uint32_t> permutation(std::uint32_t n) {
    std::vector<std::uint32_t> image(n + 1);
    std::iota(image.begin(), image.end(), 0u);
    for (std::uint32_t i = n; i > 1; --i) {
      const auto j = static_cast<std::uint32_t>(uniform_below(i)) + 1;
      std::swap(image[i], image[j]);
    }
    return image;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace persist
