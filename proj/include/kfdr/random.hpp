#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace kfdr {

/// Seeded pseudo-random stream.
///
/// The generator is SplitMix64: the n-th raw output is a fixed bit-mixing of
/// `seed + n * 0x9E3779B97F4A7C15`, so the stream is a pure function of the
/// seed. Uniforms take the top 53 bits; normals use the Box-Muller transform
/// (one pair per two uniforms, the second value cached). None of the
/// implementation-defined `<random>` distributions are used, so draws replay
/// identically across standard libraries.
class RandomSource {
 public:
  using result_type = std::uint64_t;

  explicit RandomSource(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next() noexcept;
  /// Uniform on [0, 1).
  double uniform() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal.
  double normal() noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n) noexcept;
  /// Random permutation of 0..n-1 (Fisher-Yates).
  std::vector<std::size_t> permutation(std::size_t n);

  /// Independent stream for a named purpose ("data", "folds", "mcmc", ...).
  /// Depends only on this stream's seed and the name, not on how many values
  /// have been drawn.
  RandomSource derive(std::string_view name) const;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next(); }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) noexcept;

}  // namespace kfdr
