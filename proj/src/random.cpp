#include "kfdr/random.hpp"

#include <cmath>
#include <numbers>

namespace kfdr {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t RandomSource::next() noexcept {
  state_ += kGolden;
  return mix(state_);
}

double RandomSource::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double RandomSource::normal() noexcept {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

std::size_t RandomSource::index(std::size_t n) noexcept {
  const unsigned __int128 wide = static_cast<unsigned __int128>(next()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

std::vector<std::size_t> RandomSource::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = index(i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) noexcept {
  return mix(seed ^ mix(fnv1a(name) + kGolden));
}

RandomSource RandomSource::derive(std::string_view name) const {
  return RandomSource(derive_seed(seed_, name));
}

}  // namespace kfdr
