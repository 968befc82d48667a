// Counter-based random numbers: each draw is a pure function of
// (seed, index, stream), so results do not depend on iteration order.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace kcs::rng {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  return mix64(mix64(mix64(seed) ^ index) ^ (stream * 0xd6e8feb86659fd93ULL));
}

/// Uniform in [0, 1).
inline double uniform(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  return static_cast<double>(key(seed, index, stream) >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on streams (2s, 2s+1).
inline double normal(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  const double u1 = 1.0 - uniform(seed, index, 2 * stream);  // (0, 1]
  const double u2 = uniform(seed, index, 2 * stream + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace kcs::rng
