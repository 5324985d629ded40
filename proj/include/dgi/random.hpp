#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dgi {

/// Every stochastic component draws from this engine. The helpers below avoid
/// the implementation-defined std distributions so streams are reproducible
/// across standard libraries.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform double in the open interval (0, 1).
inline double uniform_open01(Rng& rng) {
  double u = 0.0;
  while (u == 0.0) u = uniform01(rng);
  return u;
}

/// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

/// Standard normal via Box-Muller.
inline double standard_normal(Rng& rng) {
  const double u1 = uniform_open01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace dgi
