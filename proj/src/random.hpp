#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pnr::detail {

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Pair number of a thermal mode with the given mean: P(n) = r^n (1 - r),
// r = mean / (1 + mean). Inverse-CDF draw.
inline std::uint32_t thermal_count(double mean, std::mt19937_64& rng) {
  if (mean <= 0.0) return 0;
  const double u = 1.0 - uniform01(rng);  // (0, 1]
  const double log_r = -std::log1p(1.0 / mean);
  return static_cast<std::uint32_t>(std::floor(std::log(u) / log_r));
}

}  // namespace pnr::detail
