#pragma once

#include <cstdint>
#include <random>

namespace projmc2 {

using Rng = std::mt19937_64;

/// Named substreams expanded from one master seed. Adding a stream never
/// shifts the draws of another.
enum class Stream : std::uint32_t {
  Initialization = 1,
  FactorNoise = 2,
  Sigma2 = 3,
  Gamma = 4,
  Locations = 11,
  Covariates = 12,
  Factors = 13,
  Noise = 14,
};

inline Rng make_stream(std::uint64_t seed, Stream stream, std::uint32_t chain = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), chain};
  return Rng(seq);
}

}  // namespace projmc2
