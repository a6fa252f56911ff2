#pragma once

#include <cstdint>
#include <random>

#include "sce/math.hpp"

namespace sce {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; used to derive independent seeds from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline double gaussian(Rng& rng, double stddev = 1.0) { return std::normal_distribution<double>(0.0, stddev)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Uniform draw from the (n-1)-simplex (flat Dirichlet).
Vector sample_simplex(Rng& rng, std::size_t n);

}  // namespace sce
