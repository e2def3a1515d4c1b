#pragma once

#include <cstdint>
#include <random>

namespace eload {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of an independent sub-stream: the stream index is mixed into the
/// master seed, so stream i never depends on how many other streams exist
/// or on the order in which they are consumed.
constexpr std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(mix64(master) ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  return z(rng);
}

inline double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

}  // namespace eload
