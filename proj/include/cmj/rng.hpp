#pragma once

// Seeding and the handful of variate generators used by the samplers.
//
// Every random stream is a std::mt19937_64 whose seed is derived from a master
// seed with derive_seed(). The conversion from raw 64-bit output to uniforms and
// exponentials is done here rather than through <random> distributions so that
// streams are reproducible across standard library implementations.

#include <cmath>
#include <cstdint>
#include <random>

namespace cmj {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream tags keep the seed spaces of different consumers disjoint.
enum class Stream : std::uint64_t {
  replica = 1,
  sigma_grid = 2,
  nested_mc = 3,
  a7_check = 4,
  biggins = 5,
  generic = 6,
};

/// Seed of stream `index` under `tag`, derived from `master`:
///   splitmix64(splitmix64(splitmix64(master) ^ tag) ^ index)
inline constexpr std::uint64_t derive_seed(std::uint64_t master, Stream tag,
                                           std::uint64_t index) noexcept {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  return splitmix64(h ^ index);
}

inline Rng make_rng(std::uint64_t master, Stream tag, std::uint64_t index) {
  return Rng(derive_seed(master, tag, index));
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform on (0, 1].
inline double uniform_open_left(Rng& rng) { return 1.0 - uniform01(rng); }

/// Standard exponential.
inline double exponential1(Rng& rng) { return -std::log(uniform_open_left(rng)); }

}  // namespace cmj
