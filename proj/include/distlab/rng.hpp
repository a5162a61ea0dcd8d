#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace distlab {

// All randomness in the library goes through these helpers. std::mt19937_64
// is bit-exact per the standard, but the std distributions and std::shuffle
// are implementation-defined, so we draw doubles and bounded ints ourselves
// to keep fixed-seed runs reproducible across toolchains.

using Rng = std::mt19937_64;

// splitmix64; used to fold (seed, stream) pairs into one engine seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// uniform double in [0, 1) from the top 53 bits
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// unbiased integer in [0, n) by rejection
inline uint64_t bounded(Rng& rng, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline void fisher_yates(std::vector<int>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[bounded(rng, i)]);
  }
}

}  // namespace distlab
