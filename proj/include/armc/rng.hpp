#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace armc {

// Stateless splitmix64 step, used for seed derivation only.
inline uint64_t splitmix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t hash_combine(uint64_t h, uint64_t w) {
  return splitmix64(h ^ (w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// Derive a sub-seed from a base seed and a list of words. Stable across
// grid edits: the result depends only on the words passed, in order.
inline uint64_t mix_seed(uint64_t base, std::initializer_list<uint64_t> words) {
  uint64_t h = splitmix64(base);
  for (uint64_t w : words) h = hash_combine(h, w);
  return h;
}

inline uint64_t bits_of(double x) { return std::bit_cast<uint64_t>(x); }

// Deterministic RNG over std::mt19937_64 with explicit distributions so
// that streams do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; two uniforms per draw, spare discarded.
  double gaussian() {
    const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace armc
