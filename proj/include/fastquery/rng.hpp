#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fastquery {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic, seedable generator. All derived draws are implemented on
/// top of raw mt19937_64 output (never std::uniform_int_distribution, whose
/// algorithm is implementation-defined), so sequences are identical on every
/// platform and can be pinned in golden tests.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), eng_(seed) {}

  uint64_t seed() const { return seed_; }

  /// Independent child generator for a labeled sub-stream.
  Rng fork(uint64_t salt) const { return Rng(splitmix64(seed_ ^ splitmix64(salt))); }

  uint64_t next_u64() { return eng_(); }

  /// Uniform draw in [0, bound) by masked rejection. bound must be > 0.
  uint64_t below(uint64_t bound) {
    if (bound == 0) return 0;
    if ((bound & (bound - 1)) == 0) return next_u64() & (bound - 1);
    uint64_t mask = bound - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
      uint64_t r = next_u64() & mask;
      if (r < bound) return r;
    }
  }

  /// Uniform n-bit value, n in [0, 64].
  uint64_t bits(unsigned n) {
    if (n == 0) return 0;
    return next_u64() >> (64 - n);
  }

  bool coin() { return (next_u64() >> 63) != 0; }

  /// Uniform double in [0, 1) with 53 random bits.
  double unit_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = unit_double();
    double u2 = unit_double();
    while (u1 <= 0.0) u1 = unit_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

 private:
  uint64_t seed_;
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fastquery
