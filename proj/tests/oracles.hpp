#pragma once

// Independent reference implementations the tests check the library against.
// These deliberately avoid the library's arithmetic shortcuts: products are
// taken at 128 bits and reduced term by term.

#include <cstdint>
#include <vector>

namespace fqtest {

/// Schoolbook negacyclic product over Z_q[X]/(X^n+1) for any q <= 2^62.
inline std::vector<uint64_t> negacyclic_mul_oracle(const std::vector<uint64_t>& a,
                                                   const std::vector<uint64_t>& b, uint64_t q) {
  size_t n = a.size();
  std::vector<uint64_t> out(n, 0);
  for (size_t i = 0; i < n; ++i) {
    if (a[i] == 0) continue;
    for (size_t j = 0; j < n; ++j) {
      unsigned __int128 prod = static_cast<unsigned __int128>(a[i]) * b[j];
      uint64_t t = static_cast<uint64_t>(prod % q);
      size_t k = i + j;
      if (k < n) {
        out[k] = (out[k] + t) % q;
      } else {
        out[k - n] = (out[k - n] + q - t) % q;
      }
    }
  }
  return out;
}

inline uint64_t add_mod_oracle(uint64_t a, uint64_t b, uint64_t q) {
  return static_cast<uint64_t>((static_cast<unsigned __int128>(a) + b) % q);
}

inline uint64_t sub_mod_oracle(uint64_t a, uint64_t b, uint64_t q) {
  return static_cast<uint64_t>((static_cast<unsigned __int128>(a) + q - b) % q);
}

inline uint64_t fnv1a(const std::vector<uint8_t>& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace fqtest
