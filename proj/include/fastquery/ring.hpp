#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fastquery/errors.hpp"
#include "fastquery/rng.hpp"

namespace fastquery::ring {

/// Parameters of the negacyclic ring Z_q[X]/(X^N + 1) with q = 2^q_bits and
/// plaintext modulus p = 2^p_bits. Both moduli are powers of two, so
/// reduction is bit masking and delta = q/p is exact.
struct RingParams {
  uint32_t degree_n = 4096;  ///< polynomial degree N, a power of two
  uint32_t q_bits = 48;      ///< ciphertext modulus q = 2^q_bits
  uint32_t p_bits = 13;      ///< plaintext modulus p = 2^p_bits
  uint32_t error_bound = 8;  ///< max magnitude B of fresh error coefficients

  void validate() const {
    if (degree_n < 2 || (degree_n & (degree_n - 1)) != 0)
      throw ConfigError("degree_n must be a power of two >= 2, got " + std::to_string(degree_n));
    if (q_bits < 20 || q_bits > 62)
      throw ConfigError("q_bits must lie in [20, 62], got " + std::to_string(q_bits));
    if (p_bits < 13 || p_bits > 20)
      throw ConfigError("p_bits must lie in [13, 20], got " + std::to_string(p_bits));
    if (p_bits >= q_bits) throw ConfigError("p_bits must be smaller than q_bits");
    if (error_bound == 0) throw ConfigError("error_bound must be positive");
  }

  uint64_t q() const { return uint64_t{1} << q_bits; }
  uint64_t q_mask() const { return q() - 1; }
  uint64_t p() const { return uint64_t{1} << p_bits; }
  uint64_t p_mask() const { return p() - 1; }
  /// delta = q/p, the plaintext scaling factor.
  uint64_t delta() const { return uint64_t{1} << (q_bits - p_bits); }

  bool operator==(const RingParams&) const = default;
};

/// Ring element: degree_n coefficients, each reduced mod q.
struct Poly {
  std::vector<uint64_t> coeffs;

  Poly() = default;
  explicit Poly(size_t n) : coeffs(n, 0) {}
  explicit Poly(std::vector<uint64_t> c) : coeffs(std::move(c)) {}

  size_t size() const { return coeffs.size(); }
  uint64_t& operator[](size_t i) { return coeffs[i]; }
  uint64_t operator[](size_t i) const { return coeffs[i]; }
  bool operator==(const Poly&) const = default;
};

inline void check_conforms(const Poly& a, const RingParams& params, const char* what) {
  if (a.size() != params.degree_n)
    throw DimensionError(std::string(what) + ": polynomial length " + std::to_string(a.size()) +
                         " != degree_n " + std::to_string(params.degree_n));
}

inline Poly zero_poly(const RingParams& params) { return Poly(params.degree_n); }

/// Monomial c * X^k reduced into the ring.
inline Poly monomial(const RingParams& params, uint64_t c, size_t k) {
  Poly r(params.degree_n);
  r[k % params.degree_n] = c & params.q_mask();
  return r;
}

inline Poly poly_add(const Poly& a, const Poly& b, const RingParams& params) {
  check_conforms(a, params, "poly_add lhs");
  check_conforms(b, params, "poly_add rhs");
  Poly r(params.degree_n);
  uint64_t mask = params.q_mask();
  for (size_t i = 0; i < a.size(); ++i) r[i] = (a[i] + b[i]) & mask;
  return r;
}

inline Poly poly_sub(const Poly& a, const Poly& b, const RingParams& params) {
  check_conforms(a, params, "poly_sub lhs");
  check_conforms(b, params, "poly_sub rhs");
  Poly r(params.degree_n);
  uint64_t mask = params.q_mask();
  for (size_t i = 0; i < a.size(); ++i) r[i] = (a[i] - b[i]) & mask;
  return r;
}

namespace detail {

// Full product of two length-n coefficient blocks into out[0 .. 2n-1]
// (out[2n-1] stays zero; the true product has 2n-1 coefficients). All
// arithmetic wraps mod 2^64, which is exact for any final modulus 2^k,
// k <= 64, because 2^k divides 2^64.
constexpr size_t kKaratsubaThreshold = 128;

inline void schoolbook_full(const uint64_t* a, const uint64_t* b, size_t n, uint64_t* out) {
  for (size_t i = 0; i < 2 * n; ++i) out[i] = 0;
  for (size_t i = 0; i < n; ++i) {
    uint64_t ai = a[i];
    if (ai == 0) continue;
    uint64_t* o = out + i;
    for (size_t j = 0; j < n; ++j) o[j] += ai * b[j];
  }
}

// scratch must hold at least 4*n entries.
inline void karatsuba_full(const uint64_t* a, const uint64_t* b, size_t n, uint64_t* out,
                           uint64_t* scratch) {
  if (n <= kKaratsubaThreshold || (n & 1) != 0) {
    schoolbook_full(a, b, n, out);
    return;
  }
  size_t h = n / 2;
  uint64_t* sa = scratch;            // h
  uint64_t* sb = scratch + h;        // h
  uint64_t* d1 = scratch + 2 * h;    // 2h = n
  uint64_t* rec = scratch + 2 * n;   // recursion workspace

  // out[0 .. n-1] = a0*b0, out[n .. 2n-1] = a1*b1 (disjoint halves).
  karatsuba_full(a, b, h, out, rec);
  karatsuba_full(a + h, b + h, h, out + n, rec);

  for (size_t i = 0; i < h; ++i) {
    sa[i] = a[i] + a[h + i];
    sb[i] = b[i] + b[h + i];
  }
  karatsuba_full(sa, sb, h, d1, rec);
  for (size_t i = 0; i < n; ++i) d1[i] -= out[i] + out[n + i];
  for (size_t i = 0; i < n; ++i) out[h + i] += d1[i];
}

inline std::vector<uint64_t>& mul_scratch(size_t n) {
  thread_local std::vector<uint64_t> buf;
  if (buf.size() < 6 * n) buf.resize(6 * n);
  return buf;
}

}  // namespace detail

/// Negacyclic product of two length-n coefficient vectors mod 2^mod_bits:
/// full convolution followed by the X^n = -1 fold. Usable for any power-of-two
/// modulus (the plaintext ring Z_p as well as Z_q).
inline std::vector<uint64_t> negacyclic_mul_mod(const std::vector<uint64_t>& a,
                                                const std::vector<uint64_t>& b,
                                                uint32_t mod_bits) {
  if (a.size() != b.size())
    throw DimensionError("negacyclic_mul_mod: operand lengths differ");
  if (mod_bits == 0 || mod_bits > 64) throw ConfigError("negacyclic_mul_mod: bad mod_bits");
  size_t n = a.size();
  auto& buf = detail::mul_scratch(n);
  uint64_t* full = buf.data();
  uint64_t* scratch = buf.data() + 2 * n;
  detail::karatsuba_full(a.data(), b.data(), n, full, scratch);
  uint64_t mask = (mod_bits == 64) ? ~uint64_t{0} : (uint64_t{1} << mod_bits) - 1;
  std::vector<uint64_t> r(n);
  for (size_t k = 0; k + 1 < n; ++k) r[k] = (full[k] - full[k + n]) & mask;
  r[n - 1] = full[n - 1] & mask;
  return r;
}

inline Poly poly_negacyclic_mul(const Poly& a, const Poly& b, const RingParams& params) {
  check_conforms(a, params, "poly_negacyclic_mul lhs");
  check_conforms(b, params, "poly_negacyclic_mul rhs");
  return Poly(negacyclic_mul_mod(a.coeffs, b.coeffs, params.q_bits));
}

/// Uniform element of the ring.
inline Poly sample_uniform(const RingParams& params, Rng& rng) {
  Poly r(params.degree_n);
  for (size_t i = 0; i < r.size(); ++i) r[i] = rng.bits(params.q_bits);
  return r;
}

/// Ternary polynomial: coefficients in {-1, 0, 1} mod q, each with
/// probability 1/3.
inline Poly sample_ternary(const RingParams& params, Rng& rng) {
  Poly r(params.degree_n);
  uint64_t minus_one = params.q() - 1;
  for (size_t i = 0; i < r.size(); ++i) {
    uint64_t t = rng.below(3);
    r[i] = (t == 2) ? minus_one : t;
  }
  return r;
}

/// Centered binomial error: sum of B coin flips minus sum of B coin flips,
/// so |e| <= error_bound with mean zero.
inline Poly sample_error(const RingParams& params, Rng& rng) {
  Poly r(params.degree_n);
  uint64_t mask = params.q_mask();
  for (size_t i = 0; i < r.size(); ++i) {
    int64_t e = 0;
    for (uint32_t k = 0; k < params.error_bound; ++k) {
      e += static_cast<int64_t>(rng.next_u64() & 1);
      e -= static_cast<int64_t>((rng.next_u64() >> 1) & 1);
    }
    r[i] = static_cast<uint64_t>(e) & mask;
  }
  return r;
}

/// Centered representative of c mod q in (-q/2, q/2].
inline int64_t center(uint64_t c, const RingParams& params) {
  uint64_t half = params.q() >> 1;
  return (c > half) ? static_cast<int64_t>(c) - static_cast<int64_t>(params.q())
                    : static_cast<int64_t>(c);
}

}  // namespace fastquery::ring
