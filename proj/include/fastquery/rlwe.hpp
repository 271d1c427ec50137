#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "fastquery/errors.hpp"
#include "fastquery/ring.hpp"
#include "fastquery/rng.hpp"

namespace fastquery::rlwe {

using ring::Poly;
using ring::RingParams;

/// Plaintext ring element: degree_n coefficients, each in [0, p).
struct PlaintextPoly {
  std::vector<uint64_t> coeffs;

  PlaintextPoly() = default;
  explicit PlaintextPoly(size_t n) : coeffs(n, 0) {}
  explicit PlaintextPoly(std::vector<uint64_t> c) : coeffs(std::move(c)) {}

  size_t size() const { return coeffs.size(); }
  uint64_t& operator[](size_t i) { return coeffs[i]; }
  uint64_t operator[](size_t i) const { return coeffs[i]; }
  bool operator==(const PlaintextPoly&) const = default;
};

struct SecretKey {
  Poly s;
  RingParams params;
};

/// Symmetric RLWE ciphertext (a, b) with b = a*s + e + delta*m. noise_bound
/// tracks a worst-case bound on |e|; decryption is exact while it stays
/// below delta/2.
struct Ciphertext {
  Poly a;
  Poly b;
  uint64_t noise_bound = 0;
  RingParams params;

  bool operator==(const Ciphertext&) const = default;
};

inline void check_plaintext(const PlaintextPoly& m, const RingParams& params, const char* what) {
  if (m.size() != params.degree_n)
    throw DimensionError(std::string(what) + ": plaintext length " + std::to_string(m.size()) +
                         " != degree_n " + std::to_string(params.degree_n));
  uint64_t p = params.p();
  for (uint64_t c : m.coeffs)
    if (c >= p)
      throw DomainError(std::string(what) + ": plaintext coefficient " + std::to_string(c) +
                        " >= p = " + std::to_string(p));
}

inline void check_same_params(const RingParams& a, const RingParams& b, const char* what) {
  if (!(a == b)) throw DimensionError(std::string(what) + ": ring parameter mismatch");
}

inline SecretKey keygen(const RingParams& params, Rng& rng) {
  params.validate();
  return SecretKey{ring::sample_ternary(params, rng), params};
}

inline Ciphertext encrypt(const PlaintextPoly& m, const SecretKey& sk, Rng& rng) {
  const RingParams& params = sk.params;
  check_plaintext(m, params, "encrypt");
  Poly a = ring::sample_uniform(params, rng);
  Poly e = ring::sample_error(params, rng);
  uint64_t delta = params.delta();
  uint64_t mask = params.q_mask();
  Poly b = ring::poly_negacyclic_mul(a, sk.s, params);
  for (size_t i = 0; i < b.size(); ++i) b[i] = (b[i] + e[i] + delta * m[i]) & mask;
  return Ciphertext{std::move(a), std::move(b), params.error_bound, params};
}

inline PlaintextPoly decrypt(const Ciphertext& ct, const SecretKey& sk) {
  check_same_params(ct.params, sk.params, "decrypt");
  const RingParams& params = ct.params;
  uint64_t delta = params.delta();
  if (ct.noise_bound >= delta / 2)
    throw NoiseBudgetError("decrypt: tracked noise bound " + std::to_string(ct.noise_bound) +
                           " >= delta/2 = " + std::to_string(delta / 2));
  Poly d = ring::poly_negacyclic_mul(ct.a, sk.s, params);
  uint64_t mask = params.q_mask();
  uint32_t shift = params.q_bits - params.p_bits;
  PlaintextPoly m(params.degree_n);
  for (size_t i = 0; i < d.size(); ++i) {
    uint64_t noisy = (ct.b[i] - d[i]) & mask;
    m[i] = ((noisy + delta / 2) & mask) >> shift;
  }
  return m;
}

inline Ciphertext ct_add_ct(const Ciphertext& c1, const Ciphertext& c2) {
  check_same_params(c1.params, c2.params, "ct_add_ct");
  const RingParams& params = c1.params;
  unsigned __int128 nb =
      static_cast<unsigned __int128>(c1.noise_bound) + c2.noise_bound;
  if (nb >= params.delta() / 2)
    throw NoiseBudgetError("ct_add_ct: summed noise bound exceeds delta/2");
  return Ciphertext{ring::poly_add(c1.a, c2.a, params), ring::poly_add(c1.b, c2.b, params),
                    static_cast<uint64_t>(nb), params};
}

inline Ciphertext ct_add_pt(const Ciphertext& ct, const PlaintextPoly& u) {
  const RingParams& params = ct.params;
  check_plaintext(u, params, "ct_add_pt");
  uint64_t delta = params.delta();
  uint64_t mask = params.q_mask();
  Ciphertext r = ct;
  for (size_t i = 0; i < r.b.size(); ++i) r.b[i] = (r.b[i] + delta * u[i]) & mask;
  return r;
}

inline Ciphertext ct_sub_pt(const Ciphertext& ct, const PlaintextPoly& u) {
  const RingParams& params = ct.params;
  check_plaintext(u, params, "ct_sub_pt");
  uint64_t delta = params.delta();
  uint64_t mask = params.q_mask();
  Ciphertext r = ct;
  for (size_t i = 0; i < r.b.size(); ++i) r.b[i] = (r.b[i] - delta * u[i]) & mask;
  return r;
}

/// Ciphertext-plaintext product (a*w, b*w). Noise grows by the worst-case
/// convolution factor N * max|w|.
inline Ciphertext ct_mul_pt(const Ciphertext& ct, const PlaintextPoly& w) {
  const RingParams& params = ct.params;
  check_plaintext(w, params, "ct_mul_pt");
  uint64_t max_w = 0;
  for (uint64_t c : w.coeffs) max_w = std::max(max_w, c);
  unsigned __int128 nb = static_cast<unsigned __int128>(ct.noise_bound) * params.degree_n * max_w;
  if (nb >= params.delta() / 2)
    throw NoiseBudgetError("ct_mul_pt: post-multiplication noise bound exceeds delta/2");
  Poly wp(w.coeffs);
  return Ciphertext{ring::poly_negacyclic_mul(ct.a, wp, params),
                    ring::poly_negacyclic_mul(ct.b, wp, params), static_cast<uint64_t>(nb),
                    params};
}

/// Remaining noise budget in bits, measured with the key:
/// log2(delta/2) - log2(max |true noise coefficient|). Debug/test only.
inline int noise_budget(const Ciphertext& ct, const SecretKey& sk) {
  check_same_params(ct.params, sk.params, "noise_budget");
  const RingParams& params = ct.params;
  uint64_t delta = params.delta();
  uint64_t mask = params.q_mask();
  uint32_t shift = params.q_bits - params.p_bits;
  Poly d = ring::poly_negacyclic_mul(ct.a, sk.s, params);
  uint64_t max_noise = 0;
  for (size_t i = 0; i < d.size(); ++i) {
    uint64_t noisy = (ct.b[i] - d[i]) & mask;
    uint64_t m = ((noisy + delta / 2) & mask) >> shift;
    uint64_t noise = (noisy - delta * m) & mask;
    int64_t centered = ring::center(noise, params);
    uint64_t mag = static_cast<uint64_t>(centered < 0 ? -centered : centered);
    max_noise = std::max(max_noise, mag);
  }
  double budget = std::log2(static_cast<double>(delta) / 2.0) -
                  std::log2(static_cast<double>(std::max<uint64_t>(max_noise, 1)));
  return static_cast<int>(std::floor(budget));
}

// --- wire format -----------------------------------------------------------
//
// header: magic "FQCT" (4B) | version (1B) | degree_n (u32 LE) | q_bits (u8)
//         | p_bits (u8) | noise_bound (u64 LE)
// payload: the 2*N coefficients of (a, b), each packed into exactly q_bits
//          bits, little-endian bit order, zero-padded to a byte boundary.

inline constexpr char kCtMagic[4] = {'F', 'Q', 'C', 'T'};
inline constexpr uint8_t kCtVersion = 1;
inline constexpr size_t kCtHeaderLen = 19;

namespace detail {

class BitWriter {
 public:
  explicit BitWriter(std::vector<uint8_t>& out) : out_(out) {}
  void put(uint64_t value, uint32_t nbits) {
    for (uint32_t i = 0; i < nbits; ++i) {
      if (bit_ == 0) out_.push_back(0);
      out_.back() |= static_cast<uint8_t>((value >> i) & 1) << bit_;
      bit_ = (bit_ + 1) & 7;
    }
  }

 private:
  std::vector<uint8_t>& out_;
  uint32_t bit_ = 0;
};

class BitReader {
 public:
  BitReader(const uint8_t* data, size_t len) : data_(data), len_(len) {}
  uint64_t get(uint32_t nbits) {
    uint64_t v = 0;
    for (uint32_t i = 0; i < nbits; ++i) {
      size_t byte = pos_ >> 3;
      if (byte >= len_) throw FormatError("ciphertext payload truncated");
      v |= static_cast<uint64_t>((data_[byte] >> (pos_ & 7)) & 1) << i;
      ++pos_;
    }
    return v;
  }

 private:
  const uint8_t* data_;
  size_t len_;
  size_t pos_ = 0;
};

inline void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_u64le(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline uint32_t get_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline uint64_t get_u64le(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline size_t ct_wire_size(const RingParams& params) {
  return kCtHeaderLen + (2 * static_cast<size_t>(params.degree_n) * params.q_bits + 7) / 8;
}

inline std::vector<uint8_t> serialize_ct(const Ciphertext& ct) {
  const RingParams& params = ct.params;
  std::vector<uint8_t> out;
  out.reserve(ct_wire_size(params));
  out.insert(out.end(), kCtMagic, kCtMagic + 4);
  out.push_back(kCtVersion);
  detail::put_u32le(out, params.degree_n);
  out.push_back(static_cast<uint8_t>(params.q_bits));
  out.push_back(static_cast<uint8_t>(params.p_bits));
  detail::put_u64le(out, ct.noise_bound);
  detail::BitWriter bw(out);
  for (uint64_t c : ct.a.coeffs) bw.put(c, params.q_bits);
  for (uint64_t c : ct.b.coeffs) bw.put(c, params.q_bits);
  out.resize(ct_wire_size(params), 0);
  return out;
}

inline Ciphertext deserialize_ct(const std::vector<uint8_t>& bytes, const RingParams& params) {
  if (bytes.size() < kCtHeaderLen) throw FormatError("ciphertext blob shorter than header");
  if (std::memcmp(bytes.data(), kCtMagic, 4) != 0)
    throw FormatError("bad ciphertext magic");
  if (bytes[4] != kCtVersion)
    throw FormatError("unsupported ciphertext version " + std::to_string(bytes[4]));
  uint32_t n = detail::get_u32le(bytes.data() + 5);
  uint8_t qb = bytes[9];
  uint8_t pb = bytes[10];
  if (n != params.degree_n || qb != params.q_bits || pb != params.p_bits)
    throw FormatError("ciphertext parameters (N=" + std::to_string(n) +
                      ", q_bits=" + std::to_string(qb) + ", p_bits=" + std::to_string(pb) +
                      ") do not match expected ring");
  if (bytes.size() != ct_wire_size(params)) throw FormatError("ciphertext payload truncated");
  uint64_t noise_bound = detail::get_u64le(bytes.data() + 11);
  detail::BitReader br(bytes.data() + kCtHeaderLen, bytes.size() - kCtHeaderLen);
  Ciphertext ct;
  ct.params = params;
  ct.noise_bound = noise_bound;
  ct.a = Poly(params.degree_n);
  ct.b = Poly(params.degree_n);
  for (size_t i = 0; i < params.degree_n; ++i) ct.a[i] = br.get(params.q_bits);
  for (size_t i = 0; i < params.degree_n; ++i) ct.b[i] = br.get(params.q_bits);
  return ct;
}

}  // namespace fastquery::rlwe
