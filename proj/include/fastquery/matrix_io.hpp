#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "fastquery/errors.hpp"
#include "fastquery/matrix.hpp"

namespace fastquery::io {

// Binary matrix container:
//   magic "FQMX" (4B) | version (u8) | dtype (u8: 0 = f64, 1 = i64)
//   | rows (u64 LE) | cols (u64 LE) | row-major payload, little-endian.

inline constexpr char kMatMagic[4] = {'F', 'Q', 'M', 'X'};
inline constexpr uint8_t kMatVersion = 1;

namespace detail {

template <typename T>
constexpr uint8_t dtype_code();
template <>
constexpr uint8_t dtype_code<double>() {
  return 0;
}
template <>
constexpr uint8_t dtype_code<int64_t>() {
  return 1;
}

inline void write_u64le(std::ostream& os, uint64_t v) {
  uint8_t buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<uint8_t>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline uint64_t read_u64le(std::istream& is) {
  uint8_t buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw FormatError("matrix container truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

template <typename T>
void save_matrix(const Matrix<T>& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path);
  os.write(kMatMagic, 4);
  os.put(static_cast<char>(kMatVersion));
  os.put(static_cast<char>(detail::dtype_code<T>()));
  detail::write_u64le(os, m.rows);
  detail::write_u64le(os, m.cols);
  for (const T& v : m.data) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    detail::write_u64le(os, bits);
  }
  if (!os) throw FormatError("write failed: " + path);
}

template <typename T>
Matrix<T> load_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMatMagic, 4) != 0)
    throw FormatError("bad matrix magic in " + path);
  int version = is.get();
  int dtype = is.get();
  if (version != kMatVersion) throw FormatError("unsupported matrix version in " + path);
  if (dtype != detail::dtype_code<T>()) throw FormatError("matrix dtype mismatch in " + path);
  uint64_t rows = detail::read_u64le(is);
  uint64_t cols = detail::read_u64le(is);
  Matrix<T> m(rows, cols);
  for (T& v : m.data) {
    uint64_t bits = detail::read_u64le(is);
    std::memcpy(&v, &bits, 8);
  }
  return m;
}

/// Token frequency file: one "token_id count" pair per line.
inline std::vector<double> load_freqs(const std::string& path, size_t vocab_size) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open frequency file: " + path);
  std::vector<double> freqs(vocab_size, 0.0);
  uint64_t id;
  double count;
  while (is >> id >> count) {
    if (id >= vocab_size)
      throw FormatError("frequency file token id " + std::to_string(id) + " out of range");
    freqs[id] = count;
  }
  return freqs;
}

inline void save_freqs(const std::vector<double>& freqs, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path);
  for (size_t t = 0; t < freqs.size(); ++t) {
    char line[64];
    std::snprintf(line, sizeof(line), "%zu %.17g\n", t, freqs[t]);
    os << line;
  }
}

}  // namespace fastquery::io
