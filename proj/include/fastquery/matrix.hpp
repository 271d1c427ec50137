#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fastquery/errors.hpp"

namespace fastquery {

/// Dense row-major matrix.
template <typename T>
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, T{}) {}

  T& operator()(size_t i, size_t j) { return data[i * cols + j]; }
  const T& operator()(size_t i, size_t j) const { return data[i * cols + j]; }

  const T* row(size_t i) const { return data.data() + i * cols; }
  T* row(size_t i) { return data.data() + i * cols; }

  bool operator==(const Matrix&) const = default;

  Matrix<T> transposed() const {
    Matrix<T> t(cols, rows);
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }
};

inline void check_shapes_match(size_t ar, size_t ac, size_t br, size_t bc, const char* what) {
  if (ar != br || ac != bc)
    throw DimensionError(std::string(what) + ": shape (" + std::to_string(ar) + "x" +
                         std::to_string(ac) + ") vs (" + std::to_string(br) + "x" +
                         std::to_string(bc) + ")");
}

/// A * B with a fixed accumulation order (k ascending), so results are
/// bitwise reproducible.
inline Matrix<double> matmul(const Matrix<double>& a, const Matrix<double>& b) {
  if (a.cols != b.rows) throw DimensionError("matmul: inner dimensions disagree");
  Matrix<double> r(a.rows, b.cols);
  for (size_t i = 0; i < a.rows; ++i) {
    for (size_t k = 0; k < a.cols; ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      double* rrow = r.row(i);
      for (size_t j = 0; j < b.cols; ++j) rrow[j] += aik * brow[j];
    }
  }
  return r;
}

}  // namespace fastquery
