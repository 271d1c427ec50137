#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fastquery/errors.hpp"
#include "fastquery/matrix.hpp"
#include "fastquery/rlwe.hpp"

namespace fastquery::packing {

using rlwe::PlaintextPoly;

/// Placement plan for a matrix-vector product W*x inside negacyclic
/// polynomial products: the length-m input is split into chunks of k_c
/// coefficients, each output polynomial carries k_o matrix rows, and row i
/// of a polynomial is read back at coefficient i*k_c + (k_c - 1).
struct MatVecPlan {
  size_t m = 0;           ///< input length (vocab size)
  size_t n_eff = 0;       ///< output length after slot packing
  size_t degree_n = 0;    ///< ring degree N
  size_t chunk_cols = 0;  ///< k_c, columns per polynomial chunk
  size_t rows_per_poly = 0;  ///< k_o
  size_t num_input_polys = 0;
  size_t num_output_polys = 0;

  size_t extraction_index(size_t row_in_poly) const {
    return row_in_poly * chunk_cols + (chunk_cols - 1);
  }
  /// Which (output polynomial, row within it) carries output column `col`.
  size_t poly_of_output(size_t col) const { return col / rows_per_poly; }
  size_t row_of_output(size_t col) const { return col % rows_per_poly; }
};

inline MatVecPlan plan_matvec(size_t m, size_t n_eff, size_t degree_n) {
  if (m == 0 || n_eff == 0) throw ConfigError("plan_matvec: m and n_eff must be >= 1");
  if (degree_n == 0 || (degree_n & (degree_n - 1)) != 0)
    throw ConfigError("plan_matvec: degree_n must be a power of two");
  MatVecPlan plan;
  plan.m = m;
  plan.n_eff = n_eff;
  plan.degree_n = degree_n;
  plan.chunk_cols = std::min(m, degree_n);
  plan.rows_per_poly = degree_n / plan.chunk_cols;  // >= 1
  plan.num_input_polys = (m + plan.chunk_cols - 1) / plan.chunk_cols;
  plan.num_output_polys = (n_eff + plan.rows_per_poly - 1) / plan.rows_per_poly;
  return plan;
}

/// Chunk c places x[c*k_c + j] at coefficient j; all other coefficients zero.
inline std::vector<PlaintextPoly> encode_input_vector(const std::vector<uint64_t>& x,
                                                      const MatVecPlan& plan, uint64_t p) {
  if (x.size() != plan.m) throw DimensionError("encode_input_vector: |x| != plan.m");
  std::vector<PlaintextPoly> chunks;
  chunks.reserve(plan.num_input_polys);
  for (size_t c = 0; c < plan.num_input_polys; ++c) {
    PlaintextPoly poly(plan.degree_n);
    for (size_t j = 0; j < plan.chunk_cols; ++j) {
      size_t idx = c * plan.chunk_cols + j;
      if (idx >= plan.m) break;
      if (x[idx] >= p)
        throw DomainError("encode_input_vector: value " + std::to_string(x[idx]) + " >= p");
      poly[j] = x[idx];
    }
    chunks.push_back(std::move(poly));
  }
  return chunks;
}

/// Row i of the k_o x k_c block lands at coefficients i*k_c + (k_c-1-j), so
/// the polynomial product accumulates the dot product of row i with the
/// chunk at the extraction index i*k_c + (k_c - 1).
inline PlaintextPoly encode_weight_block(const Matrix<uint64_t>& w_sub, const MatVecPlan& plan,
                                         uint64_t p) {
  if (w_sub.rows != plan.rows_per_poly || w_sub.cols != plan.chunk_cols)
    throw DimensionError("encode_weight_block: block shape does not match plan");
  PlaintextPoly poly(plan.degree_n);
  for (size_t i = 0; i < w_sub.rows; ++i) {
    for (size_t j = 0; j < w_sub.cols; ++j) {
      uint64_t v = w_sub(i, j);
      if (v >= p) throw DomainError("encode_weight_block: value >= p");
      poly[i * plan.chunk_cols + (plan.chunk_cols - 1 - j)] = v;
    }
  }
  return poly;
}

/// Read output i of the folded product polynomials at its extraction index.
inline std::vector<uint64_t> extract_output(const std::vector<PlaintextPoly>& result_polys,
                                            const MatVecPlan& plan) {
  if (result_polys.size() != plan.num_output_polys)
    throw DimensionError("extract_output: polynomial count does not match plan");
  std::vector<uint64_t> out(plan.n_eff, 0);
  for (size_t col = 0; col < plan.n_eff; ++col) {
    const PlaintextPoly& poly = result_polys[plan.poly_of_output(col)];
    out[col] = poly[plan.extraction_index(plan.row_of_output(col))];
  }
  return out;
}

/// Reference W*x mod p, independent of any polynomial arithmetic.
inline std::vector<uint64_t> matvec_oracle(const Matrix<uint64_t>& w,
                                           const std::vector<uint64_t>& x, uint64_t p) {
  if (w.cols != x.size()) throw DimensionError("matvec_oracle: shape mismatch");
  std::vector<uint64_t> y(w.rows, 0);
  for (size_t i = 0; i < w.rows; ++i) {
    uint64_t acc = 0;
    const uint64_t* row = w.row(i);
    for (size_t j = 0; j < x.size(); ++j) acc = (acc + row[j] * x[j]) % p;
    y[i] = acc;
  }
  return y;
}

/// The k_o x k_c sub-block of the full table for (output poly g, chunk c),
/// zero-padded at the ragged edges.
inline Matrix<uint64_t> weight_block(const Matrix<uint64_t>& table, const MatVecPlan& plan,
                                     size_t poly_idx, size_t chunk_idx) {
  Matrix<uint64_t> block(plan.rows_per_poly, plan.chunk_cols);
  for (size_t i = 0; i < plan.rows_per_poly; ++i) {
    size_t row = poly_idx * plan.rows_per_poly + i;
    if (row >= table.rows) break;
    for (size_t j = 0; j < plan.chunk_cols; ++j) {
      size_t col = chunk_idx * plan.chunk_cols + j;
      if (col >= table.cols) break;
      block(i, j) = table(row, col);
    }
  }
  return block;
}

}  // namespace fastquery::packing
