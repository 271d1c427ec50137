#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fastquery/matrix.hpp"
#include "fastquery/rng.hpp"

namespace fastquery::synth {

/// Channel-major table whose per-channel magnitudes follow a log-normal
/// spread, mimicking the heavy channel-to-channel variation of real
/// embedding tables.
inline Matrix<double> gaussian_lognormal_channels(size_t n, size_t m, Rng& rng,
                                                  double log_sigma = 1.5) {
  Matrix<double> w(n, m);
  for (size_t ch = 0; ch < n; ++ch) {
    double scale = std::exp(log_sigma * rng.normal());
    double* row = w.row(ch);
    for (size_t j = 0; j < m; ++j) row[j] = scale * rng.normal();
  }
  return w;
}

inline Matrix<double> gaussian_matrix(size_t rows, size_t cols, Rng& rng, double stddev = 1.0) {
  Matrix<double> w(rows, cols);
  for (double& v : w.data) v = stddev * rng.normal();
  return w;
}

/// Zipf-shaped appearance counts: count_t = floor(c0 / (t+1)^exponent).
inline std::vector<double> zipf_counts(size_t m, double exponent = 1.0, double c0 = 1e6) {
  std::vector<double> counts(m);
  for (size_t t = 0; t < m; ++t)
    counts[t] = std::floor(c0 / std::pow(static_cast<double>(t + 1), exponent));
  return counts;
}

}  // namespace fastquery::synth
