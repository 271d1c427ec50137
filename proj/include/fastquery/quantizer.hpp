#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fastquery/errors.hpp"
#include "fastquery/matrix.hpp"
#include "fastquery/rng.hpp"

namespace fastquery::quant {

enum class Granularity { PerTensor, PerChannel };

enum class Criterion { AbsoluteValue, Random, Gradient, Hessian, GradientTimesAbsValue };

inline const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::AbsoluteValue: return "absolute_value";
    case Criterion::Random: return "random";
    case Criterion::Gradient: return "gradient";
    case Criterion::Hessian: return "hessian";
    case Criterion::GradientTimesAbsValue: return "gradient_times_absvalue";
  }
  return "?";
}

inline Criterion criterion_from_name(const std::string& name) {
  if (name == "absolute_value") return Criterion::AbsoluteValue;
  if (name == "random") return Criterion::Random;
  if (name == "gradient") return Criterion::Gradient;
  if (name == "hessian") return Criterion::Hessian;
  if (name == "gradient_times_absvalue") return Criterion::GradientTimesAbsValue;
  throw ConfigError("unknown saliency criterion: " + name);
}

struct QuantConfig {
  Granularity granularity = Granularity::PerChannel;
  std::vector<uint32_t> bit_combo = {4, 3, 3};
  Criterion criterion = Criterion::AbsoluteValue;
  bool pow2_scales = true;
  uint64_t seed = 0;
};

/// Externally supplied per-channel statistics for the criteria that need
/// them. Gradients and Hessian diagonals come from files (or synthetic
/// generators in tests); this artifact has no autodiff stack.
struct ChannelStats {
  std::vector<double> mean_abs;
  std::optional<std::vector<double>> gradient;
  std::optional<std::vector<double>> hessian;
};

/// Per-channel mixed-precision integer table. `values` and `channel_bits`
/// are kept in the original channel order; `permutation` maps grouped
/// position k to the original channel permutation[k].
struct QuantizedTable {
  Matrix<int64_t> values;
  std::vector<uint32_t> channel_bits;
  std::vector<double> scales;
  std::vector<size_t> permutation;
  std::vector<uint32_t> bit_combo;
};

inline std::vector<double> channel_mean_abs(const Matrix<double>& w) {
  std::vector<double> out(w.rows, 0.0);
  for (size_t i = 0; i < w.rows; ++i) {
    double acc = 0.0;
    const double* row = w.row(i);
    for (size_t j = 0; j < w.cols; ++j) acc += std::fabs(row[j]);
    out[i] = w.cols ? acc / static_cast<double>(w.cols) : 0.0;
  }
  return out;
}

inline std::vector<double> channel_saliency(const Matrix<double>& w, Criterion criterion,
                                            const ChannelStats& aux, uint64_t seed) {
  size_t n = w.rows;
  auto need = [&](const std::optional<std::vector<double>>& v,
                  const char* what) -> const std::vector<double>& {
    if (!v) throw ConfigError(std::string("channel_saliency: criterion requires ") + what);
    if (v->size() != n)
      throw DimensionError(std::string("channel_saliency: ") + what + " length != channel count");
    return *v;
  };
  std::vector<double> scores(n, 0.0);
  switch (criterion) {
    case Criterion::AbsoluteValue:
      scores = channel_mean_abs(w);
      break;
    case Criterion::Random: {
      Rng rng = Rng(seed).fork(0x53414c49454e4359ULL);  // "SALIENCY"
      for (size_t i = 0; i < n; ++i) scores[i] = rng.unit_double();
      break;
    }
    case Criterion::Gradient: {
      const auto& g = need(aux.gradient, "gradient statistics");
      for (size_t i = 0; i < n; ++i) scores[i] = std::fabs(g[i]);
      break;
    }
    case Criterion::Hessian: {
      const auto& h = need(aux.hessian, "Hessian statistics");
      for (size_t i = 0; i < n; ++i) scores[i] = std::fabs(h[i]);
      break;
    }
    case Criterion::GradientTimesAbsValue: {
      const auto& g = need(aux.gradient, "gradient statistics");
      auto mabs = channel_mean_abs(w);
      for (size_t i = 0; i < n; ++i) scores[i] = std::fabs(g[i]) * mabs[i];
      break;
    }
  }
  for (double s : scores)
    if (!std::isfinite(s)) throw DomainError("channel_saliency: non-finite score");
  return scores;
}

inline void check_bit_combo(const std::vector<uint32_t>& combo) {
  if (combo.size() != 3) throw ConfigError("bit_combo presets have exactly 3 entries");
  if (!(combo[0] >= combo[1] && combo[1] >= combo[2]))
    throw ConfigError("bit_combo must be non-increasing");
}

/// Rank channels by score (ties to the lower index) and hand the top
/// ceil(n/3) the widest width; the rest take the lower widths in score
/// order. Counts per combo position k are ceil((n-k)/3), so the final
/// partial group is a prefix of the combo.
inline std::vector<uint32_t> assign_bitwidths(const std::vector<double>& scores,
                                              const std::vector<uint32_t>& bit_combo, size_t n) {
  check_bit_combo(bit_combo);
  if (scores.size() != n) throw DimensionError("assign_bitwidths: score count != n");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<uint32_t> bits(n, 0);
  size_t rank = 0;
  for (size_t k = 0; k < bit_combo.size(); ++k) {
    size_t count = (n > k) ? (n - k + 2) / 3 : 0;
    for (size_t c = 0; c < count && rank < n; ++c, ++rank) bits[order[rank]] = bit_combo[k];
  }
  return bits;
}

/// Stable regrouping permutation: position k takes the next unused channel
/// of width bit_combo[k mod 3], preserving original order inside each width
/// class.
inline std::vector<size_t> build_permutation(const std::vector<uint32_t>& channel_bits,
                                             const std::vector<uint32_t>& bit_combo) {
  check_bit_combo(bit_combo);
  size_t n = channel_bits.size();
  std::map<uint32_t, std::deque<size_t>> pools;
  for (size_t i = 0; i < n; ++i) pools[channel_bits[i]].push_back(i);
  std::vector<size_t> pi;
  pi.reserve(n);
  size_t groups = (n + bit_combo.size() - 1) / bit_combo.size();
  for (size_t g = 0; g < groups; ++g) {
    for (uint32_t width : bit_combo) {
      auto it = pools.find(width);
      if (it == pools.end() || it->second.empty()) continue;
      pi.push_back(it->second.front());
      it->second.pop_front();
    }
  }
  if (pi.size() != n)
    throw AssignmentError("build_permutation: channel widths do not fit the bit combination");
  for (size_t j = 0; j < n; ++j)
    if (channel_bits[pi[j]] != bit_combo[j % bit_combo.size()])
      throw AssignmentError("build_permutation: width counts cannot form complete groups");
  return pi;
}

inline std::vector<size_t> invert_permutation(const std::vector<size_t>& pi) {
  std::vector<size_t> inv(pi.size());
  for (size_t k = 0; k < pi.size(); ++k) inv[pi[k]] = k;
  return inv;
}

template <typename T>
Matrix<T> permute_rows(const Matrix<T>& m, const std::vector<size_t>& pi) {
  if (pi.size() != m.rows) throw DimensionError("permute_rows: permutation length != row count");
  Matrix<T> out(m.rows, m.cols);
  for (size_t k = 0; k < pi.size(); ++k)
    std::copy(m.row(pi[k]), m.row(pi[k]) + m.cols, out.row(k));
  return out;
}

namespace detail {

inline double round_scale_pow2(double raw) {
  return std::exp2(std::floor(std::log2(raw) + 0.5));
}

inline void quantize_channel(const double* src, size_t len, uint32_t bits, bool pow2,
                             int64_t* dst, double& scale_out) {
  double max_abs = 0.0;
  for (size_t j = 0; j < len; ++j) {
    if (!std::isfinite(src[j])) throw DomainError("quantize: non-finite table entry");
    max_abs = std::max(max_abs, std::fabs(src[j]));
  }
  int64_t lo = -(int64_t{1} << (bits - 1));
  int64_t hi = (int64_t{1} << (bits - 1)) - 1;
  double scale;
  if (max_abs == 0.0) {
    scale = 1.0;
  } else {
    double raw = max_abs / static_cast<double>(hi);
    scale = pow2 ? round_scale_pow2(raw) : raw;
  }
  for (size_t j = 0; j < len; ++j) {
    int64_t code = std::llround(src[j] / scale);
    dst[j] = std::clamp(code, lo, hi);
  }
  scale_out = scale;
}

}  // namespace detail

/// Symmetric uniform quantizer, one scale per channel (row). Scales are
/// rounded to the nearest power of two (half-up in the log domain) when
/// pow2_scales is set. A zero channel gets scale 1.
inline QuantizedTable quantize_per_channel(const Matrix<double>& w,
                                           const std::vector<uint32_t>& channel_bits,
                                           bool pow2_scales) {
  if (channel_bits.size() != w.rows)
    throw DimensionError("quantize_per_channel: channel_bits length != row count");
  QuantizedTable q;
  q.values = Matrix<int64_t>(w.rows, w.cols);
  q.channel_bits = channel_bits;
  q.scales.resize(w.rows);
  q.permutation.resize(w.rows);
  std::iota(q.permutation.begin(), q.permutation.end(), 0);
  for (size_t i = 0; i < w.rows; ++i)
    detail::quantize_channel(w.row(i), w.cols, channel_bits[i], pow2_scales, q.values.row(i),
                             q.scales[i]);
  return q;
}

/// RTN baseline: one scale for the whole tensor.
inline QuantizedTable quantize_per_tensor(const Matrix<double>& w, uint32_t bits,
                                          bool pow2_scales = true) {
  QuantizedTable q;
  q.values = Matrix<int64_t>(w.rows, w.cols);
  q.channel_bits.assign(w.rows, bits);
  q.scales.resize(w.rows);
  q.permutation.resize(w.rows);
  std::iota(q.permutation.begin(), q.permutation.end(), 0);
  double max_abs = 0.0;
  for (double v : w.data) {
    if (!std::isfinite(v)) throw DomainError("quantize_per_tensor: non-finite table entry");
    max_abs = std::max(max_abs, std::fabs(v));
  }
  int64_t lo = -(int64_t{1} << (bits - 1));
  int64_t hi = (int64_t{1} << (bits - 1)) - 1;
  double scale = 1.0;
  if (max_abs > 0.0) {
    double raw = max_abs / static_cast<double>(hi);
    scale = pow2_scales ? detail::round_scale_pow2(raw) : raw;
  }
  for (size_t i = 0; i < w.rows; ++i) {
    q.scales[i] = scale;
    for (size_t j = 0; j < w.cols; ++j)
      q.values(i, j) = std::clamp<int64_t>(std::llround(w(i, j) / scale), lo, hi);
  }
  return q;
}

/// values * scale, rows in original channel order; set `permuted` to get the
/// grouped order instead.
inline Matrix<double> dequantize(const QuantizedTable& q, bool permuted = false) {
  Matrix<double> out(q.values.rows, q.values.cols);
  for (size_t k = 0; k < q.values.rows; ++k) {
    size_t src = permuted ? q.permutation[k] : k;
    double s = q.scales[src];
    for (size_t j = 0; j < q.values.cols; ++j)
      out(k, j) = static_cast<double>(q.values(src, j)) * s;
  }
  return out;
}

/// Mean squared reconstruction error, optionally weighted per token
/// (column). Weighted form: sum_j w_j * sum_i d_ij^2 / (rows * sum_j w_j).
inline double reconstruction_error(const Matrix<double>& w, const QuantizedTable& q,
                                   const std::vector<double>* token_weights = nullptr) {
  check_shapes_match(w.rows, w.cols, q.values.rows, q.values.cols, "reconstruction_error");
  if (token_weights && token_weights->size() != w.cols)
    throw DimensionError("reconstruction_error: weight length != column count");
  double acc = 0.0;
  double weight_sum = 0.0;
  for (size_t j = 0; j < w.cols; ++j) {
    double wj = token_weights ? (*token_weights)[j] : 1.0;
    weight_sum += wj;
    if (wj == 0.0) continue;
    double col = 0.0;
    for (size_t i = 0; i < w.rows; ++i) {
      double d = w(i, j) - static_cast<double>(q.values(i, j)) * q.scales[i];
      col += d * d;
    }
    acc += wj * col;
  }
  if (weight_sum == 0.0) return 0.0;
  return acc / (static_cast<double>(w.rows) * weight_sum);
}

/// Full communication-aware pipeline: saliency, width assignment, grouping
/// permutation, then per-channel quantization.
inline QuantizedTable quantize_table(const Matrix<double>& w, const QuantConfig& config,
                                     const ChannelStats& aux = {}) {
  if (config.granularity == Granularity::PerTensor)
    throw ConfigError("quantize_table drives the per-channel pipeline; call quantize_per_tensor");
  auto scores = channel_saliency(w, config.criterion, aux, config.seed);
  auto bits = assign_bitwidths(scores, config.bit_combo, w.rows);
  auto pi = build_permutation(bits, config.bit_combo);
  QuantizedTable q = quantize_per_channel(w, bits, config.pow2_scales);
  q.permutation = pi;
  q.bit_combo = config.bit_combo;
  return q;
}

}  // namespace fastquery::quant
