#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fastquery/errors.hpp"
#include "fastquery/matrix.hpp"
#include "fastquery/quantizer.hpp"

namespace fastquery::finetune {

/// The descent left the basin: loss exceeded 10x its initial value.
struct DivergenceError : Error {
  using Error::Error;
};

struct FinetuneConfig {
  double learning_rate = 1e-3;
  size_t iterations = 500;
  double freq_threshold = 0.0;  ///< tau; <= 0 selects 10 * median(freqs)
  uint64_t seed = 0;
  quant::QuantConfig quant;
};

/// Clipped token-appearance weights: diagonal of I_token is min(f_t, tau).
struct TokenFrequency {
  std::vector<double> clipped;
  double tau = 0.0;
};

inline double default_threshold(std::vector<double> freqs) {
  if (freqs.empty()) return 1.0;
  std::sort(freqs.begin(), freqs.end());
  size_t mid = freqs.size() / 2;
  double median =
      (freqs.size() % 2) ? freqs[mid] : 0.5 * (freqs[mid - 1] + freqs[mid]);
  return 10.0 * median;
}

inline TokenFrequency build_freq_matrix(const std::vector<double>& freqs, double tau) {
  TokenFrequency tf;
  tf.tau = tau;
  tf.clipped.reserve(freqs.size());
  for (double f : freqs) {
    if (!(f >= 0.0)) throw DomainError("build_freq_matrix: negative or NaN frequency");
    tf.clipped.push_back(std::min(f, tau));
  }
  return tf;
}

namespace detail {

/// Quantize-dequantize every column (channel) of a token-major matrix in
/// place of Q(.), also reporting the straight-through mask: 1 where the
/// rounded code lies inside the clamp range, 0 where it clamps.
struct QdResult {
  Matrix<double> dequantized;
  Matrix<uint8_t> mask;
};

inline QdResult quantize_dequantize_columns(const Matrix<double>& w_cont,
                                            const std::vector<uint32_t>& channel_bits,
                                            bool pow2_scales) {
  if (channel_bits.size() != w_cont.cols)
    throw DimensionError("finetune: channel_bits length != channel count");
  QdResult r{Matrix<double>(w_cont.rows, w_cont.cols), Matrix<uint8_t>(w_cont.rows, w_cont.cols)};
  std::vector<double> col(w_cont.rows);
  std::vector<int64_t> codes(w_cont.rows);
  for (size_t c = 0; c < w_cont.cols; ++c) {
    for (size_t t = 0; t < w_cont.rows; ++t) col[t] = w_cont(t, c);
    double scale = 0.0;
    quant::detail::quantize_channel(col.data(), col.size(), channel_bits[c], pow2_scales,
                                    codes.data(), scale);
    int64_t lo = -(int64_t{1} << (channel_bits[c] - 1));
    int64_t hi = (int64_t{1} << (channel_bits[c] - 1)) - 1;
    for (size_t t = 0; t < w_cont.rows; ++t) {
      r.dequantized(t, c) = static_cast<double>(codes[t]) * scale;
      int64_t raw = std::llround(col[t] / scale);
      r.mask(t, c) = (raw >= lo && raw <= hi) ? 1 : 0;
    }
  }
  return r;
}

}  // namespace detail

/// The data-free objective || I (Q(W') W_qkv - W W_qkv) ||_F^2 over a
/// token-major table (rows = tokens, columns = channels). With
/// apply_quantizer = false, Q is the identity and the objective is the
/// smooth quadratic surrogate used by the gradient tests.
class Objective {
 public:
  Objective(const Matrix<double>& w, const Matrix<double>& w_qkv, const TokenFrequency& freq,
            std::vector<uint32_t> channel_bits, bool pow2_scales, bool apply_quantizer)
      : w_qkv_(w_qkv),
        channel_bits_(std::move(channel_bits)),
        pow2_scales_(pow2_scales),
        apply_quantizer_(apply_quantizer),
        freq_sq_(freq.clipped) {
    if (w.cols != w_qkv.rows) throw DimensionError("Objective: W and W_qkv shapes disagree");
    if (freq.clipped.size() != w.rows)
      throw DimensionError("Objective: frequency vector length != token count");
    if (channel_bits_.size() != w.cols)
      throw DimensionError("Objective: channel_bits length != channel count");
    for (double& f : freq_sq_) f = f * f;
    reference_ = matmul(w, w_qkv);
  }

  double loss(const Matrix<double>& w_cont) const {
    Matrix<double> d = residual(w_cont);
    double acc = 0.0;
    for (size_t t = 0; t < d.rows; ++t) {
      double row = 0.0;
      const double* dr = d.row(t);
      for (size_t j = 0; j < d.cols; ++j) row += dr[j] * dr[j];
      acc += freq_sq_[t] * row;
    }
    return acc;
  }

  /// 2 * mask .* (I^T I (Q(W')W_qkv - W W_qkv) W_qkv^T); mask is identity for
  /// the smooth surrogate.
  Matrix<double> gradient(const Matrix<double>& w_cont) const {
    Matrix<double> d = residual(w_cont);
    for (size_t t = 0; t < d.rows; ++t) {
      double f2 = freq_sq_[t];
      double* dr = d.row(t);
      for (size_t j = 0; j < d.cols; ++j) dr[j] *= f2;
    }
    Matrix<double> g = matmul(d, w_qkv_.transposed());
    for (double& v : g.data) v *= 2.0;
    if (apply_quantizer_) {
      auto qd = detail::quantize_dequantize_columns(w_cont, channel_bits_, pow2_scales_);
      for (size_t i = 0; i < g.data.size(); ++i)
        if (!qd.mask.data[i]) g.data[i] = 0.0;
    }
    return g;
  }

  const std::vector<uint32_t>& channel_bits() const { return channel_bits_; }
  bool pow2_scales() const { return pow2_scales_; }

 private:
  Matrix<double> residual(const Matrix<double>& w_cont) const {
    check_shapes_match(w_cont.rows, w_cont.cols, reference_.rows, w_qkv_.rows, "Objective");
    Matrix<double> proxy =
        apply_quantizer_
            ? detail::quantize_dequantize_columns(w_cont, channel_bits_, pow2_scales_).dequantized
            : w_cont;
    Matrix<double> d = matmul(proxy, w_qkv_);
    for (size_t i = 0; i < d.data.size(); ++i) d.data[i] -= reference_.data[i];
    return d;
  }

  Matrix<double> w_qkv_;
  std::vector<uint32_t> channel_bits_;
  bool pow2_scales_;
  bool apply_quantizer_;
  std::vector<double> freq_sq_;
  Matrix<double> reference_;
};

struct FinetuneResult {
  quant::QuantizedTable table;        ///< quantized proxy at the best observed loss
  std::vector<double> loss_history;   ///< L_0 followed by one entry per iteration
  double best_loss = 0.0;
  size_t best_iteration = 0;
};

/// Plain gradient descent with a straight-through estimator through the
/// quantizer. W is token-major (m x n); w_qkv is (n x 3d); freqs are raw
/// appearance counts. Deterministic for a fixed config.
inline FinetuneResult finetune(const Matrix<double>& w, const Matrix<double>& w_qkv,
                               const std::vector<double>& freqs, const FinetuneConfig& config) {
  if (config.learning_rate <= 0.0) throw ConfigError("finetune: learning_rate must be positive");
  double tau = config.freq_threshold > 0.0 ? config.freq_threshold : default_threshold(freqs);
  TokenFrequency tf = build_freq_matrix(freqs, tau);

  // Channel widths and the grouping permutation are fixed once, from the
  // reference table.
  Matrix<double> channel_major = w.transposed();
  quant::QuantizedTable initial = quant::quantize_table(channel_major, config.quant);

  Objective objective(w, w_qkv, tf, initial.channel_bits, config.quant.pow2_scales,
                      /*apply_quantizer=*/true);

  Matrix<double> w_cont = w;
  Matrix<double> best_w = w_cont;
  double initial_loss = objective.loss(w_cont);
  double best_loss = initial_loss;
  size_t best_iter = 0;
  std::vector<double> history{initial_loss};

  for (size_t it = 1; it <= config.iterations; ++it) {
    Matrix<double> g = objective.gradient(w_cont);
    for (size_t i = 0; i < w_cont.data.size(); ++i)
      w_cont.data[i] -= config.learning_rate * g.data[i];
    double l = objective.loss(w_cont);
    history.push_back(l);
    if (l < best_loss) {
      best_loss = l;
      best_iter = it;
      best_w = w_cont;
    }
    if (initial_loss > 0.0 && l > 10.0 * initial_loss)
      throw DivergenceError("finetune: diverged at iteration " + std::to_string(it) + " (loss " +
                            std::to_string(l) + " vs initial " + std::to_string(initial_loss) +
                            "); lower the learning rate");
  }

  quant::QuantizedTable best = quant::quantize_per_channel(
      best_w.transposed(), initial.channel_bits, config.quant.pow2_scales);
  best.permutation = initial.permutation;
  best.bit_combo = initial.bit_combo;
  return FinetuneResult{std::move(best), std::move(history), best_loss, best_iter};
}

}  // namespace fastquery::finetune
