#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fastquery/errors.hpp"
#include "fastquery/matrix.hpp"
#include "fastquery/rng.hpp"

namespace fastquery::slots {

/// Placement of several signed low-bit values inside one plaintext
/// coefficient. Slot i stores b_i value bits plus one guard bit, so the
/// additive mask below can never carry into the next slot.
struct SlotLayout {
  std::vector<uint32_t> value_bits;   ///< b_i per slot
  std::vector<uint32_t> slot_widths;  ///< s_i = b_i + 1
  std::vector<uint32_t> offsets;      ///< o_i = sum of earlier widths
  uint32_t total_bits = 0;
  uint32_t p_bits = 0;

  size_t num_slots() const { return value_bits.size(); }

  int64_t min_value(size_t i) const { return -(int64_t{1} << (value_bits[i] - 1)); }
  int64_t max_value(size_t i) const { return (int64_t{1} << (value_bits[i] - 1)) - 1; }
  /// Offset added to make slot contents non-negative: 2^(b_i - 1).
  uint64_t bias(size_t i) const { return uint64_t{1} << (value_bits[i] - 1); }

  bool operator==(const SlotLayout&) const = default;
};

inline SlotLayout make_layout(const std::vector<uint32_t>& bit_combo, uint32_t p_bits) {
  if (bit_combo.empty()) throw LayoutError("make_layout: empty bit combination");
  SlotLayout layout;
  layout.p_bits = p_bits;
  uint32_t offset = 0;
  for (uint32_t b : bit_combo) {
    if (b < 2) throw LayoutError("make_layout: slot value bits must be >= 2");
    layout.value_bits.push_back(b);
    layout.slot_widths.push_back(b + 1);
    layout.offsets.push_back(offset);
    offset += b + 1;
  }
  layout.total_bits = offset;
  if (layout.total_bits > p_bits)
    throw LayoutError("make_layout: total slot width " + std::to_string(layout.total_bits) +
                      " exceeds p_bits = " + std::to_string(p_bits));
  return layout;
}

/// Offset-binary packing: u_i = v_i + 2^(b_i-1), coefficient = sum u_i * 2^o_i.
/// Every guard bit of the result is zero.
inline uint64_t pack_signed(const std::vector<int64_t>& values, const SlotLayout& layout) {
  if (values.size() != layout.num_slots())
    throw DimensionError("pack_signed: value count != slot count");
  uint64_t packed = 0;
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i] < layout.min_value(i) || values[i] > layout.max_value(i))
      throw RangeError("pack_signed: value " + std::to_string(values[i]) +
                       " outside slot " + std::to_string(i) + " range");
    uint64_t u = static_cast<uint64_t>(values[i] + static_cast<int64_t>(layout.bias(i)));
    packed |= u << layout.offsets[i];
  }
  return packed;
}

inline std::vector<int64_t> unpack_signed(uint64_t coeff, const SlotLayout& layout) {
  std::vector<int64_t> values(layout.num_slots());
  for (size_t i = 0; i < layout.num_slots(); ++i) {
    uint64_t slot = (coeff >> layout.offsets[i]) & ((uint64_t{1} << layout.slot_widths[i]) - 1);
    if (slot >> layout.value_bits[i])
      throw CorruptCoefficientError("unpack_signed: guard bit set in slot " + std::to_string(i));
    values[i] = static_cast<int64_t>(slot) - static_cast<int64_t>(layout.bias(i));
  }
  return values;
}

/// Slot-wise additive mask. Each r_i is uniform over the value bits only, so
/// fresh-packed + mask never carries across slot boundaries: the guard bit
/// absorbs the worst case (2^b - 1) + (2^b - 1) < 2^(b+1).
struct SlotMask {
  uint64_t packed = 0;
  std::vector<uint64_t> per_slot;
};

inline SlotMask sample_slot_mask(const SlotLayout& layout, Rng& rng) {
  SlotMask mask;
  mask.per_slot.resize(layout.num_slots());
  for (size_t i = 0; i < layout.num_slots(); ++i) {
    uint64_t r = rng.bits(layout.value_bits[i]);
    mask.per_slot[i] = r;
    mask.packed |= r << layout.offsets[i];
  }
  return mask;
}

/// Client-side share of slot i of a decrypted coefficient: the raw slot
/// bits (value bits plus guard), i.e. u_i + r_i when the coefficient was
/// masked.
inline std::vector<uint64_t> extract_client_shares(uint64_t decrypted_coeff,
                                                   const SlotLayout& layout) {
  std::vector<uint64_t> shares(layout.num_slots());
  for (size_t i = 0; i < layout.num_slots(); ++i)
    shares[i] =
        (decrypted_coeff >> layout.offsets[i]) & ((uint64_t{1} << layout.slot_widths[i]) - 1);
  return shares;
}

/// v = (c - r) - 2^(b-1); exact because masking never carries.
inline int64_t reconstruct(uint64_t client_share, uint64_t server_share, uint32_t value_bits) {
  int64_t v = static_cast<int64_t>(client_share) - static_cast<int64_t>(server_share) -
              (int64_t{1} << (value_bits - 1));
  int64_t lo = -(int64_t{1} << (value_bits - 1));
  int64_t hi = (int64_t{1} << (value_bits - 1)) - 1;
  if (v < lo || v > hi)
    throw ProtocolError("reconstruct: value " + std::to_string(v) + " outside " +
                        std::to_string(value_bits) + "-bit range");
  return v;
}

/// Pack a channel-major table whose rows are already permuted into
/// consecutive groups matching the layout. Row g of the result packs
/// channels g*S .. g*S+S-1 (missing channels at the bottom pad as zero
/// values), column by column.
inline Matrix<uint64_t> pack_table(const Matrix<int64_t>& w_q,
                                   const std::vector<uint32_t>& channel_bits,
                                   const SlotLayout& layout) {
  if (channel_bits.size() != w_q.rows)
    throw DimensionError("pack_table: channel_bits length != row count");
  size_t s = layout.num_slots();
  size_t n_eff = (w_q.rows + s - 1) / s;
  for (size_t ch = 0; ch < w_q.rows; ++ch) {
    if (channel_bits[ch] != layout.value_bits[ch % s])
      throw AssignmentError("pack_table: channel " + std::to_string(ch) + " has " +
                            std::to_string(channel_bits[ch]) + " bits where the layout expects " +
                            std::to_string(layout.value_bits[ch % s]));
  }
  Matrix<uint64_t> packed(n_eff, w_q.cols);
  std::vector<int64_t> group(s);
  for (size_t g = 0; g < n_eff; ++g) {
    for (size_t j = 0; j < w_q.cols; ++j) {
      for (size_t k = 0; k < s; ++k) {
        size_t ch = g * s + k;
        group[k] = (ch < w_q.rows) ? w_q(ch, j) : 0;
      }
      packed(g, j) = pack_signed(group, layout);
    }
  }
  return packed;
}

}  // namespace fastquery::slots
