#include <gtest/gtest.h>

#include <vector>

#include "fastquery/slot_packing.hpp"

using namespace fastquery;
using slots::SlotLayout;

namespace {

// All value tuples of a layout, counted through the cube of value ranges.
std::vector<std::vector<int64_t>> full_cube(const SlotLayout& layout) {
  size_t total = 1;
  for (uint32_t b : layout.value_bits) total <<= b;
  std::vector<std::vector<int64_t>> cube;
  cube.reserve(total);
  for (size_t idx = 0; idx < total; ++idx) {
    std::vector<int64_t> v(layout.num_slots());
    size_t rest = idx;
    for (size_t i = 0; i < layout.num_slots(); ++i) {
      uint64_t range = uint64_t{1} << layout.value_bits[i];
      v[i] = static_cast<int64_t>(rest % range) + layout.min_value(i);
      rest /= range;
    }
    cube.push_back(std::move(v));
  }
  return cube;
}

}  // namespace

TEST(MakeLayout, CanonicalThreeSlotLayout) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  EXPECT_EQ(layout.slot_widths, (std::vector<uint32_t>{5, 4, 4}));
  EXPECT_EQ(layout.offsets, (std::vector<uint32_t>{0, 5, 9}));
  EXPECT_EQ(layout.total_bits, 13u);
}

TEST(MakeLayout, WideFirstSlotLayout) {
  SlotLayout layout = slots::make_layout({6, 2, 2}, 13);
  EXPECT_EQ(layout.slot_widths, (std::vector<uint32_t>{7, 3, 3}));
  EXPECT_EQ(layout.total_bits, 13u);
}

TEST(MakeLayout, RejectsOverflowAndTinySlots) {
  EXPECT_THROW(slots::make_layout({8, 8}, 13), LayoutError);
  EXPECT_THROW(slots::make_layout({4, 3, 1}, 13), LayoutError);
  EXPECT_THROW(slots::make_layout({}, 13), LayoutError);
}

TEST(PackSigned, SpecValues) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  EXPECT_EQ(slots::pack_signed({-8, -4, -4}, layout), 0u);
  EXPECT_EQ(slots::pack_signed({0, 0, 0}, layout), 2184u);
  EXPECT_EQ(slots::pack_signed({3, -1, 2}, layout), 3179u);
}

TEST(PackSigned, GuardBitsAlwaysZero) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  for (const auto& v : full_cube(layout)) {
    uint64_t packed = slots::pack_signed(v, layout);
    for (size_t i = 0; i < layout.num_slots(); ++i)
      ASSERT_EQ((packed >> (layout.offsets[i] + layout.value_bits[i])) & 1, 0u);
  }
}

TEST(PackSigned, RejectsOutOfRange) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  EXPECT_THROW(slots::pack_signed({8, 0, 0}, layout), RangeError);
  EXPECT_THROW(slots::pack_signed({0, -5, 0}, layout), RangeError);
  EXPECT_THROW(slots::pack_signed({0, 0}, layout), DimensionError);
}

TEST(UnpackSigned, SpecValues) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  EXPECT_EQ(slots::unpack_signed(0, layout), (std::vector<int64_t>{-8, -4, -4}));
  EXPECT_EQ(slots::unpack_signed(3179, layout), (std::vector<int64_t>{3, -1, 2}));
}

TEST(UnpackSigned, DetectsGuardViolation) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  EXPECT_THROW(slots::unpack_signed(uint64_t{1} << 4, layout), CorruptCoefficientError);
}

TEST(Bijection, ExhaustiveOnAllShippedLayouts) {
  for (auto combo : {std::vector<uint32_t>{4, 3, 3}, {5, 3, 2}, {6, 2, 2}}) {
    SlotLayout layout = slots::make_layout(combo, 13);
    size_t count = 0;
    for (const auto& v : full_cube(layout)) {
      ASSERT_EQ(slots::unpack_signed(slots::pack_signed(v, layout), layout), v);
      ++count;
    }
    EXPECT_EQ(count, 1024u);  // 2^10 value tuples for every shipped combo
  }
}

TEST(SlotMask, NoCarryExhaustive) {
  // Every (fresh value, mask) pair for (4,3,3): the masked coefficient's slot
  // i bits must equal u_i + r_i with no cross-slot interference. 2^10 * 2^10
  // pairs.
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  auto cube = full_cube(layout);
  std::vector<uint64_t> packed_values;
  packed_values.reserve(cube.size());
  for (const auto& v : cube) packed_values.push_back(slots::pack_signed(v, layout));
  uint64_t p_mask = (uint64_t{1} << layout.p_bits) - 1;
  for (uint64_t r0 = 0; r0 < 16; ++r0) {
    for (uint64_t r1 = 0; r1 < 8; ++r1) {
      for (uint64_t r2 = 0; r2 < 8; ++r2) {
        uint64_t mask = r0 | (r1 << 5) | (r2 << 9);
        const uint64_t rs[3] = {r0, r1, r2};
        for (uint64_t packed : packed_values) {
          uint64_t sum = (packed + mask) & p_mask;
          auto shares = slots::extract_client_shares(sum, layout);
          for (size_t i = 0; i < 3; ++i) {
            uint64_t u = (packed >> layout.offsets[i]) &
                         ((uint64_t{1} << layout.slot_widths[i]) - 1);
            ASSERT_EQ(shares[i], u + rs[i]);
          }
        }
      }
    }
  }
}

TEST(SlotMask, MaxValuePlusMaxMaskStaysInSlot) {
  for (auto combo : {std::vector<uint32_t>{4, 3, 3}, {5, 3, 2}, {6, 2, 2}}) {
    SlotLayout layout = slots::make_layout(combo, 13);
    for (size_t i = 0; i < layout.num_slots(); ++i) {
      uint64_t max_u = (uint64_t{1} << layout.value_bits[i]) - 1;
      EXPECT_LT(max_u + max_u, uint64_t{1} << layout.slot_widths[i]);
    }
  }
}

TEST(SlotMask, GoldenSequenceAndRanges) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  Rng rng(42);
  auto m0 = slots::sample_slot_mask(layout, rng);
  EXPECT_EQ(m0.packed, 3244u);
  EXPECT_EQ(m0.per_slot, (std::vector<uint64_t>{12, 5, 6}));
  auto m1 = slots::sample_slot_mask(layout, rng);
  EXPECT_EQ(m1.packed, 226u);
  auto m2 = slots::sample_slot_mask(layout, rng);
  EXPECT_EQ(m2.packed, 1097u);

  Rng rng2(1);
  for (int t = 0; t < 100000 / 3; ++t) {
    auto m = slots::sample_slot_mask(layout, rng2);
    for (size_t i = 0; i < 3; ++i)
      ASSERT_LT(m.per_slot[i], uint64_t{1} << layout.value_bits[i]);
    uint64_t repacked = 0;
    for (size_t i = 0; i < 3; ++i) repacked |= m.per_slot[i] << layout.offsets[i];
    ASSERT_EQ(m.packed, repacked);
  }
}

TEST(ExtractShares, UnmaskedValueReturnsOffsetBinary) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  uint64_t packed = slots::pack_signed({3, -1, 2}, layout);
  auto shares = slots::extract_client_shares(packed, layout);
  EXPECT_EQ(shares, (std::vector<uint64_t>{11, 3, 6}));
}

TEST(ExtractShares, SlotReassemblyIsBijective) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  Rng rng(3);
  for (int t = 0; t < 2000; ++t) {
    uint64_t coeff = rng.bits(layout.p_bits);
    auto shares = slots::extract_client_shares(coeff, layout);
    uint64_t back = 0;
    for (size_t i = 0; i < layout.num_slots(); ++i) back |= shares[i] << layout.offsets[i];
    ASSERT_EQ(back, coeff);
  }
}

TEST(Reconstruct, ExhaustiveOverValueMaskPairs) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  for (size_t i = 0; i < layout.num_slots(); ++i) {
    uint32_t b = layout.value_bits[i];
    for (int64_t v = layout.min_value(i); v <= layout.max_value(i); ++v) {
      for (uint64_t r = 0; r < (uint64_t{1} << b); ++r) {
        uint64_t u = static_cast<uint64_t>(v + static_cast<int64_t>(layout.bias(i)));
        ASSERT_EQ(slots::reconstruct(u + r, r, b), v);
      }
    }
  }
}

TEST(Reconstruct, ClientShareEqualToMaskGivesMinimum) {
  EXPECT_EQ(slots::reconstruct(5, 5, 4), -8);
}

TEST(Reconstruct, RejectsOutOfRangeResult) {
  // c - r = 17 cannot be a 4-bit offset value (max u = 15).
  EXPECT_THROW(slots::reconstruct(17, 0, 4), ProtocolError);
}

TEST(OneHotNecessity, SummingTwoPackedCoefficientsTripsGuardBits) {
  // The protocol requires one-hot queries: adding the packed entries of two
  // columns can set a guard bit, which unpack rejects.
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  uint64_t a = slots::pack_signed({0, 0, 0}, layout);  // u = (8, 4, 4)
  uint64_t b = slots::pack_signed({0, 0, 0}, layout);
  uint64_t sum = (a + b) & ((uint64_t{1} << layout.p_bits) - 1);
  EXPECT_THROW(slots::unpack_signed(sum, layout), CorruptCoefficientError);
}

TEST(PackTable, EffectiveRowCountAndOffsets) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  size_t n = 4096;
  Matrix<int64_t> w(n, 4);
  std::vector<uint32_t> bits(n);
  for (size_t ch = 0; ch < n; ++ch) bits[ch] = layout.value_bits[ch % 3];
  Matrix<uint64_t> packed = slots::pack_table(w, bits, layout);
  EXPECT_EQ(packed.rows, 1366u);
  for (uint64_t v : packed.data) EXPECT_EQ(v, 2184u);  // zero table packs to offset constants
}

TEST(PackTable, MatchesPackSignedRowWise) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  Matrix<int64_t> w(3, 4);
  std::vector<int64_t> ch0{3, -8, 7, 0}, ch1{-4, 3, 0, 1}, ch2{2, 2, -1, -4};
  for (size_t j = 0; j < 4; ++j) {
    w(0, j) = ch0[j];
    w(1, j) = ch1[j];
    w(2, j) = ch2[j];
  }
  auto packed = slots::pack_table(w, {4, 3, 3}, layout);
  ASSERT_EQ(packed.rows, 1u);
  for (size_t j = 0; j < 4; ++j)
    EXPECT_EQ(packed(0, j), slots::pack_signed({ch0[j], ch1[j], ch2[j]}, layout));
}

TEST(PackTable, PartialFinalGroupPadsWithZeros) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  Matrix<int64_t> w(4, 2);
  w(3, 0) = 5;
  auto packed = slots::pack_table(w, {4, 3, 3, 4}, layout);
  ASSERT_EQ(packed.rows, 2u);
  EXPECT_EQ(packed(1, 0), slots::pack_signed({5, 0, 0}, layout));
  EXPECT_EQ(packed(1, 1), slots::pack_signed({0, 0, 0}, layout));
}

TEST(PackTable, RejectsBitPatternMismatch) {
  SlotLayout layout = slots::make_layout({4, 3, 3}, 13);
  Matrix<int64_t> w(3, 2);
  EXPECT_THROW(slots::pack_table(w, {3, 4, 3}, layout), AssignmentError);
}
