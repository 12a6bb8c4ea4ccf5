/*
 * Copyright 2026 The VoltraSim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <random>

#include "oracle.hpp"
#include "voltrasim/postproc.hpp"
#include "voltrasim/streamer.hpp"

using namespace voltrasim;

namespace {

QuantParams random_quant(std::mt19937_64& rng) {
  QuantParams q;
  q.multiplier = static_cast<std::int32_t>(oracle::pick(rng, -(1 << 20), 1 << 20));
  q.shift = static_cast<int>(oracle::pick(rng, 0, 31));
  q.zero_point = static_cast<std::int8_t>(oracle::pick(rng, -128, 127));
  q.relu = oracle::pick(rng, 0, 1);
  return q;
}

std::int32_t random_acc(std::mt19937_64& rng) {
  return static_cast<std::int32_t>(oracle::pick(rng, std::numeric_limits<std::int32_t>::min(), std::numeric_limits<std::int32_t>::max()));
}

}  // namespace

TEST(Quantize, Examples) {
  EXPECT_EQ(quantize(1000, {3, 5, 0, false}), 94);
  EXPECT_EQ(quantize(-1000, {3, 5, 0, true}), 0);
  EXPECT_EQ(quantize(1 << 20, {1, 0, 0, false}), 127);
  EXPECT_EQ(quantize(-(1 << 20), {1, 0, 0, false}), -128);
  EXPECT_EQ(quantize(16, {1, 5, 0, false}), 1);   // 0.5 rounds up
  EXPECT_EQ(quantize(-16, {1, 5, 0, false}), 0);  // -0.5 rounds up too
  EXPECT_EQ(quantize(10, {1, 0, -7, false}), 3);
}

TEST(Quantize, MatchesOracle) {
  std::mt19937_64 rng(71);
  for (int t = 0; t < 1000; ++t) {
    const auto q = random_quant(rng);
    const auto acc = random_acc(rng);
    ASSERT_EQ(quantize(acc, q), oracle::quant(acc, q.multiplier, q.shift, q.zero_point, q.relu))
        << acc << " * " << q.multiplier << " >> " << q.shift;
  }
}

TEST(Quantize, MonotoneForNonNegativeMultiplier) {
  std::mt19937_64 rng(73);
  for (int t = 0; t < 1000; ++t) {
    auto q = random_quant(rng);
    q.multiplier = std::abs(q.multiplier);
    auto a = random_acc(rng), b = random_acc(rng);
    if (a > b) std::swap(a, b);
    ASSERT_LE(quantize(a, q), quantize(b, q));
  }
}

TEST(Simd, LaneCountChangesTimingOnly) {
  std::mt19937_64 rng(79);
  SimdUnit s8(8), s64(64);
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::int32_t> blk(64);
    for (auto& v : blk) v = random_acc(rng);
    const auto q = random_quant(rng);
    const auto a = s8.drain_block(blk, q), b = s64.drain_block(blk, q);
    ASSERT_EQ(a.out, b.out);
    ASSERT_EQ(a.cycles, 8);
    ASSERT_EQ(b.cycles, 1);
    for (std::size_t i = 0; i < 64; ++i) ASSERT_EQ(a.out[i], oracle::quant(blk[i], q.multiplier, q.shift, q.zero_point, q.relu));
  }
}

TEST(Simd, RejectsBadInput) {
  EXPECT_THROW(SimdUnit(16), ConfigError);
  std::vector<std::int32_t> short_block(63);
  EXPECT_THROW(SimdUnit().drain_block(short_block, {}), ShapeError);
}

TEST(MaxPool, FourByFourWindowTwo) {
  MaxPoolShape s{4, 4, 1, 2, 2};
  std::vector<std::int8_t> f(16);
  for (int i = 0; i < 16; ++i) f[static_cast<std::size_t>(i)] = static_cast<std::int8_t>(i);
  auto r = maxpool(f, s);
  EXPECT_EQ(r.out, (std::vector<std::int8_t>{5, 7, 13, 15}));
  EXPECT_EQ(r.comparisons, 12);
  EXPECT_EQ(r.cycles, 2);
}

TEST(MaxPool, UnitWindowIsIdentity) {
  std::mt19937_64 rng(83);
  auto f = oracle::random_bytes(rng, 5 * 3 * 4);
  auto r = maxpool(f, {5, 3, 4, 1, 1});
  EXPECT_EQ(r.out, f);
  EXPECT_EQ(r.comparisons, 0);
  EXPECT_EQ(r.cycles, 0);
}

TEST(MaxPool, MatchesOracle) {
  std::mt19937_64 rng(89);
  int done = 0;
  while (done < 1000) {
    MaxPoolShape s{oracle::pick(rng, 1, 12), oracle::pick(rng, 1, 12), oracle::pick(rng, 1, 10), oracle::pick(rng, 1, 4),
                   oracle::pick(rng, 1, 3)};
    if (!s.integral()) continue;
    ++done;
    auto f = oracle::random_bytes(rng, static_cast<std::size_t>(s.h * s.w * s.c));
    const std::int64_t oh = (s.h - s.window) / s.stride + 1, ow = (s.w - s.window) / s.stride + 1;
    std::vector<std::int8_t> want;
    std::int64_t cmp = 0;
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t x = 0; x < ow; ++x)
        for (std::int64_t c = 0; c < s.c; ++c) {
          std::vector<std::int8_t> win;
          for (std::int64_t dy = 0; dy < s.window; ++dy)
            for (std::int64_t dx = 0; dx < s.window; ++dx)
              win.push_back(f[static_cast<std::size_t>(((y * s.stride + dy) * s.w + x * s.stride + dx) * s.c + c)]);
          want.push_back(*std::max_element(win.begin(), win.end()));
          cmp += static_cast<std::int64_t>(win.size()) - 1;
        }
    auto r = maxpool(f, s);
    ASSERT_EQ(r.out, want);
    ASSERT_EQ(r.comparisons, cmp);
    ASSERT_EQ(r.cycles, (cmp + 7) / 8);
  }
}

TEST(MaxPool, RejectsBadShapes) {
  std::vector<std::int8_t> f(25);
  EXPECT_THROW(maxpool(f, {5, 5, 1, 2, 2}), ShapeError);
  EXPECT_THROW(maxpool(f, {4, 4, 1, 2, 2}), ShapeError);
}

TEST(Reshuffle, BlockedRowMajorExample) {
  std::vector<std::int8_t> m(256);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) m[static_cast<std::size_t>(r * 16 + c)] = static_cast<std::int8_t>(c);
  auto b = to_blocked_row_major(m, 16, 16);
  EXPECT_EQ(b[64], 8);   // block (0,1) starts at column 8
  EXPECT_EQ(b[64 + 9], 9);
  EXPECT_EQ(b[128], 0);  // block (1,0)
}

TEST(Reshuffle, C8hwc8Example) {
  // 1x2 map, 16 channels, value = 16 * pixel + channel.
  std::vector<std::int8_t> m(32);
  for (int i = 0; i < 32; ++i) m[static_cast<std::size_t>(i)] = static_cast<std::int8_t>(i);
  auto words = pack_words(to_c8hwc8(m, 1, 2, 16));
  ASSERT_EQ(words.size(), 4u);
  // word index (cb * h + y) * w + x; (cb=1, y=0, x=1) is word 3
  for (int i = 0; i < 8; ++i) EXPECT_EQ(byte_of(words[3], i), 24 + i);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(byte_of(words[0], i), i);
}

TEST(Reshuffle, BlockedRoundTrip) {
  std::mt19937_64 rng(97);
  for (int t = 0; t < 1000; ++t) {
    const auto m = 8 * oracle::pick(rng, 1, 8), k = 8 * oracle::pick(rng, 1, 8);
    auto a = oracle::random_bytes(rng, static_cast<std::size_t>(m * k));
    auto b = to_blocked_row_major(a, m, k);
    ASSERT_EQ(from_blocked_row_major(b, m, k), a);
    // Element (i, j) lands in block (i/8, j/8) at row i%8, column j%8.
    const auto i = oracle::pick(rng, 0, m - 1), j = oracle::pick(rng, 0, k - 1);
    ASSERT_EQ(b[static_cast<std::size_t>(((i / 8) * (k / 8) + j / 8) * 64 + (i % 8) * 8 + j % 8)], a[static_cast<std::size_t>(i * k + j)]);
  }
}

TEST(Reshuffle, C8hwc8RoundTrip) {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 1000; ++t) {
    const auto h = oracle::pick(rng, 1, 9), w = oracle::pick(rng, 1, 9), c = 8 * oracle::pick(rng, 1, 4);
    auto a = oracle::random_bytes(rng, static_cast<std::size_t>(h * w * c));
    auto b = to_c8hwc8(a, h, w, c);
    ASSERT_EQ(from_c8hwc8(b, h, w, c), a);
    auto sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    ASSERT_EQ(sa, sb);
  }
}

TEST(Reshuffle, RejectsUnpaddedShapes) {
  std::vector<std::int8_t> v(12 * 8);
  EXPECT_THROW(to_blocked_row_major(v, 12, 8), ShapeError);
  EXPECT_THROW(to_c8hwc8(v, 2, 4, 12), ShapeError);
  EXPECT_EQ(reshuffle_cycles(65), 9);
}

TEST(Words, PackUnpackLittleEndian) {
  std::mt19937_64 rng(103);
  for (int t = 0; t < 1000; ++t) {
    auto bytes = oracle::random_bytes(rng, static_cast<std::size_t>(8 * oracle::pick(rng, 0, 16)));
    auto w = pack_words(bytes);
    ASSERT_EQ(unpack_words(w), bytes);
    for (std::size_t i = 0; i < bytes.size(); ++i)
      ASSERT_EQ(static_cast<std::uint8_t>(w[i / 8] >> (8 * (i % 8))), static_cast<std::uint8_t>(bytes[i]));
  }
}
