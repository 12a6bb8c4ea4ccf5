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

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "voltrasim/common.hpp"
#include "voltrasim/quant.hpp"
#include "voltrasim/workload.hpp"

namespace voltrasim {

struct DrainResult {
  std::vector<std::int8_t> out;
  std::int64_t cycles = 0;
};

// Quantization SIMD: `lanes` PEs walk the 64 accumulators of one output
// block, lanes results per cycle.
class SimdUnit {
 public:
  explicit SimdUnit(std::int64_t lanes = 8) : lanes_(lanes) {
    if (lanes != 8 && lanes != 64) throw ConfigError("simd: lanes must be 8 or 64");
  }
  std::int64_t lanes() const { return lanes_; }
  std::int64_t cycles_per_block() const { return 64 / lanes_; }

  DrainResult drain_block(std::span<const std::int32_t> block, const QuantParams& p) const {
    if (block.size() != 64) throw ShapeError("simd: block must hold 64 results");
    DrainResult r;
    r.out.resize(64);
    for (std::int64_t c = 0; c < cycles_per_block(); ++c)
      for (std::int64_t l = 0; l < lanes_; ++l) {
        const auto i = static_cast<std::size_t>(c * lanes_ + l);
        r.out[i] = quantize(block[i], p);
      }
    r.cycles = cycles_per_block();
    return r;
  }

 private:
  std::int64_t lanes_;
};

inline constexpr std::int64_t kMaxPoolLanes = 8;

struct MaxPoolResult {
  std::vector<std::int8_t> out;  // HWC
  std::int64_t comparisons = 0;
  std::int64_t cycles = 0;
};

inline std::int64_t maxpool_comparisons(const MaxPoolShape& s) {
  return s.oh() * s.ow() * s.c * (s.window * s.window - 1);
}
inline std::int64_t maxpool_cycles(const MaxPoolShape& s) { return ceil_div(maxpool_comparisons(s), kMaxPoolLanes); }

// Window maxima over an HWC feature map, evaluated sequentially per
// output with eight comparison lanes.
inline MaxPoolResult maxpool(std::span<const std::int8_t> fmap, const MaxPoolShape& s) {
  if (!s.integral() || s.c < 1) throw ShapeError("maxpool: output size is not integral");
  if (static_cast<std::int64_t>(fmap.size()) != s.h * s.w * s.c) throw ShapeError("maxpool: fmap size mismatch");
  MaxPoolResult r;
  const auto oh = s.oh(), ow = s.ow();
  r.out.resize(static_cast<std::size_t>(oh * ow * s.c));
  for (std::int64_t y = 0; y < oh; ++y)
    for (std::int64_t x = 0; x < ow; ++x)
      for (std::int64_t c = 0; c < s.c; ++c) {
        std::int8_t best = fmap[static_cast<std::size_t>(((y * s.stride) * s.w + x * s.stride) * s.c + c)];
        for (std::int64_t dy = 0; dy < s.window; ++dy)
          for (std::int64_t dx = 0; dx < s.window; ++dx)
            best = std::max(best, fmap[static_cast<std::size_t>(((y * s.stride + dy) * s.w + x * s.stride + dx) * s.c + c)]);
        r.out[static_cast<std::size_t>((y * ow + x) * s.c + c)] = best;
      }
  r.comparisons = maxpool_comparisons(s);
  r.cycles = maxpool_cycles(s);
  return r;
}

// Row-major M x K -> blocked row-major (8x8 blocks, block rows of K/8).
inline std::vector<std::int8_t> to_blocked_row_major(std::span<const std::int8_t> in, std::int64_t m, std::int64_t k) {
  if (m % 8 != 0 || k % 8 != 0) throw ShapeError("reshuffle: M and K must be padded to multiples of 8");
  if (static_cast<std::int64_t>(in.size()) != m * k) throw ShapeError("reshuffle: size mismatch");
  std::vector<std::int8_t> out(in.size());
  const std::int64_t kb = k / 8;
  for (std::int64_t mb = 0; mb < m / 8; ++mb)
    for (std::int64_t b = 0; b < kb; ++b)
      for (std::int64_t r = 0; r < 8; ++r)
        for (std::int64_t c = 0; c < 8; ++c)
          out[static_cast<std::size_t>((mb * kb + b) * 64 + r * 8 + c)] = in[static_cast<std::size_t>((mb * 8 + r) * k + b * 8 + c)];
  return out;
}

inline std::vector<std::int8_t> from_blocked_row_major(std::span<const std::int8_t> in, std::int64_t m, std::int64_t k) {
  if (m % 8 != 0 || k % 8 != 0) throw ShapeError("reshuffle: M and K must be padded to multiples of 8");
  if (static_cast<std::int64_t>(in.size()) != m * k) throw ShapeError("reshuffle: size mismatch");
  std::vector<std::int8_t> out(in.size());
  const std::int64_t kb = k / 8;
  for (std::int64_t mb = 0; mb < m / 8; ++mb)
    for (std::int64_t b = 0; b < kb; ++b)
      for (std::int64_t r = 0; r < 8; ++r)
        for (std::int64_t c = 0; c < 8; ++c)
          out[static_cast<std::size_t>((mb * 8 + r) * k + b * 8 + c)] = in[static_cast<std::size_t>((mb * kb + b) * 64 + r * 8 + c)];
  return out;
}

// HWC -> C/8HWC8: word (cb, h, w) holds channels 8cb..8cb+7 of pixel (h, w).
inline std::vector<std::int8_t> to_c8hwc8(std::span<const std::int8_t> in, std::int64_t h, std::int64_t w, std::int64_t c) {
  if (c % 8 != 0) throw ShapeError("reshuffle: C must be padded to a multiple of 8");
  if (static_cast<std::int64_t>(in.size()) != h * w * c) throw ShapeError("reshuffle: size mismatch");
  std::vector<std::int8_t> out(in.size());
  for (std::int64_t cb = 0; cb < c / 8; ++cb)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        for (std::int64_t i = 0; i < 8; ++i)
          out[static_cast<std::size_t>(((cb * h + y) * w + x) * 8 + i)] = in[static_cast<std::size_t>((y * w + x) * c + cb * 8 + i)];
  return out;
}

inline std::vector<std::int8_t> from_c8hwc8(std::span<const std::int8_t> in, std::int64_t h, std::int64_t w, std::int64_t c) {
  if (c % 8 != 0) throw ShapeError("reshuffle: C must be padded to a multiple of 8");
  if (static_cast<std::int64_t>(in.size()) != h * w * c) throw ShapeError("reshuffle: size mismatch");
  std::vector<std::int8_t> out(in.size());
  for (std::int64_t cb = 0; cb < c / 8; ++cb)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        for (std::int64_t i = 0; i < 8; ++i)
          out[static_cast<std::size_t>((y * w + x) * c + cb * 8 + i)] = in[static_cast<std::size_t>(((cb * h + y) * w + x) * 8 + i)];
  return out;
}

// One 64-bit word read and written per cycle.
inline std::int64_t reshuffle_cycles(std::int64_t bytes) { return ceil_div(bytes, 8); }

inline std::vector<Word> pack_words(std::span<const std::int8_t> bytes) {
  std::vector<Word> w(static_cast<std::size_t>(ceil_div(static_cast<std::int64_t>(bytes.size()), 8)), 0);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    w[i / 8] |= static_cast<Word>(static_cast<std::uint8_t>(bytes[i])) << (8 * (i % 8));
  return w;
}

inline std::vector<std::int8_t> unpack_words(std::span<const Word> words) {
  std::vector<std::int8_t> b(words.size() * 8);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<std::int8_t>((words[i / 8] >> (8 * (i % 8))) & 0xff);
  return b;
}

}  // namespace voltrasim
