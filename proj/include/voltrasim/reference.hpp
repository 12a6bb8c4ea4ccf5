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

// Direct (non-im2col, non-tiled) integer reference for every layer kind.
// Shares nothing with the engine datapath except the requantization rule.

#include <cstdint>
#include <span>
#include <vector>

#include "voltrasim/postproc.hpp"
#include "voltrasim/quant.hpp"
#include "voltrasim/workload.hpp"

namespace voltrasim::reference {

inline std::vector<std::int32_t> gemm(std::span<const std::int8_t> a, std::span<const std::int8_t> b, const GemmShape& g) {
  std::vector<std::int32_t> c(static_cast<std::size_t>(g.m * g.n), 0);
  for (std::int64_t i = 0; i < g.m; ++i)
    for (std::int64_t j = 0; j < g.n; ++j) {
      std::uint32_t s = 0;
      for (std::int64_t p = 0; p < g.k; ++p)
        s += static_cast<std::uint32_t>(std::int32_t{a[static_cast<std::size_t>(i * g.k + p)]} *
                                        std::int32_t{b[static_cast<std::size_t>(p * g.n + j)]});
      c[static_cast<std::size_t>(i * g.n + j)] = static_cast<std::int32_t>(s);
    }
  return c;
}

// x: H x W x C, w: FY x FX x C x OC; result: (OH*OW) x OC.
inline std::vector<std::int32_t> conv2d(std::span<const std::int8_t> x, std::span<const std::int8_t> w, const Conv2dShape& s) {
  const auto oh = s.oh(), ow = s.ow();
  std::vector<std::int32_t> out(static_cast<std::size_t>(oh * ow * s.oc), 0);
  for (std::int64_t oy = 0; oy < oh; ++oy)
    for (std::int64_t ox = 0; ox < ow; ++ox)
      for (std::int64_t o = 0; o < s.oc; ++o) {
        std::uint32_t acc = 0;
        for (std::int64_t fy = 0; fy < s.fy; ++fy)
          for (std::int64_t fx = 0; fx < s.fx; ++fx) {
            const std::int64_t iy = oy * s.stride + fy - s.pad, ix = ox * s.stride + fx - s.pad;
            if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) continue;
            for (std::int64_t c = 0; c < s.c; ++c)
              acc += static_cast<std::uint32_t>(std::int32_t{x[static_cast<std::size_t>((iy * s.w + ix) * s.c + c)]} *
                                                std::int32_t{w[static_cast<std::size_t>(((fy * s.fx + fx) * s.c + c) * s.oc + o)]});
          }
        out[static_cast<std::size_t>((oy * ow + ox) * s.oc + o)] = static_cast<std::int32_t>(acc);
      }
  return out;
}

inline std::vector<std::int8_t> requantize(std::span<const std::int32_t> acc, const QuantParams& p) {
  std::vector<std::int8_t> q(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) q[i] = quantize(acc[i], p);
  return q;
}

inline std::vector<std::int8_t> transpose(std::span<const std::int8_t> m, std::int64_t rows, std::int64_t cols) {
  std::vector<std::int8_t> t(m.size());
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j)
      t[static_cast<std::size_t>(j * rows + i)] = m[static_cast<std::size_t>(i * cols + j)];
  return t;
}

inline std::vector<std::int8_t> maxpool(std::span<const std::int8_t> x, const MaxPoolShape& s) {
  const auto oh = s.oh(), ow = s.ow();
  std::vector<std::int8_t> out(static_cast<std::size_t>(oh * ow * s.c));
  for (std::int64_t y = 0; y < oh; ++y)
    for (std::int64_t xx = 0; xx < ow; ++xx)
      for (std::int64_t c = 0; c < s.c; ++c) {
        int best = -129;
        for (std::int64_t dy = 0; dy < s.window; ++dy)
          for (std::int64_t dx = 0; dx < s.window; ++dx)
            best = std::max<int>(best, x[static_cast<std::size_t>(((y * s.stride + dy) * s.w + xx * s.stride + dx) * s.c + c)]);
        out[static_cast<std::size_t>((y * ow + xx) * s.c + c)] = static_cast<std::int8_t>(best);
      }
  return out;
}

// Output of one layer given its operand tensors. `weight` is the stored
// weight (for a transposed producer link, the producer's output as-is).
inline std::vector<std::int8_t> layer(const LayerOp& l, std::span<const std::int8_t> input,
                                      std::span<const std::int8_t> weight, MatrixDims weight_stored = {}) {
  if (auto* g = std::get_if<GemmShape>(&l.op)) {
    if (l.weight.transpose) {
      auto bt = transpose(weight, weight_stored.rows, weight_stored.cols);
      return requantize(gemm(input, bt, *g), l.quant);
    }
    return requantize(gemm(input, weight, *g), l.quant);
  }
  if (auto* c = std::get_if<Conv2dShape>(&l.op)) return requantize(conv2d(input, weight, *c), l.quant);
  return reference::maxpool(input, std::get<MaxPoolShape>(l.op));
}

}  // namespace voltrasim::reference
