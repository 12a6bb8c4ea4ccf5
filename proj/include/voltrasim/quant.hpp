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

#include "voltrasim/common.hpp"

namespace voltrasim {

// Requantization of a 32-bit accumulator to int8: optional ReLU on the
// 32-bit value, multiply (64-bit), round-half-up shift, zero point, clamp.
struct QuantParams {
  std::int32_t multiplier = 1;
  int shift = 0;
  std::int8_t zero_point = 0;
  bool relu = false;

  bool valid() const { return shift >= 0 && shift < 32; }
  bool operator==(const QuantParams&) const = default;
};

inline std::int8_t quantize(std::int32_t acc, const QuantParams& p) {
  std::int64_t v = acc;
  if (p.relu) v = std::max<std::int64_t>(v, 0);
  std::int64_t prod = v * static_cast<std::int64_t>(p.multiplier);
  if (p.shift > 0) prod = (prod + (std::int64_t{1} << (p.shift - 1))) >> p.shift;
  std::int64_t q = prod + p.zero_point;
  return static_cast<std::int8_t>(std::clamp<std::int64_t>(q, -128, 127));
}

}  // namespace voltrasim
