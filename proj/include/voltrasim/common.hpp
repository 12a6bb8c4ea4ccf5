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

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace voltrasim {

using Word = std::uint64_t;
using Cycle = std::int64_t;

// Shape / layout problems in a workload description.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad or inconsistent architecture / workload configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A layer cannot be tiled into the available on-chip capacity.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hardware-model invariant broken during simulation.
struct InvariantViolation : std::logic_error {
  InvariantViolation(Cycle cycle, const std::string& cause)
      : std::logic_error("cycle " + std::to_string(cycle) + ": " + cause), cycle(cycle) {}
  Cycle cycle;
};

constexpr std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }
constexpr std::int64_t round_up(std::int64_t a, std::int64_t b) { return ceil_div(a, b) * b; }

// Seeded int8 generator. Draws raw engine bits so streams are identical
// across standard library implementations.
class ByteRng {
 public:
  explicit ByteRng(std::uint64_t seed) : eng_(seed) {}
  std::int8_t next() {
    if (left_ == 0) {
      buf_ = eng_();
      left_ = 8;
    }
    auto b = static_cast<std::int8_t>(buf_ & 0xff);
    buf_ >>= 8;
    --left_;
    return b;
  }
  std::uint64_t bits() { return eng_(); }
  // Uniform in [lo, hi] (small ranges only; modulo bias is irrelevant here).
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(eng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 eng_;
  std::uint64_t buf_ = 0;
  int left_ = 0;
};

}  // namespace voltrasim
