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
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "voltrasim/common.hpp"
#include "voltrasim/config.hpp"
#include "voltrasim/workload.hpp"

namespace voltrasim {

inline std::int64_t ideal_cycles(const GemmShape& g, const ArrayGeometry& a) {
  return ceil_div(g.m, a.mu) * ceil_div(g.k, a.ku) * ceil_div(g.n, a.nu);
}

// Useful MACs over MAC slots issued during ideal_cycles.
inline double spatial_utilization(const GemmShape& g, const ArrayGeometry& a) {
  const double slots = static_cast<double>(ideal_cycles(g, a)) * static_cast<double>(a.macs());
  return static_cast<double>(g.macs()) / slots;
}

// Layer-level form: slots follow the padded array GEMM, useful work is
// the unpadded MAC count.
inline double spatial_utilization(const LayerOp& l, const ArrayGeometry& a) {
  const double slots = static_cast<double>(ideal_cycles(array_gemm(l, a.ku), a)) * static_cast<double>(a.macs());
  return static_cast<double>(layer_macs(l)) / slots;
}

struct FireInput {
  std::span<const std::int8_t> a;  // mu x ku, row-major
  std::span<const std::int8_t> b;  // ku x nu, row-major
  std::optional<std::span<const std::int32_t>> preload;  // mu x nu
};

// Output-stationary MAC array. The loop controller walks output blocks
// (m outer, n inner) and, within each, ceil(K/ku) reduction steps;
// accumulators clear (or take the preload) on the first step of a block.
class MacArray {
 public:
  explicit MacArray(ArrayGeometry g = {}) : geom_(g), acc_(static_cast<std::size_t>(g.mu * g.nu), 0) {}

  // Program the loop bounds for a GEMM (or tile) of the given shape.
  void configure(const GemmShape& tile) {
    m_blocks_ = ceil_div(tile.m, geom_.mu);
    n_blocks_ = ceil_div(tile.n, geom_.nu);
    k_blocks_ = ceil_div(tile.k, geom_.ku);
    m_blk_ = n_blk_ = k_blk_ = 0;
    complete_ = false;
    fires_ = 0;
  }

  void fire(const FireInput& in) {
    const auto mu = geom_.mu, ku = geom_.ku, nu = geom_.nu;
    if (static_cast<std::int64_t>(in.a.size()) != mu * ku || static_cast<std::int64_t>(in.b.size()) != ku * nu)
      throw ShapeError("fire: operand block does not match array geometry");
    if (in.preload && static_cast<std::int64_t>(in.preload->size()) != mu * nu)
      throw ShapeError("fire: preload block does not match array geometry");
    if (complete_) throw std::logic_error("fire: previous output block has not been drained");
    if (done()) throw std::logic_error("fire: loop nest exhausted");
    if (k_blk_ == 0) {
      if (in.preload)
        std::copy(in.preload->begin(), in.preload->end(), acc_.begin());
      else
        std::fill(acc_.begin(), acc_.end(), 0);
    }
    for (std::int64_t i = 0; i < mu; ++i) {
      for (std::int64_t j = 0; j < nu; ++j) {
        std::int32_t dot = 0;  // |dot| <= ku * 2^14, no overflow for ku <= 2^16
        for (std::int64_t p = 0; p < ku; ++p) dot += std::int32_t{in.a[i * ku + p]} * std::int32_t{in.b[p * nu + j]};
        auto& c = acc_[static_cast<std::size_t>(i * nu + j)];
        c = static_cast<std::int32_t>(static_cast<std::uint32_t>(c) + static_cast<std::uint32_t>(dot));
      }
    }
    fire_timing_only();
  }

  // Counter update without arithmetic; used by timing-only simulation.
  void fire_timing_only() {
    if (complete_) throw std::logic_error("fire: previous output block has not been drained");
    ++fires_;
    if (++k_blk_ == k_blocks_) complete_ = true;
  }

  bool block_complete() const { return complete_; }
  bool first_step() const { return k_blk_ == 0; }
  std::int64_t m_block() const { return m_blk_; }
  std::int64_t n_block() const { return n_blk_; }
  std::int64_t k_block() const { return k_blk_; }
  std::int64_t fires() const { return fires_; }
  bool done() const { return m_blk_ >= m_blocks_; }
  const ArrayGeometry& geometry() const { return geom_; }

  // Hand the finished accumulator block out and step the loop controller
  // to the next output block.
  std::vector<std::int32_t> drain() {
    if (!complete_) throw std::logic_error("drain: output block is not complete");
    std::vector<std::int32_t> out = acc_;
    complete_ = false;
    k_blk_ = 0;
    if (++n_blk_ == n_blocks_) {
      n_blk_ = 0;
      ++m_blk_;
    }
    return out;
  }

 private:
  ArrayGeometry geom_;
  std::vector<std::int32_t> acc_;
  std::int64_t m_blocks_ = 0, n_blocks_ = 0, k_blocks_ = 0;
  std::int64_t m_blk_ = 0, n_blk_ = 0, k_blk_ = 0;
  std::int64_t fires_ = 0;
  bool complete_ = false;
};

// Runs a whole GEMM through the array loop controller with operands held
// host-side (no memory timing). Used for geometries outside the
// cycle-level memory model and as a functional reference path.
inline std::vector<std::int32_t> run_array_gemm(MacArray& arr, const GemmShape& g, std::span<const std::int8_t> a,
                                                std::span<const std::int8_t> b) {
  const auto& geo = arr.geometry();
  arr.configure(g);
  std::vector<std::int32_t> c(static_cast<std::size_t>(g.m * g.n), 0);
  std::vector<std::int8_t> ab(static_cast<std::size_t>(geo.mu * geo.ku)), bb(static_cast<std::size_t>(geo.ku * geo.nu));
  while (!arr.done()) {
    const std::int64_t m0 = arr.m_block() * geo.mu, n0 = arr.n_block() * geo.nu, k0 = arr.k_block() * geo.ku;
    for (std::int64_t i = 0; i < geo.mu; ++i)
      for (std::int64_t p = 0; p < geo.ku; ++p) {
        const bool in = m0 + i < g.m && k0 + p < g.k;
        ab[static_cast<std::size_t>(i * geo.ku + p)] = in ? a[static_cast<std::size_t>((m0 + i) * g.k + k0 + p)] : 0;
      }
    for (std::int64_t p = 0; p < geo.ku; ++p)
      for (std::int64_t j = 0; j < geo.nu; ++j) {
        const bool in = k0 + p < g.k && n0 + j < g.n;
        bb[static_cast<std::size_t>(p * geo.nu + j)] = in ? b[static_cast<std::size_t>((k0 + p) * g.n + n0 + j)] : 0;
      }
    arr.fire({ab, bb, std::nullopt});
    if (arr.block_complete()) {
      auto blk = arr.drain();
      for (std::int64_t i = 0; i < geo.mu && m0 + i < g.m; ++i)
        for (std::int64_t j = 0; j < geo.nu && n0 + j < g.n; ++j)
          c[static_cast<std::size_t>((m0 + i) * g.n + n0 + j)] = blk[static_cast<std::size_t>(i * geo.nu + j)];
    }
  }
  return c;
}

}  // namespace voltrasim
