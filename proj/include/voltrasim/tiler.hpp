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
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "voltrasim/array.hpp"
#include "voltrasim/common.hpp"
#include "voltrasim/config.hpp"
#include "voltrasim/memory.hpp"
#include "voltrasim/workload.hpp"

namespace voltrasim {

inline constexpr std::int64_t kZeroRegionBytes = 64;

// Bytes held on chip for one tile: int8 input and weight, int32 partial
// sums, int8 output, plus the shared zero region.
inline std::int64_t footprint(std::int64_t tm, std::int64_t tk, std::int64_t tn) {
  return tm * tk + tk * tn + 4 * tm * tn + tm * tn + kZeroRegionBytes;
}

struct TileDims {
  std::int64_t tm = 8, tk = 8, tn = 8;
  bool operator==(const TileDims&) const = default;
};

// One tile of a GEMM/conv layer in array coordinates. m and n extents are
// the real (unpadded) rows/cols; k extent is in padded reduction elements.
struct Tile {
  std::int64_t m0 = 0, tm = 0, n0 = 0, tn = 0, k0 = 0, tk = 0;
  bool load_a = true, load_b = true;
  bool first_k = true, last_k = true;
  // conv input window (padded rows)
  std::int64_t y0 = 0, rows = 0;
  std::int64_t bytes_a = 0, bytes_b = 0, bytes_out = 0;
};

struct TrafficReport {
  std::vector<std::int64_t> bytes_in;   // per tile
  std::vector<std::int64_t> bytes_out;  // per tile
  std::int64_t total_in = 0, total_out = 0;
  std::int64_t input_bytes = 0, weight_bytes = 0, output_bytes = 0, psum_bytes = 0;
  std::int64_t transfers = 0;
  std::int64_t total() const { return total_in + total_out; }
};

enum class Space { Input = 0, Weight = 1, Psum = 2, Output = 3 };

struct LayerSchedule {
  int layer = 0;
  std::string name;
  GemmShape gemm;  // array GEMM (padded conv channels)
  TileDims dims;
  std::vector<Tile> tiles;
  bool a_resident = false, b_resident = false, out_resident = false;
  bool b_transposed = false;
  std::int64_t tile_capacity = 0;  // bytes available for tiles
  std::int64_t footprint_bytes = 0;
  // Operand tile reservations (max over tiles), bytes
  std::int64_t a_bytes = 0, b_bytes = 0, psum_bytes = 0, out_bytes = 0;
  // Region word bases (per space in separated mode, all space 0 when shared)
  std::int64_t zero_base = 0, a_base = 0, b_base = 0, psum_base = 0, out_base = 0;
  Space a_space = Space::Input, b_space = Space::Input, psum_space = Space::Input, out_space = Space::Input;
  std::vector<AllocationPlan> plans;  // one per memory space
  // maxpool: transfer chunks
  std::vector<std::int64_t> in_chunks, out_chunks;
};

struct NetworkSchedule {
  MemoryMode mode = MemoryMode::Shared;
  std::vector<LayerSchedule> layers;
  std::vector<bool> resident;   // output kept on chip
  std::vector<Region> resident_region;
};

namespace detail {

inline std::int64_t k_quantum(const LayerOp& l) {
  if (auto* c = std::get_if<Conv2dShape>(&l.op)) return c->fy * c->fx * 8;
  return 8;
}

// Padded input rows touched by a run of tm output pixels starting anywhere.
inline std::int64_t conv_rows_worst(const Conv2dShape& c, std::int64_t tm) {
  const std::int64_t orows = std::min(c.oh(), (tm + c.ow() - 2) / c.ow() + 1);
  return std::min(c.padded_h(), (orows - 1) * c.stride + c.fy);
}

inline std::pair<std::int64_t, std::int64_t> conv_rows_for(const Conv2dShape& c, std::int64_t p0, std::int64_t tm) {
  const std::int64_t oy0 = p0 / c.ow(), oy1 = (p0 + tm - 1) / c.ow();
  return {oy0 * c.stride, (oy1 - oy0) * c.stride + c.fy};
}

struct OperandBytes {
  std::int64_t a, b, psum, out;
};

inline OperandBytes tile_bytes(const LayerOp& l, std::int64_t tm, std::int64_t tk, std::int64_t tn) {
  const std::int64_t tmp = round_up(tm, 8), tnp = round_up(tn, 8);
  std::int64_t a = tmp * tk;
  if (auto* c = std::get_if<Conv2dShape>(&l.op)) a = conv_rows_worst(*c, tm) * c->padded_w() * (tk / (c->fy * c->fx));
  return {a, tk * tnp, 4 * tmp * tnp, tmp * tnp};
}

}  // namespace detail

struct FitRule {
  MemoryMode mode = MemoryMode::Shared;
  std::int64_t capacity = 0;  // shared: bytes for tiles
  SeparatedBuffers buffers;
  bool a_resident = false, b_resident = false, out_resident = false;

  bool fits(const LayerOp& l, std::int64_t tm, std::int64_t tk, std::int64_t tn) const {
    auto ob = detail::tile_bytes(l, tm, tk, tn);
    if (mode == MemoryMode::Shared) {
      std::int64_t s = kZeroRegionBytes + ob.psum;
      if (!a_resident) s += ob.a;
      if (!b_resident) s += ob.b;
      if (!out_resident) s += ob.out;
      return s <= capacity;
    }
    return ob.a + kZeroRegionBytes <= buffers.input && ob.b <= buffers.weight && ob.psum <= buffers.psum &&
           ob.out <= buffers.output;
  }
};

// Closed-form DMA bytes for a tiling (same counting as dma_traffic).
inline std::int64_t tiling_traffic(const LayerOp& l, const TileDims& d, bool a_res, bool b_res, bool out_res) {
  const GemmShape g = array_gemm(l);
  const std::int64_t q = detail::k_quantum(l);
  const std::int64_t kp = round_up(g.k, q);
  const std::int64_t tm_n = ceil_div(g.m, d.tm), tn_n = ceil_div(g.n, d.tn), tk_n = ceil_div(kp, d.tk);
  std::int64_t a = 0;
  if (!a_res) {
    std::int64_t once = 0;
    if (auto* c = std::get_if<Conv2dShape>(&l.op)) {
      for (std::int64_t i = 0; i < tm_n; ++i) {
        const std::int64_t p0 = i * d.tm, tm = std::min(d.tm, g.m - p0);
        once += detail::conv_rows_for(*c, p0, tm).second * c->padded_w() * c->c8();
      }
    } else {
      once = g.m * g.k;
    }
    a = once * (tk_n == 1 ? 1 : tn_n);
  }
  std::int64_t bk = kp;
  if (!std::holds_alternative<Conv2dShape>(l.op)) bk = g.k;
  const std::int64_t b = b_res ? 0 : bk * g.n * ((tk_n == 1 && tn_n == 1) ? 1 : tm_n);
  const std::int64_t o = out_res ? 0 : g.m * g.n;
  return a + b + o;
}

// Output-stationary tiling: full K when an 8x8 output tile with full K
// fits, otherwise the largest fitting multiple of the k quantum. With tk
// fixed, the output tile (tm, tn) is the fitting pair that moves the
// fewest DMA bytes, fewer tiles breaking ties.
inline TileDims greedy_tile(const LayerOp& l, const FitRule& rule) {
  const GemmShape g = array_gemm(l);
  const std::int64_t q = detail::k_quantum(l);
  const std::int64_t kp = round_up(g.k, q), mp = round_up(g.m, 8), np = round_up(g.n, 8);
  if (!rule.fits(l, 8, q, 8))
    throw CapacityError("layer '" + l.name + "': even an 8x" + std::to_string(q) + "x8 tile does not fit on chip");
  std::int64_t tk = kp;
  if (!rule.fits(l, 8, kp, 8)) {
    std::int64_t lo = 1, hi = kp / q;  // in quanta
    while (lo < hi) {
      const std::int64_t mid = (lo + hi + 1) / 2;
      if (rule.fits(l, 8, mid * q, 8)) lo = mid; else hi = mid - 1;
    }
    tk = lo * q;
  }
  TileDims best{std::min<std::int64_t>(8, g.m), tk, std::min<std::int64_t>(8, g.n)};
  std::int64_t best_bytes = std::numeric_limits<std::int64_t>::max(), best_tiles = 0;
  for (std::int64_t tn = 8; tn <= np && rule.fits(l, 8, tk, tn); tn += 8)
    for (std::int64_t tm = 8; tm <= mp && rule.fits(l, tm, tk, tn); tm += 8) {
      const TileDims d{std::min(tm, g.m), tk, std::min(tn, g.n)};
      const auto bytes = tiling_traffic(l, d, rule.a_resident, rule.b_resident, rule.out_resident);
      const auto tiles = ceil_div(g.m, d.tm) * ceil_div(g.n, d.tn);
      if (bytes < best_bytes || (bytes == best_bytes && tiles < best_tiles)) {
        best = d;
        best_bytes = bytes;
        best_tiles = tiles;
      }
    }
  return best;
}

// Exhaustive search over tile dims minimizing DMA bytes (then tile count).
inline TileDims exhaustive_tile(const LayerOp& l, const FitRule& rule) {
  const GemmShape g = array_gemm(l);
  const std::int64_t q = detail::k_quantum(l);
  const std::int64_t kp = round_up(g.k, q), mp = round_up(g.m, 8), np = round_up(g.n, 8);
  std::optional<TileDims> best;
  std::int64_t best_bytes = std::numeric_limits<std::int64_t>::max(), best_tiles = 0;
  for (std::int64_t tk = q; tk <= kp; tk += q)
    for (std::int64_t tm = 8; tm <= mp; tm += 8) {
      if (!rule.fits(l, tm, tk, 8)) break;
      for (std::int64_t tn = 8; tn <= np; tn += 8) {
        if (!rule.fits(l, tm, tk, tn)) break;
        TileDims d{std::min(tm, g.m), tk, std::min(tn, g.n)};
        const auto bytes = tiling_traffic(l, d, rule.a_resident, rule.b_resident, rule.out_resident);
        const auto tiles = ceil_div(g.m, d.tm) * ceil_div(g.n, d.tn) * ceil_div(kp, tk);
        if (bytes < best_bytes || (bytes == best_bytes && tiles < best_tiles)) {
          best = d;
          best_bytes = bytes;
          best_tiles = tiles;
        }
      }
    }
  if (!best) throw CapacityError("layer '" + l.name + "': no tile fits on chip");
  return *best;
}

namespace detail {

// Free-list over word addresses, 8-word aligned.
class RegionPool {
 public:
  RegionPool(std::int64_t lo, std::int64_t hi) : lo_(lo), hi_(hi) {}
  // Highest-address gap that fits; residents grow down from the top.
  std::optional<Region> alloc_top(std::int64_t words, std::int64_t floor) {
    words = round_up(words, 8);
    std::vector<Region> live = live_;
    std::sort(live.begin(), live.end(), [](const Region& a, const Region& b) { return a.base > b.base; });
    std::int64_t top = hi_;
    for (const auto& r : live) {
      if (top - r.end() >= words && top - words >= floor) return take({top - words, words});
      top = std::min(top, r.base);
    }
    if (top - words >= std::max(floor, lo_)) return take({top - words, words});
    return std::nullopt;
  }
  void release(const Region& r) {
    live_.erase(std::remove_if(live_.begin(), live_.end(), [&](const Region& x) { return x.base == r.base; }), live_.end());
  }
  std::int64_t lowest_live() const {
    std::int64_t m = hi_;
    for (const auto& r : live_) m = std::min(m, r.base);
    return m;
  }
  const std::vector<Region>& live() const { return live_; }

 private:
  Region take(Region r) {
    live_.push_back(r);
    return r;
  }
  std::int64_t lo_, hi_;
  std::vector<Region> live_;
};

inline std::vector<int> last_use(const Network& net) {
  std::vector<int> last(net.layers.size(), -1);
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    const auto& l = net.layers[j];
    if (!l.input.off_chip()) last[static_cast<std::size_t>(l.input.layer)] = static_cast<int>(j);
    if (l.has_weight() && !l.weight.off_chip()) last[static_cast<std::size_t>(l.weight.layer)] = static_cast<int>(j);
  }
  return last;
}

inline bool all_consumers_gemm(const Network& net, std::size_t i) {
  bool any = false;
  for (const auto& l : net.layers) {
    const bool uses = (!l.input.off_chip() && l.input.layer == static_cast<int>(i)) ||
                      (l.has_weight() && !l.weight.off_chip() && l.weight.layer == static_cast<int>(i));
    if (!uses) continue;
    any = true;
    if (!l.is_gemm()) return false;
  }
  return any;
}

inline void build_tiles(const LayerOp& l, LayerSchedule& s) {
  const GemmShape g = s.gemm;
  const std::int64_t q = k_quantum(l);
  const std::int64_t kp = round_up(g.k, q);
  const auto& d = s.dims;
  const std::int64_t tm_n = ceil_div(g.m, d.tm), tn_n = ceil_div(g.n, d.tn), tk_n = ceil_div(kp, d.tk);
  const auto* conv = std::get_if<Conv2dShape>(&l.op);
  const std::int64_t real_k = conv ? kp : g.k;
  for (std::int64_t mi = 0; mi < tm_n; ++mi)
    for (std::int64_t ni = 0; ni < tn_n; ++ni)
      for (std::int64_t ki = 0; ki < tk_n; ++ki) {
        Tile t;
        t.m0 = mi * d.tm;
        t.tm = std::min(d.tm, g.m - t.m0);
        t.n0 = ni * d.tn;
        t.tn = std::min(d.tn, g.n - t.n0);
        t.k0 = ki * d.tk;
        t.tk = std::min(d.tk, kp - t.k0);
        t.first_k = ki == 0;
        t.last_k = ki == tk_n - 1;
        t.load_a = !s.a_resident && !(tk_n == 1 && ni > 0);
        t.load_b = !s.b_resident && !(tk_n == 1 && tn_n == 1 && mi > 0);
        if (conv) {
          auto [y0, rows] = conv_rows_for(*conv, t.m0, t.tm);
          t.y0 = y0;
          t.rows = rows;
          t.bytes_a = t.load_a ? rows * conv->padded_w() * (t.tk / (conv->fy * conv->fx)) : 0;
        } else {
          t.bytes_a = t.load_a ? t.tm * (std::min(t.k0 + t.tk, real_k) - t.k0) : 0;
        }
        t.bytes_b = t.load_b ? (std::min(t.k0 + t.tk, real_k) - t.k0) * t.tn : 0;
        t.bytes_out = (t.last_k && !s.out_resident) ? t.tm * t.tn : 0;
        s.tiles.push_back(t);
      }
}

}  // namespace detail

// Tiles every layer and lays out the scratchpad. In shared mode, outputs
// consumed only by later GEMMs stay resident in the upper half of memory
// (their consumers read them in place); tiles use the space below.
inline NetworkSchedule tile_network(const Network& net, const SimConfig& cfg) {
  NetworkSchedule ns;
  ns.mode = cfg.memory_mode;
  const std::size_t n = net.layers.size();
  ns.resident.assign(n, false);
  ns.resident_region.assign(n, Region{});
  const auto last = detail::last_use(net);
  const std::int64_t total_words = cfg.memory.total_words();
  detail::RegionPool pool(1, total_words);

  for (std::size_t j = 0; j < n; ++j) {
    const auto& l = net.layers[j];
    LayerSchedule s;
    s.layer = static_cast<int>(j);
    s.name = l.name;
    const MatrixDims od = output_dims(l);
    if (cfg.memory_mode == MemoryMode::Shared && last[j] > static_cast<int>(j) && detail::all_consumers_gemm(net, j) &&
        !l.is_maxpool()) {
      const std::int64_t words = round_up(od.rows, 8) * round_up(od.cols, 8) / 8;
      if (auto r = pool.alloc_top(words, total_words / 2)) {
        ns.resident[j] = true;
        ns.resident_region[j] = *r;
      }
    }
    s.out_resident = ns.resident[j];
    s.a_resident = !l.input.off_chip() && ns.resident[static_cast<std::size_t>(l.input.layer)];
    s.b_resident = l.has_weight() && !l.weight.off_chip() && ns.resident[static_cast<std::size_t>(l.weight.layer)];
    s.b_transposed = l.weight.transpose;

    if (cfg.memory_mode == MemoryMode::Shared) {
      s.plans.emplace_back(total_words);
      s.plans[0].add("zero", {0, 8});
      for (std::size_t i = 0; i < n; ++i)
        if (ns.resident[i] && i <= j && last[i] >= static_cast<int>(j))
          s.plans[0].add("L" + std::to_string(i) + ".out", ns.resident_region[i]);
      s.tile_capacity = (pool.lowest_live() - 8) * 8 + kZeroRegionBytes;
    } else {
      const auto& b = cfg.separated;
      for (std::int64_t bytes : {b.input, b.weight, b.psum, b.output}) s.plans.emplace_back(bytes / 8);
      s.plans[0].add("zero", {0, 8});
      s.a_space = Space::Input;
      s.b_space = Space::Weight;
      s.psum_space = Space::Psum;
      s.out_space = Space::Output;
    }

    if (l.is_maxpool()) {
      const auto& p = std::get<MaxPoolShape>(l.op);
      const std::int64_t chunk = cfg.memory_mode == MemoryMode::Shared ? s.tile_capacity / 2 : cfg.separated.input;
      auto split = [&](std::int64_t bytes) {
        std::vector<std::int64_t> v;
        for (std::int64_t left = bytes; left > 0; left -= chunk) v.push_back(std::min(left, chunk));
        return v;
      };
      s.in_chunks = split(p.h * p.w * p.c);
      s.out_chunks = split(p.oh() * p.ow() * p.c);
      s.footprint_bytes = std::min(chunk, p.h * p.w * p.c) + std::min(chunk, p.oh() * p.ow() * p.c);
      ns.layers.push_back(std::move(s));
    } else {
      s.gemm = array_gemm(l);
      FitRule rule{cfg.memory_mode, s.tile_capacity, cfg.separated, s.a_resident, s.b_resident, s.out_resident};
      s.dims = cfg.exhaustive_tiler ? exhaustive_tile(l, rule) : greedy_tile(l, rule);
      detail::build_tiles(l, s);
      const auto ob = detail::tile_bytes(l, s.dims.tm, s.dims.tk, s.dims.tn);
      s.a_bytes = s.a_resident ? 0 : ob.a;
      s.b_bytes = s.b_resident ? 0 : ob.b;
      s.psum_bytes = ob.psum;
      s.out_bytes = s.out_resident ? 0 : ob.out;
      s.footprint_bytes = kZeroRegionBytes + s.a_bytes + s.b_bytes + s.psum_bytes + s.out_bytes;

      // Region placement.
      auto words = [](std::int64_t bytes) { return round_up(ceil_div(bytes, 8), 8); };
      const std::string src_a = s.a_resident ? "L" + std::to_string(l.input.layer) + ".out" : "a";
      if (cfg.memory_mode == MemoryMode::Shared) {
        std::int64_t cur = 8;
        auto place = [&](const std::string& id, std::int64_t bytes) {
          const Region r{cur, words(bytes)};
          cur += r.length;
          if (r.length > 0) s.plans[0].add(id, r);
          return r.base;
        };
        s.a_base = s.a_resident ? ns.resident_region[static_cast<std::size_t>(l.input.layer)].base : place("a", s.a_bytes);
        s.b_base = s.b_resident ? ns.resident_region[static_cast<std::size_t>(l.weight.layer)].base : place("b", s.b_bytes);
        s.psum_base = place("psum", s.psum_bytes);
        s.out_base = s.out_resident ? ns.resident_region[j].base : place("out", s.out_bytes);
        if (cur > pool.lowest_live()) throw std::logic_error("allocation: tile regions overlap resident tensors");
      } else {
        s.plans[0].add("a", {8, words(s.a_bytes)});
        s.a_base = 8;
        s.plans[1].add("b", {0, words(s.b_bytes)});
        s.plans[2].add("psum", {0, words(s.psum_bytes)});
        s.plans[3].add("out", {0, words(s.out_bytes)});
      }
      for (const auto& p : s.plans)
        if (!p.disjoint()) throw std::logic_error("allocation: overlapping regions");
      ns.layers.push_back(std::move(s));
    }
    // Release residents whose last consumer was this layer.
    for (std::size_t i = 0; i <= j; ++i)
      if (ns.resident[i] && last[i] == static_cast<int>(j)) pool.release(ns.resident_region[i]);
  }
  return ns;
}

inline TileDims tile_layer(const LayerOp& l, const SimConfig& cfg) {
  FitRule rule{cfg.memory_mode, cfg.memory.total_bytes(), cfg.separated};
  return cfg.exhaustive_tiler ? exhaustive_tile(l, rule) : greedy_tile(l, rule);
}

inline TrafficReport dma_traffic(const LayerSchedule& s) {
  TrafficReport r;
  for (const auto& t : s.tiles) {
    const std::int64_t in = t.bytes_a + t.bytes_b;
    r.bytes_in.push_back(in);
    r.bytes_out.push_back(t.bytes_out);
    r.total_in += in;
    r.total_out += t.bytes_out;
    r.input_bytes += t.bytes_a;
    r.weight_bytes += t.bytes_b;
    r.output_bytes += t.bytes_out;
    r.transfers += (t.bytes_a > 0) + (t.bytes_b > 0) + (t.bytes_out > 0);
  }
  for (auto c : s.in_chunks) {
    r.bytes_in.push_back(c);
    r.total_in += c;
    r.input_bytes += c;
    ++r.transfers;
  }
  for (auto c : s.out_chunks) {
    r.bytes_out.push_back(c);
    r.total_out += c;
    r.output_bytes += c;
    ++r.transfers;
  }
  return r;
}

inline TrafficReport dma_traffic(const NetworkSchedule& ns) {
  TrafficReport r;
  for (const auto& s : ns.layers) {
    auto t = dma_traffic(s);
    r.bytes_in.insert(r.bytes_in.end(), t.bytes_in.begin(), t.bytes_in.end());
    r.bytes_out.insert(r.bytes_out.end(), t.bytes_out.begin(), t.bytes_out.end());
    r.total_in += t.total_in;
    r.total_out += t.total_out;
    r.input_bytes += t.input_bytes;
    r.weight_bytes += t.weight_bytes;
    r.output_bytes += t.output_bytes;
    r.transfers += t.transfers;
  }
  return r;
}

// Element accesses at the scratchpad boundary: every operand element the
// array reads (m*k + k*n), every output element written (m*n), plus every
// element moved by DMA (a store and a reload each count once).
inline std::int64_t layer_access_count(const Network& net, const NetworkSchedule& ns, std::size_t j) {
  const auto& l = net.layers[j];
  std::int64_t c = dma_traffic(ns.layers[j]).total();
  if (!l.is_maxpool()) {
    const GemmShape g = array_gemm(l);
    c += g.m * g.k + g.k * g.n + g.m * g.n;
  }
  return c;
}

inline std::int64_t access_count(const Network& net, const NetworkSchedule& ns) {
  std::int64_t c = 0;
  for (std::size_t j = 0; j < net.layers.size(); ++j) c += layer_access_count(net, ns, j);
  return c;
}

struct AccessComparison {
  std::int64_t shared = 0, separated = 0;
  double saving_pct = 0.0;
};

inline AccessComparison mha_access_compare(std::int64_t tokens = 64, std::int64_t d_model = 768, std::int64_t d_head = 64,
                                           SimConfig cfg = default_config()) {
  const Network net = mha_sequence(tokens, d_model, d_head);
  cfg.memory_mode = MemoryMode::Shared;
  AccessComparison a;
  a.shared = access_count(net, tile_network(net, cfg));
  cfg.memory_mode = MemoryMode::Separated;
  a.separated = access_count(net, tile_network(net, cfg));
  a.saving_pct = 100.0 * static_cast<double>(a.separated - a.shared) / static_cast<double>(a.separated);
  return a;
}

}  // namespace voltrasim
