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
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "voltrasim/array.hpp"
#include "voltrasim/common.hpp"
#include "voltrasim/config.hpp"
#include "voltrasim/memory.hpp"
#include "voltrasim/postproc.hpp"
#include "voltrasim/reference.hpp"
#include "voltrasim/streamer.hpp"
#include "voltrasim/tiler.hpp"
#include "voltrasim/workload.hpp"

namespace voltrasim {

inline std::int64_t dma_cycles(std::int64_t bytes, const DmaConfig& d) {
  if (bytes <= 0) return 0;
  return d.latency + ceil_div(bytes * 8, d.bandwidth_bits);
}

struct StallCounts {
  std::int64_t bank_conflict = 0;
  std::int64_t fifo_empty = 0;
  std::int64_t drain_backpressure = 0;
  std::int64_t total() const { return bank_conflict + fifo_empty + drain_backpressure; }
  StallCounts& operator+=(const StallCounts& o) {
    bank_conflict += o.bank_conflict;
    fifo_empty += o.fifo_empty;
    drain_backpressure += o.drain_backpressure;
    return *this;
  }
};

struct LayerReport {
  std::string name;
  std::string kind;
  GemmShape gemm;
  TileDims tile;
  std::int64_t tiles = 0;
  std::int64_t ideal_cycles = 0;    // array fires
  std::int64_t compute_cycles = 0;  // GEMM core busy: tile start to last fire
  std::int64_t drain_tail_cycles = 0;  // post-processing after the last fire
  std::int64_t dma_cycles = 0;
  std::int64_t total_cycles = 0;
  StallCounts stalls;
  std::int64_t dma_bytes_in = 0, dma_bytes_out = 0, transfers = 0;
  std::int64_t useful_macs = 0, mac_slots = 0;
  std::int64_t footprint_bytes = 0;
  std::optional<double> spatial, temporal;
  std::optional<bool> functional_ok;
};

struct SimReport {
  std::string workload;
  std::string timing;  // "cycle" or "array-only"
  SimConfig config;
  std::vector<LayerReport> layers;
  std::int64_t total_latency = 0;
  std::int64_t compute_cycles = 0, dma_cycles = 0, other_cycles = 0;
  std::int64_t ideal_cycles = 0;
  std::int64_t dma_bytes = 0;
  std::int64_t useful_macs = 0, mac_slots = 0;
  StallCounts stalls;
  double spatial = 0, spatial_mac_weighted = 0, spatial_geomean = 0;
  double temporal = 0, temporal_geomean = 0;
  std::optional<bool> functional_ok;
};

inline double temporal_utilization(std::int64_t ideal, std::int64_t actual) {
  return actual <= 0 ? 1.0 : static_cast<double>(ideal) / static_cast<double>(actual);
}
inline double temporal_utilization(const LayerReport& r) { return temporal_utilization(r.ideal_cycles, r.compute_cycles); }

enum class TimingModel { Cycle, ArrayOnly };

struct RunOptions {
  bool functional = false;     // move real data and check layers against the reference
  bool check_regions = false;  // debug: streamer accesses must hit allocated regions
  TimingModel timing = TimingModel::Cycle;
  std::ostream* trace = nullptr;  // per-cycle "cycle,unit,event" lines
  std::int64_t max_cycles_per_tile = 50'000'000;
};

// Deterministic synthetic operand for (layer, operand) under a seed.
inline std::vector<std::int8_t> synthetic_tensor(std::uint64_t seed, std::size_t layer, int operand, std::int64_t size) {
  ByteRng rng(seed * 0x9E3779B97F4A7C15ULL + layer * 4 + static_cast<std::uint64_t>(operand) + 1);
  std::vector<std::int8_t> v(static_cast<std::size_t>(size));
  for (auto& x : v) x = rng.next();
  return v;
}

inline std::int64_t input_elems(const LayerOp& l) {
  auto d = input_dims(l);
  return d.rows * d.cols;
}
inline std::int64_t weight_elems(const LayerOp& l) {
  if (auto* c = std::get_if<Conv2dShape>(&l.op)) return c->fy * c->fx * c->c * c->oc;
  auto d = weight_dims(l);
  return d.rows * d.cols;
}

class Engine {
 public:
  explicit Engine(SimConfig cfg, RunOptions opt = {}) : cfg_(std::move(cfg)), opt_(opt) {
    auto errs = validate(cfg_);
    if (!errs.empty()) throw ConfigError("invalid config: " + errs.front());
  }

  SimReport run(const Network& net) {
    auto errs = validate_network(net);
    if (!errs.empty()) throw ShapeError("invalid network: " + errs.front());
    const bool cycle = opt_.timing == TimingModel::Cycle && cfg_.cycle_model_geometry();
    sched_ = tile_network(net, cfg_);
    setup_memory();
    outputs_.assign(net.layers.size(), {});
    off_in_.assign(net.layers.size(), {});
    off_w_.assign(net.layers.size(), {});

    SimReport rep;
    rep.workload = net.name;
    rep.timing = cycle ? "cycle" : "array-only";
    rep.config = cfg_;
    for (std::size_t j = 0; j < net.layers.size(); ++j) {
      const auto& l = net.layers[j];
      if (opt_.functional) {
        if (l.input.off_chip()) off_in_[j] = synthetic_tensor(cfg_.seed, j, 0, input_elems(l));
        if (l.has_weight() && l.weight.off_chip()) off_w_[j] = synthetic_tensor(cfg_.seed, j, 1, weight_elems(l));
      }
      LayerReport lr = l.is_maxpool() ? run_maxpool(net, j) : (cycle ? run_gemm_cycle(net, j) : run_gemm_array_only(net, j));
      if (opt_.functional) lr.functional_ok = check_layer(net, j);
      rep.layers.push_back(std::move(lr));
    }
    aggregate(rep);
    return rep;
  }

  // Per-layer int8 outputs (row-major rows x cols) from the last functional run.
  const std::vector<std::vector<std::int8_t>>& outputs() const { return outputs_; }
  // Off-chip synthetic operands of the last functional run (empty if sourced on chip).
  const std::vector<std::int8_t>& offchip_input(std::size_t layer) const { return off_in_[layer]; }
  const std::vector<std::int8_t>& offchip_weight(std::size_t layer) const { return off_w_[layer]; }
  const NetworkSchedule& schedule() const { return sched_; }
  const BankArray& memory(std::size_t space = 0) const { return spaces_[space]; }
  const SimConfig& config() const { return cfg_; }

 private:
  struct TileResult {
    std::int64_t cycles = 0, core_cycles = 0, fires = 0;
    StallCounts stalls;
  };

  void setup_memory() {
    spaces_.clear();
    arbiters_.clear();
    const int channels = 9 + 2 * static_cast<int>(cfg_.streamer(StreamerRole::Psum).channel_count);
    if (cfg_.memory_mode == MemoryMode::Shared) {
      spaces_.emplace_back(cfg_.memory.banks, cfg_.memory.words_per_bank, cfg_.memory.super_bank_width);
    } else {
      const auto& b = cfg_.separated;
      for (std::int64_t bytes : {b.input, b.weight, b.psum, b.output}) spaces_.emplace_back(8, bytes / 64, 8);
    }
    for (const auto& s : spaces_) arbiters_.emplace_back(s.banks(), s.super_bank_width(), channels);
  }

  int space_index(Space s) const { return cfg_.memory_mode == MemoryMode::Shared ? 0 : static_cast<int>(s); }

  std::span<const std::int8_t> input_of(const Network& net, std::size_t j) const {
    const auto& l = net.layers[j];
    return l.input.off_chip() ? std::span<const std::int8_t>(off_in_[j]) : outputs_[static_cast<std::size_t>(l.input.layer)];
  }
  std::span<const std::int8_t> weight_of(const Network& net, std::size_t j) const {
    const auto& l = net.layers[j];
    return l.weight.off_chip() ? std::span<const std::int8_t>(off_w_[j]) : outputs_[static_cast<std::size_t>(l.weight.layer)];
  }

  bool check_layer(const Network& net, std::size_t j) const {
    const auto& l = net.layers[j];
    MatrixDims ws{};
    if (l.has_weight() && !l.weight.off_chip()) ws = output_dims(net.layers[static_cast<std::size_t>(l.weight.layer)]);
    auto ref = reference::layer(l, input_of(net, j), l.has_weight() ? weight_of(net, j) : std::span<const std::int8_t>{}, ws);
    return ref == outputs_[j];
  }

  // ---- host-side operand views in array coordinates --------------------

  // B(k, n) of the array GEMM, k in padded-conv order for convolutions.
  static std::int8_t b_at(const LayerOp& l, std::span<const std::int8_t> w, MatrixDims stored, std::int64_t k,
                          std::int64_t n, std::int64_t cq = 8) {
    if (auto* c = std::get_if<Conv2dShape>(&l.op)) {
      const std::int64_t ci = k % cq, rest = k / cq;
      const std::int64_t fx = rest % c->fx, fy = (rest / c->fx) % c->fy, cb = rest / (c->fx * c->fy);
      const std::int64_t ch = cb * cq + ci;
      if (ch >= c->c) return 0;
      return w[static_cast<std::size_t>(((fy * c->fx + fx) * c->c + ch) * c->oc + n)];
    }
    if (l.weight.transpose) return w[static_cast<std::size_t>(n * stored.cols + k)];
    return w[static_cast<std::size_t>(k * stored.cols + n)];
  }

  // ---- DMA phase (functional layout writes) ----------------------------

  void dma_in(const Network& net, std::size_t j, const LayerSchedule& s, const Tile& t) {
    const auto& l = net.layers[j];
    const GemmShape g = s.gemm;
    if (t.load_a) {
      auto x = input_of(net, j);
      auto mem = spaces_[static_cast<std::size_t>(space_index(s.a_space))].raw();
      if (auto* c = std::get_if<Conv2dShape>(&l.op)) {
        const std::int64_t wp = c->padded_w(), cb0 = t.k0 / (c->fy * c->fx * 8), cbs = t.tk / (c->fy * c->fx * 8);
        for (std::int64_t cbl = 0; cbl < cbs; ++cbl)
          for (std::int64_t r = 0; r < t.rows; ++r)
            for (std::int64_t ix = 0; ix < wp; ++ix) {
              Word w = 0;
              const std::int64_t iy = t.y0 + r - c->pad, xx = ix - c->pad;
              if (iy >= 0 && iy < c->h && xx >= 0 && xx < c->w)
                for (int ci = 0; ci < 8; ++ci) {
                  const std::int64_t ch = (cb0 + cbl) * 8 + ci;
                  if (ch < c->c) w = with_byte(w, ci, x[static_cast<std::size_t>((iy * c->w + xx) * c->c + ch)]);
                }
              mem[static_cast<std::size_t>(s.a_base + (cbl * t.rows + r) * wp + ix)] = w;
            }
      } else {
        const std::int64_t mb_n = ceil_div(t.tm, 8), kb_n = t.tk / 8;
        for (std::int64_t mb = 0; mb < mb_n; ++mb)
          for (std::int64_t kb = 0; kb < kb_n; ++kb)
            for (std::int64_t r = 0; r < 8; ++r) {
              Word w = 0;
              const std::int64_t m = t.m0 + mb * 8 + r;
              for (int ci = 0; ci < 8; ++ci) {
                const std::int64_t k = t.k0 + kb * 8 + ci;
                if (m < g.m && k < g.k) w = with_byte(w, ci, x[static_cast<std::size_t>(m * g.k + k)]);
              }
              mem[static_cast<std::size_t>(s.a_base + (mb * kb_n + kb) * 8 + r)] = w;
            }
      }
    }
    if (t.load_b) {
      auto wt = weight_of(net, j);
      MatrixDims stored = l.weight.off_chip() ? weight_dims(l) : output_dims(net.layers[static_cast<std::size_t>(l.weight.layer)]);
      auto mem = spaces_[static_cast<std::size_t>(space_index(s.b_space))].raw();
      const std::int64_t nb_n = ceil_div(t.tn, 8), kb_n = t.tk / 8;
      for (std::int64_t nb = 0; nb < nb_n; ++nb)
        for (std::int64_t kb = 0; kb < kb_n; ++kb)
          for (std::int64_t p = 0; p < 8; ++p) {
            Word w = 0;
            const std::int64_t k = t.k0 + kb * 8 + p;
            for (int ci = 0; ci < 8; ++ci) {
              const std::int64_t n = t.n0 + nb * 8 + ci;
              if (k < g.k && n < g.n) w = with_byte(w, ci, b_at(l, wt, stored, k, n));
            }
            mem[static_cast<std::size_t>(s.b_base + (nb * kb_n + kb) * 8 + p)] = w;
          }
    }
  }

  void dma_out(const LayerSchedule& s, const Tile& t, std::vector<std::int8_t>& out) {
    const auto& mem = spaces_[static_cast<std::size_t>(space_index(s.out_space))];
    const std::int64_t nb_n = ceil_div(t.tn, 8);
    for (std::int64_t i = 0; i < t.tm; ++i)
      for (std::int64_t jn = 0; jn < t.tn; ++jn) {
        const std::int64_t mb = i / 8, nb = jn / 8;
        const Word w = mem.raw()[static_cast<std::size_t>(s.out_base + (mb * nb_n + nb) * 8 + i % 8)];
        out[static_cast<std::size_t>((t.m0 + i) * s.gemm.n + t.n0 + jn)] = byte_of(w, static_cast<int>(jn % 8));
      }
  }

  void snapshot_resident(const LayerSchedule& s, std::vector<std::int8_t>& out) {
    const auto& mem = spaces_[0];
    const std::int64_t nb_full = ceil_div(s.gemm.n, 8);
    for (std::int64_t i = 0; i < s.gemm.m; ++i)
      for (std::int64_t jn = 0; jn < s.gemm.n; ++jn) {
        const Word w = mem.raw()[static_cast<std::size_t>(s.out_base + ((i / 8) * nb_full + jn / 8) * 8 + i % 8)];
        out[static_cast<std::size_t>(i * s.gemm.n + jn)] = byte_of(w, static_cast<int>(jn % 8));
      }
  }

  // ---- cycle-level compute phase ----------------------------------------

  TileResult simulate_tile(const Network& net, std::size_t j, const LayerSchedule& s, const Tile& t) {
    const auto& l = net.layers[j];
    const GemmShape g = s.gemm;
    const bool prefetch = cfg_.prefetch == PrefetchMode::Mgdp;
    const bool func = opt_.functional;
    const std::int64_t lat = cfg_.memory_latency;
    const int C = static_cast<int>(cfg_.streamer(StreamerRole::Psum).channel_count);
    const std::int64_t mb_n = ceil_div(t.tm, 8), nb_n = ceil_div(t.tn, 8), kb_n = t.tk / 8;
    const int sa = space_index(s.a_space), sb = space_index(s.b_space), sp = space_index(s.psum_space),
              so = space_index(s.out_space);

    if (opt_.check_regions)
      for (std::size_t i = 0; i < spaces_.size(); ++i) spaces_[i].set_region_check(&s.plans[i]);

    // Input streamer: one 64-bit channel per array row.
    std::vector<ReadChannel> in;
    in.reserve(8);
    const auto in_depth = cfg_.streamer(StreamerRole::Input).fifo_depth;
    for (int r = 0; r < 8; ++r) {
      Agu agu;
      if (auto* c = std::get_if<Conv2dShape>(&l.op)) {
        ConvTileView v{t.y0, t.rows, t.k0 / (c->fy * c->fx * 8), t.tk / (c->fy * c->fx * 8), t.m0, t.tm, nb_n};
        agu = Agu(conv_input_program(*c, v, r, s.a_base, s.zero_base));
      } else {
        std::int64_t row_blocks = kb_n, base = s.a_base;
        if (s.a_resident) {
          row_blocks = ceil_div(g.k, 8);
          base = s.a_base + ((t.m0 / 8) * row_blocks + t.k0 / 8) * 8;
        }
        agu = Agu(gemm_input_pattern({t.tm, t.tk, t.tn}, row_blocks, r, base));
      }
      in.emplace_back(r, sa, 64, AccessClass::Input, in_depth, std::move(agu));
    }

    // Weight streamer: one 512-bit channel over super-bank units.
    std::int64_t k_stride = 1, n_stride = kb_n, unit0 = 0;
    if (s.b_resident) {
      const auto pd = output_dims(net.layers[static_cast<std::size_t>(l.weight.layer)]);
      const std::int64_t nb_p = ceil_div(pd.cols, 8);
      if (s.b_transposed) {
        k_stride = 1;
        n_stride = nb_p;
        unit0 = (t.n0 / 8) * nb_p + t.k0 / 8;
      } else {
        k_stride = nb_p;
        n_stride = 1;
        unit0 = (t.k0 / 8) * nb_p + t.n0 / 8;
      }
    }
    const bool transpose = s.b_resident && s.b_transposed;
    ReadChannel wch(8, sb, 512, AccessClass::Weight, cfg_.streamer(StreamerRole::Weight).fifo_depth,
                    Agu(gemm_weight_pattern({t.tm, t.tk, t.tn}, k_stride, n_stride, unit0)), 8, s.b_base);

    // Psum streamer (preload) and output streamer (quantized write or spill).
    const bool preload = !t.first_k;
    std::vector<ReadChannel> ps;
    std::vector<WriteChannel> out;
    const std::int64_t psum_words_per_ch = 32 / C;
    for (int c = 0; c < C; ++c) {
      AffinePattern pp{s.psum_base + c, {{psum_words_per_ch, C}, {nb_n, 32}, {mb_n, nb_n * 32}}};
      if (preload)
        ps.emplace_back(9 + c, sp, 64, AccessClass::Psum, cfg_.streamer(StreamerRole::Psum).fifo_depth, Agu(pp));
      AffinePattern op;
      if (t.last_k) {
        std::int64_t row_stride = nb_n * 8, base = s.out_base;
        if (s.out_resident) {
          const std::int64_t nb_full = ceil_div(g.n, 8);
          row_stride = nb_full * 8;
          base = s.out_base + ((t.m0 / 8) * nb_full + t.n0 / 8) * 8;
        }
        op = {base + c, {{8 / C, C}, {nb_n, 8}, {mb_n, row_stride}}};
      } else {
        op = pp;
      }
      out.emplace_back(9 + C + c, t.last_k ? so : sp, t.last_k ? AccessClass::Output : AccessClass::Psum,
                       cfg_.streamer(StreamerRole::Output).fifo_depth, Agu(op));
    }

    MacArray arr;
    arr.configure({t.tm, t.tk, t.tn});
    const std::int64_t total_fires = mb_n * nb_n * kb_n;
    SimdUnit simd(cfg_.simd_lanes);

    struct Drain {
      bool active = false;
      std::vector<std::int32_t> acc;
      std::int64_t mb = 0, nb = 0;
      int total = 0, computed = 0, pushed = 0;
    } drain;
    std::vector<std::int32_t> stage(64, 0);
    std::vector<std::int64_t> staged(static_cast<std::size_t>(C), 0);
    auto stage_full = [&] {
      for (auto v : staged)
        if (v < psum_words_per_ch) return false;
      return true;
    };

    std::vector<std::vector<MemRequest>> reqs(spaces_.size());
    struct Target { int kind; int idx; };  // 0 input, 1 weight, 2 psum, 3 output
    std::vector<std::vector<Target>> targets(spaces_.size());
    std::vector<std::int8_t> ablk(64), bblk(64);
    TileResult res;
    Cycle cyc = 0;

    auto start_drain = [&] {
      drain.mb = arr.m_block();
      drain.nb = arr.n_block();
      auto acc = arr.drain();
      if (func) drain.acc = std::move(acc);
      drain.active = true;
      drain.total = t.last_k ? 8 : 32;
      drain.computed = 0;
      drain.pushed = 0;
    };
    auto word_for = [&](int idx) -> Word {
      if (!func) return 0;
      if (t.last_k) {
        Word w = 0;
        const std::int64_t row = drain.mb * 8 + idx;
        for (int jn = 0; jn < 8; ++jn) {
          const std::int64_t col = drain.nb * 8 + jn;
          std::int8_t v = 0;
          if (row < t.tm && col < t.tn) v = quantize(drain.acc[static_cast<std::size_t>(idx * 8 + jn)], l.quant);
          w = with_byte(w, jn, v);
        }
        return w;
      }
      const auto lo = static_cast<std::uint32_t>(drain.acc[static_cast<std::size_t>(idx * 2)]);
      const auto hi = static_cast<std::uint32_t>(drain.acc[static_cast<std::size_t>(idx * 2 + 1)]);
      return Word{lo} | (Word{hi} << 32);
    };

    while (true) {
      // (1) streamers present requests; the crossbar arbitrates per memory space.
      for (auto& v : reqs) v.clear();
      for (auto& v : targets) v.clear();
      for (int r = 0; r < 8; ++r)
        if (auto q = in[static_cast<std::size_t>(r)].request(prefetch)) {
          reqs[static_cast<std::size_t>(sa)].push_back(*q);
          targets[static_cast<std::size_t>(sa)].push_back({0, r});
        }
      if (auto q = wch.request(prefetch)) {
        reqs[static_cast<std::size_t>(sb)].push_back(*q);
        targets[static_cast<std::size_t>(sb)].push_back({1, 0});
      }
      for (int c = 0; c < C; ++c) {
        std::optional<MemRequest> pq, oq;
        if (preload) pq = ps[static_cast<std::size_t>(c)].request(prefetch);
        oq = out[static_cast<std::size_t>(c)].request();
        auto fw = time_mux_port(pq, oq, cfg_.crossbar_time_mux);
        if (fw.psum) {
          reqs[static_cast<std::size_t>(sp)].push_back(*fw.psum);
          targets[static_cast<std::size_t>(sp)].push_back({2, c});
        }
        if (fw.output) {
          const int os = out[static_cast<std::size_t>(c)].space();
          reqs[static_cast<std::size_t>(os)].push_back(*fw.output);
          targets[static_cast<std::size_t>(os)].push_back({3, c});
        }
      }
      for (std::size_t sp_i = 0; sp_i < spaces_.size(); ++sp_i) {
        if (reqs[sp_i].empty()) continue;
        auto ar = arbiters_[sp_i].arbitrate(reqs[sp_i]);
        auto& mem = spaces_[sp_i];
        for (std::size_t i = 0; i < reqs[sp_i].size(); ++i) {
          const auto& rq = reqs[sp_i][i];
          const auto tg = targets[sp_i][i];
          if (!ar.granted[i]) {
            if (tg.kind == 0) in[static_cast<std::size_t>(tg.idx)].deny();
            else if (tg.kind == 1) wch.deny();
            else if (tg.kind == 2) ps[static_cast<std::size_t>(tg.idx)].deny();
            continue;
          }
          if (opt_.trace) *opt_.trace << cyc << ",ch" << rq.channel << ",grant " << rq.word_addr << "\n";
          if (tg.kind == 3) {
            auto [addr, w] = out[static_cast<std::size_t>(tg.idx)].grant();
            if (func) mem.write(addr, w);
            continue;
          }
          std::vector<Word> data;
          if (func) {
            if (rq.width == 512) data = mem.read_wide(rq.word_addr);
            else data = {mem.read(rq.word_addr)};
          }
          if (tg.kind == 0) in[static_cast<std::size_t>(tg.idx)].grant(cyc, lat, std::move(data));
          else if (tg.kind == 1) wch.grant(cyc, lat, std::move(data));
          else ps[static_cast<std::size_t>(tg.idx)].grant(cyc, lat, std::move(data));
        }
      }

      // (2) partial sums land in the preload staging buffer.
      if (preload)
        for (int c = 0; c < C; ++c) {
          auto& ch = ps[static_cast<std::size_t>(c)];
          auto& n = staged[static_cast<std::size_t>(c)];
          if (n < psum_words_per_ch && ch.head_ready(cyc)) {
            auto d = ch.pop(cyc);
            if (func) {
              const std::int64_t q = c + n * C;
              stage[static_cast<std::size_t>(q * 2)] = static_cast<std::int32_t>(d[0] & 0xffffffffu);
              stage[static_cast<std::size_t>(q * 2 + 1)] = static_cast<std::int32_t>(d[0] >> 32);
            }
            ++n;
          }
        }

      // (3) the array fires when every operand head is ready.
      if (arr.block_complete() && !drain.active) start_drain();
      if (!arr.done() && !arr.block_complete()) {
        const bool need_pre = preload && arr.first_step();
        const bool acc_busy = !cfg_.double_buffer_accumulators && drain.active && arr.first_step();
        bool missing_plain = false, missing_conflict = false;
        for (const auto& ch : in)
          if (!ch.head_ready(cyc)) (ch.denied() ? missing_conflict : missing_plain) = true;
        if (!wch.head_ready(cyc)) (wch.denied() ? missing_conflict : missing_plain) = true;
        if (need_pre && !stage_full()) {
          bool dn = false;
          for (const auto& ch : ps) dn = dn || ch.denied();
          (dn ? missing_conflict : missing_plain) = true;
        }
        if (!missing_plain && !missing_conflict && !acc_busy) {
          for (int r = 0; r < 8; ++r) {
            auto d = in[static_cast<std::size_t>(r)].pop(cyc);
            if (func)
              for (int p = 0; p < 8; ++p) ablk[static_cast<std::size_t>(r * 8 + p)] = byte_of(d[0], p);
          }
          auto wd = wch.pop(cyc);
          if (func) {
            Block512 b{};
            std::copy(wd.begin(), wd.end(), b.begin());
            if (transpose) b = transpose8x8(b);
            for (int p = 0; p < 8; ++p)
              for (int jn = 0; jn < 8; ++jn) bblk[static_cast<std::size_t>(p * 8 + jn)] = byte_of(b[static_cast<std::size_t>(p)], jn);
            arr.fire({ablk, bblk, need_pre ? std::optional<std::span<const std::int32_t>>(stage) : std::nullopt});
          } else {
            arr.fire_timing_only();
          }
          if (need_pre) std::fill(staged.begin(), staged.end(), 0);
          ++res.fires;
          res.core_cycles = cyc + 1;
          if (opt_.trace) *opt_.trace << cyc << ",array,fire\n";
          if (arr.block_complete() && !drain.active) start_drain();
        } else {
          if (missing_plain) ++res.stalls.fifo_empty;
          else if (acc_busy) ++res.stalls.drain_backpressure;
          else ++res.stalls.bank_conflict;
          if (opt_.trace) *opt_.trace << cyc << ",array,stall\n";
        }
      } else if (res.fires < total_fires) {
        ++res.stalls.drain_backpressure;
        if (opt_.trace) *opt_.trace << cyc << ",array,stall\n";
      }

      // (4) quantization SIMD / spill path feeds the output streamer.
      if (drain.active) {
        const int batch = t.last_k ? static_cast<int>(simd.lanes() / 8) : C;
        if (drain.computed - drain.pushed < batch) drain.computed = std::min(drain.total, drain.pushed + batch);
        unsigned used = 0;
        while (drain.pushed < drain.computed) {
          const int c = drain.pushed % C;
          auto& ch = out[static_cast<std::size_t>(c)];
          if ((used >> c & 1u) || !ch.can_push()) break;
          ch.push(word_for(drain.pushed));
          used |= 1u << c;
          ++drain.pushed;
        }
        if (drain.pushed == drain.total) drain.active = false;
      }

      ++cyc;
      if (arr.done() && !drain.active && !arr.block_complete()) {
        bool idle = true;
        for (const auto& o : out) idle = idle && o.empty();
        if (idle) break;
      }
      if (cyc > opt_.max_cycles_per_tile) throw InvariantViolation(cyc, "tile did not finish (deadlock?) in layer " + l.name);
    }
    for (auto& s2 : spaces_) s2.set_region_check(nullptr);
    res.cycles = cyc;
    return res;
  }

  LayerReport base_report(const Network& net, std::size_t j) const {
    const auto& l = net.layers[j];
    const auto& s = sched_.layers[j];
    LayerReport r;
    r.name = l.name;
    r.kind = l.is_gemm() ? "gemm" : l.is_conv() ? "conv2d" : "maxpool";
    r.gemm = s.gemm;
    r.tile = s.dims;
    r.tiles = static_cast<std::int64_t>(s.tiles.size());
    r.footprint_bytes = s.footprint_bytes;
    auto tr = dma_traffic(s);
    r.dma_bytes_in = tr.total_in;
    r.dma_bytes_out = tr.total_out;
    r.transfers = tr.transfers;
    return r;
  }

  void finish_gemm_report(const LayerOp& l, LayerReport& r) const {
    r.useful_macs = layer_macs(l);
    r.mac_slots = r.ideal_cycles * cfg_.array.macs();
    r.spatial = static_cast<double>(r.useful_macs) / static_cast<double>(r.mac_slots);
    r.temporal = temporal_utilization(r);
  }

  // Tile-level serialized (or overlapped) composition of DMA and compute.
  std::int64_t compose(const std::vector<std::int64_t>& dma_in, const std::vector<std::int64_t>& comp,
                       const std::vector<std::int64_t>& dma_o) const {
    std::int64_t total = 0;
    const std::size_t n = comp.size();
    if (!cfg_.overlap_dma) {
      for (std::size_t i = 0; i < n; ++i) total += dma_in[i] + comp[i] + dma_o[i];
      return total;
    }
    if (n == 0) return 0;
    total = dma_in[0];
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t side = (i + 1 < n ? dma_in[i + 1] : 0) + (i > 0 ? dma_o[i - 1] : 0);
      total += std::max(comp[i], side);
    }
    return total + dma_o[n - 1];
  }

  LayerReport run_gemm_cycle(const Network& net, std::size_t j) {
    const auto& s = sched_.layers[j];
    LayerReport r = base_report(net, j);
    std::vector<std::int64_t> din, comp, dout;
    if (opt_.functional) outputs_[j].assign(static_cast<std::size_t>(s.gemm.m * s.gemm.n), 0);
    for (const auto& t : s.tiles) {
      if (opt_.functional) dma_in(net, j, s, t);
      auto tr = simulate_tile(net, j, s, t);
      r.ideal_cycles += tr.fires;
      r.compute_cycles += tr.core_cycles;
      r.drain_tail_cycles += tr.cycles - tr.core_cycles;
      r.stalls += tr.stalls;
      if (opt_.functional && t.last_k && !s.out_resident) dma_out(s, t, outputs_[j]);
      din.push_back(dma_cycles(t.bytes_a, cfg_.dma) + dma_cycles(t.bytes_b, cfg_.dma));
      comp.push_back(tr.cycles);
      dout.push_back(dma_cycles(t.bytes_out, cfg_.dma));
    }
    if (opt_.functional && s.out_resident) snapshot_resident(s, outputs_[j]);
    for (std::size_t i = 0; i < comp.size(); ++i) r.dma_cycles += din[i] + dout[i];
    r.total_cycles = compose(din, comp, dout);
    finish_gemm_report(net.layers[j], r);
    return r;
  }

  // Loop-controller-only model: one fire per cycle, no memory timing.
  LayerReport run_gemm_array_only(const Network& net, std::size_t j) {
    const auto& l = net.layers[j];
    const auto& s = sched_.layers[j];
    LayerReport r = base_report(net, j);
    MacArray arr(cfg_.array);
    const std::int64_t cq = cfg_.array.ku;
    const GemmShape g = array_gemm(l, cq);
    r.gemm = g;
    if (opt_.functional) {
      std::vector<std::int8_t> a(static_cast<std::size_t>(g.m * g.k)), b(static_cast<std::size_t>(g.k * g.n));
      auto x = input_of(net, j);
      auto w = weight_of(net, j);
      MatrixDims stored = l.weight.off_chip() ? weight_dims(l) : output_dims(net.layers[static_cast<std::size_t>(l.weight.layer)]);
      if (auto* c = std::get_if<Conv2dShape>(&l.op)) {
        // explicit im2col over the padded-channel reduction order
        for (std::int64_t p = 0; p < g.m; ++p)
          for (std::int64_t k = 0; k < g.k; ++k) {
            const std::int64_t ci = k % cq, rest = k / cq;
            const std::int64_t fx = rest % c->fx, fy = (rest / c->fx) % c->fy, cb = rest / (c->fx * c->fy);
            const std::int64_t ch = cb * cq + ci;
            const std::int64_t iy = (p / c->ow()) * c->stride + fy - c->pad, ix = (p % c->ow()) * c->stride + fx - c->pad;
            std::int8_t v = 0;
            if (ch < c->c && iy >= 0 && iy < c->h && ix >= 0 && ix < c->w) v = x[static_cast<std::size_t>((iy * c->w + ix) * c->c + ch)];
            a[static_cast<std::size_t>(p * g.k + k)] = v;
          }
      } else {
        std::copy(x.begin(), x.end(), a.begin());
      }
      for (std::int64_t k = 0; k < g.k; ++k)
        for (std::int64_t n = 0; n < g.n; ++n) b[static_cast<std::size_t>(k * g.n + n)] = b_at(l, w, stored, k, n, cq);
      auto acc = run_array_gemm(arr, g, a, b);
      outputs_[j] = reference::requantize(acc, l.quant);
    } else {
      arr.configure(g);
      while (!arr.done()) {
        arr.fire_timing_only();
        if (arr.block_complete()) arr.drain();
      }
    }
    r.ideal_cycles = arr.fires();
    r.compute_cycles = arr.fires();
    std::vector<std::int64_t> din, comp, dout;
    for (const auto& t : s.tiles) {
      din.push_back(dma_cycles(t.bytes_a, cfg_.dma) + dma_cycles(t.bytes_b, cfg_.dma));
      dout.push_back(dma_cycles(t.bytes_out, cfg_.dma));
      comp.push_back(0);
    }
    if (!comp.empty()) comp[0] = r.compute_cycles;
    for (std::size_t i = 0; i < comp.size(); ++i) r.dma_cycles += din[i] + dout[i];
    r.total_cycles = compose(din, comp, dout);
    finish_gemm_report(net.layers[j], r);
    return r;
  }

  LayerReport run_maxpool(const Network& net, std::size_t j) {
    const auto& l = net.layers[j];
    const auto& s = sched_.layers[j];
    const auto& p = std::get<MaxPoolShape>(l.op);
    LayerReport r = base_report(net, j);
    r.compute_cycles = 0;
    const std::int64_t pool_cycles = maxpool_cycles(p);
    if (opt_.functional) outputs_[j] = maxpool(input_of(net, j), p).out;
    for (auto c : s.in_chunks) r.dma_cycles += dma_cycles(c, cfg_.dma);
    for (auto c : s.out_chunks) r.dma_cycles += dma_cycles(c, cfg_.dma);
    r.total_cycles = r.dma_cycles + pool_cycles;
    return r;
  }

  void aggregate(SimReport& rep) const {
    double log_s = 0, log_t = 0, mac_w = 0;
    int n = 0;
    std::int64_t macs = 0;
    bool ok = true, any_check = false;
    for (const auto& l : rep.layers) {
      rep.total_latency += l.total_cycles;
      rep.compute_cycles += l.compute_cycles;
      rep.dma_cycles += l.dma_cycles;
      rep.ideal_cycles += l.ideal_cycles;
      rep.dma_bytes += l.dma_bytes_in + l.dma_bytes_out;
      rep.useful_macs += l.useful_macs;
      rep.mac_slots += l.mac_slots;
      rep.stalls += l.stalls;
      if (l.functional_ok) {
        any_check = true;
        ok = ok && *l.functional_ok;
      }
      if (l.spatial) {
        log_s += std::log(*l.spatial);
        log_t += std::log(*l.temporal);
        mac_w += *l.spatial * static_cast<double>(l.useful_macs);
        macs += l.useful_macs;
        ++n;
      }
    }
    rep.other_cycles = rep.total_latency - rep.compute_cycles - rep.dma_cycles;
    if (n > 0) {
      rep.spatial = static_cast<double>(rep.useful_macs) / static_cast<double>(rep.mac_slots);
      rep.spatial_mac_weighted = mac_w / static_cast<double>(macs);
      rep.spatial_geomean = std::exp(log_s / n);
      rep.temporal = temporal_utilization(rep.ideal_cycles, rep.compute_cycles);
      rep.temporal_geomean = std::exp(log_t / n);
    }
    if (any_check) rep.functional_ok = ok;
  }

  SimConfig cfg_;
  RunOptions opt_;
  NetworkSchedule sched_;
  std::vector<BankArray> spaces_;
  std::vector<BankArbiter> arbiters_;
  std::vector<std::vector<std::int8_t>> outputs_;
  std::vector<std::vector<std::int8_t>> off_in_, off_w_;
};

inline SimReport run(const Network& net, const SimConfig& cfg, RunOptions opt = {}) { return Engine(cfg, opt).run(net); }

struct RatioRow {
  std::string layer;
  double spatial = 1, temporal = 1, latency_speedup = 1;
};

struct RatioTable {
  std::vector<RatioRow> rows;
  RatioRow geomean{"geomean"};
  RatioRow aggregate{"aggregate"};
};

// Per-layer ratios of `proposed` over `baseline` utilizations, and
// baseline/proposed latency (speedup).
inline RatioTable compare(const SimReport& proposed, const SimReport& baseline) {
  if (proposed.workload != baseline.workload || proposed.layers.size() != baseline.layers.size())
    throw std::invalid_argument("compare: reports are for different workloads");
  RatioTable t;
  double ls = 0, lt = 0, ll = 0;
  int n = 0, nl = 0;
  for (std::size_t i = 0; i < proposed.layers.size(); ++i) {
    const auto& p = proposed.layers[i];
    const auto& b = baseline.layers[i];
    if (p.name != b.name) throw std::invalid_argument("compare: layer mismatch at " + p.name);
    RatioRow r{p.name};
    if (p.spatial && b.spatial) {
      r.spatial = *p.spatial / *b.spatial;
      r.temporal = *p.temporal / *b.temporal;
      ls += std::log(r.spatial);
      lt += std::log(r.temporal);
      ++n;
    }
    r.latency_speedup = p.total_cycles > 0 ? static_cast<double>(b.total_cycles) / static_cast<double>(p.total_cycles) : 1.0;
    ll += std::log(r.latency_speedup);
    ++nl;
    t.rows.push_back(r);
  }
  if (n > 0) {
    t.geomean.spatial = std::exp(ls / n);
    t.geomean.temporal = std::exp(lt / n);
  }
  if (nl > 0) t.geomean.latency_speedup = std::exp(ll / nl);
  t.aggregate.spatial = proposed.spatial / baseline.spatial;
  t.aggregate.temporal = proposed.temporal / baseline.temporal;
  t.aggregate.latency_speedup = static_cast<double>(baseline.total_latency) / static_cast<double>(proposed.total_latency);
  return t;
}

}  // namespace voltrasim
