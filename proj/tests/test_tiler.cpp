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
#include <random>

#include "oracle.hpp"
#include "voltrasim/io.hpp"
#include "voltrasim/tiler.hpp"

using namespace voltrasim;

namespace {

LayerOp gemm(std::int64_t m, std::int64_t k, std::int64_t n, OperandSource in = {}, OperandSource w = {}) {
  return LayerOp{"g", GemmShape{m, k, n}, {}, in, w, {}};
}

Network single(const LayerOp& l) { return Network{"one", "", {l}}; }

SimConfig mode(MemoryMode m) {
  auto c = default_config();
  c.memory_mode = m;
  return c;
}

LayerOp random_layer(std::mt19937_64& rng, std::int64_t max_dim) {
  if (oracle::pick(rng, 0, 2) == 0) {
    for (;;) {
      Conv2dShape c{oracle::pick(rng, 1, 16), oracle::pick(rng, 1, 16), oracle::pick(rng, 1, 32), oracle::pick(rng, 1, 32),
                    oracle::pick(rng, 1, 3),  oracle::pick(rng, 1, 3),  oracle::pick(rng, 1, 2),  oracle::pick(rng, 0, 1)};
      if (c.integral()) return LayerOp{"c", c, {}, {}, {}, {}};
    }
  }
  return gemm(oracle::pick(rng, 1, max_dim), oracle::pick(rng, 1, max_dim), oracle::pick(rng, 1, max_dim));
}

// Worst-case tile footprint recomputed from the layer and dims alone.
std::int64_t tile_footprint(const LayerOp& l, const TileDims& d) {
  const std::int64_t tmp = (d.tm + 7) / 8 * 8, tnp = (d.tn + 7) / 8 * 8;
  std::int64_t a = tmp * d.tk;
  if (auto* c = std::get_if<Conv2dShape>(&l.op)) {
    std::int64_t rows = 0;
    for (std::int64_t p0 = 0; p0 < c->oh() * c->ow(); ++p0) {
      const std::int64_t last = std::min(p0 + d.tm, c->oh() * c->ow()) - 1;
      rows = std::max(rows, (last / c->ow() - p0 / c->ow()) * c->stride + c->fy);
    }
    a = rows * c->padded_w() * (d.tk / (c->fy * c->fx));
  }
  return a + d.tk * tnp + 5 * tmp * tnp + 64;
}

}  // namespace

TEST(Footprint, Examples) {
  EXPECT_EQ(footprint(8, 8, 8), 512);
  EXPECT_EQ(footprint(1, 1, 1), 71);
  EXPECT_EQ(footprint(64, 512, 64), 86080);
}

TEST(TileLayer, FullKWhenItFits) {
  auto d = tile_layer(gemm(64, 512, 64), mode(MemoryMode::Shared));
  EXPECT_EQ(d, (TileDims{64, 512, 64}));
}

// A 64x512 input exceeds one 32 KB buffer. Full K still fits with a
// shorter m extent, so the layer splits along m instead of K.
TEST(TileLayer, SeparatedBuffersSplitOutputTile) {
  const auto cfg = mode(MemoryMode::Separated);
  auto d = tile_layer(gemm(64, 512, 64), cfg);
  EXPECT_EQ(d.tk, 512);
  EXPECT_LT(d.tm, 64);
  EXPECT_LE(d.tm * d.tk + 64, cfg.separated.input);
  EXPECT_LE(d.tk * d.tn, cfg.separated.weight);
  auto ns = tile_network(single(gemm(64, 512, 64)), cfg);
  EXPECT_GT(ns.layers[0].tiles.size(), 1u);
}

TEST(TileLayer, TightBuffersSplitK) {
  auto cfg = mode(MemoryMode::Separated);
  cfg.separated = {4096, 4096, 4096, 4096};
  auto d = tile_layer(gemm(64, 1024, 64), cfg);
  EXPECT_LT(d.tk, 1024);
  EXPECT_EQ(d.tk % 8, 0);
  auto ns = tile_network(single(gemm(64, 1024, 64)), cfg);
  bool split = false;
  for (const auto& t : ns.layers[0].tiles) split = split || !t.first_k || !t.last_k;
  EXPECT_TRUE(split);
}

TEST(TileLayer, TinyGemmIsOneTile) {
  for (auto m : {MemoryMode::Shared, MemoryMode::Separated}) {
    auto ns = tile_network(single(gemm(8, 8, 8)), mode(m));
    ASSERT_EQ(ns.layers[0].tiles.size(), 1u);
    EXPECT_EQ(ns.layers[0].dims, (TileDims{8, 8, 8}));
  }
}

TEST(TileLayer, CapacityError) {
  auto c = default_config();
  c.memory.words_per_bank = 1;
  EXPECT_THROW(tile_network(single(gemm(8, 8, 8)), c), CapacityError);
  c = mode(MemoryMode::Separated);
  c.separated.psum = 128;
  EXPECT_THROW(tile_network(single(gemm(8, 8, 8)), c), CapacityError);
}

// Every tile of every schedule fits, tk covers K whenever the full-K
// tile of the same m/n would fit, and plans stay disjoint.
TEST(TileLayer, SchedulesRespectCapacity) {
  std::mt19937_64 rng(107);
  for (int t = 0; t < 1000; ++t) {
    const auto l = random_layer(rng, 600);
    for (auto m : {MemoryMode::Shared, MemoryMode::Separated}) {
      auto cfg = mode(m);
      cfg.memory.words_per_bank = 64 * oracle::pick(rng, 1, 8);
      NetworkSchedule ns;
      try {
        ns = tile_network(single(l), cfg);
      } catch (const CapacityError&) {
        continue;
      }
      const auto& s = ns.layers[0];
      const auto fp = tile_footprint(l, s.dims);
      if (m == MemoryMode::Shared) {
        ASSERT_LE(fp, cfg.memory.total_bytes());
      } else {
        ASSERT_LE(fp, cfg.separated.input + cfg.separated.weight + cfg.separated.psum + cfg.separated.output);
        ASSERT_LE(4 * ((s.dims.tm + 7) / 8 * 8) * ((s.dims.tn + 7) / 8 * 8), cfg.separated.psum);
      }
      for (const auto& p : s.plans) ASSERT_TRUE(p.disjoint());
      std::int64_t macs = 0;
      for (const auto& tile : s.tiles) macs += tile.tm * tile.tk * tile.tn;
      ASSERT_EQ(macs, s.gemm.m * ((s.gemm.k + 7) / 8 * 8) * s.gemm.n);
      const std::int64_t kp = (s.gemm.k + 7) / 8 * 8;
      if (m == MemoryMode::Shared && l.is_gemm() && tile_footprint(l, {8, kp, 8}) <= cfg.memory.total_bytes()) {
        ASSERT_EQ(s.dims.tk, kp);
      }
      std::int64_t covered = 0;
      for (const auto& tile : s.tiles)
        if (tile.first_k) covered += tile.tm * tile.tn;
      ASSERT_EQ(covered, s.gemm.m * s.gemm.n);
    }
  }
}

TEST(Allocation, SingleGemmHasFourRegionsAndZero) {
  auto ns = tile_network(single(gemm(32, 32, 32)), mode(MemoryMode::Shared));
  const auto& p = ns.layers[0].plans.at(0);
  for (const char* id : {"zero", "a", "b", "psum", "out"}) EXPECT_TRUE(p.has(id)) << id;
  EXPECT_TRUE(p.disjoint());
}

TEST(Allocation, ChainedGemmReadsProducerRegion) {
  Network net{"chain", "", {gemm(32, 32, 32), gemm(32, 32, 16, {0, false})}};
  auto ns = tile_network(net, mode(MemoryMode::Shared));
  ASSERT_TRUE(ns.resident[0]);
  EXPECT_EQ(ns.layers[1].a_base, ns.resident_region[0].base);
  EXPECT_EQ(ns.layers[0].out_base, ns.resident_region[0].base);
  EXPECT_TRUE(ns.layers[1].plans[0].has("L0.out"));
}

TEST(Allocation, MhaSharedKeepsIntermediatesOnChip) {
  const auto net = mha_sequence(64, 768, 64);
  auto ns = tile_network(net, mode(MemoryMode::Shared));
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(ns.resident[static_cast<std::size_t>(i)]) << i;
  // Q, K, V and S live together while S and O run.
  const auto& plan = ns.layers[3].plans[0];
  for (const char* id : {"L0.out", "L1.out", "L2.out", "L3.out"}) EXPECT_TRUE(plan.has(id)) << id;
  for (std::size_t j = 3; j < 5; ++j) {
    const auto t = dma_traffic(ns.layers[j]);
    EXPECT_EQ(t.input_bytes + t.weight_bytes + t.output_bytes, 0) << j;
  }
}

TEST(Traffic, SingleTileCounts) {
  auto t = dma_traffic(tile_network(single(gemm(8, 8, 8)), mode(MemoryMode::Shared)));
  EXPECT_EQ(t.input_bytes, 64);
  EXPECT_EQ(t.weight_bytes, 64);
  EXPECT_EQ(t.output_bytes, 64);
  EXPECT_EQ(t.psum_bytes, 0);
  EXPECT_EQ(t.total(), 192);
}

TEST(Traffic, SeparatedIntermediateRoundTrips) {
  Network net{"chain", "", {gemm(16, 16, 16), gemm(16, 16, 8, {0, false})}};
  auto sep = dma_traffic(tile_network(net, mode(MemoryMode::Separated)));
  auto sh = dma_traffic(tile_network(net, mode(MemoryMode::Shared)));
  // Layer 0 output (256 B) is stored once and reloaded once.
  EXPECT_EQ(sep.total() - sh.total(), 2 * 256);
  EXPECT_EQ(sep.output_bytes, 256 + 128);
  EXPECT_EQ(sep.input_bytes, 256 + 256);
}

TEST(Traffic, EmptyScheduleIsZero) {
  auto t = dma_traffic(NetworkSchedule{});
  EXPECT_EQ(t.total(), 0);
  EXPECT_EQ(t.transfers, 0);
}

TEST(Traffic, TotalsArePerTileSums) {
  std::mt19937_64 rng(109);
  for (int t = 0; t < 1000; ++t) {
    const auto l = random_layer(rng, 300);
    auto cfg = mode(oracle::pick(rng, 0, 1) ? MemoryMode::Shared : MemoryMode::Separated);
    const auto ns = tile_network(single(l), cfg);
    const auto r = dma_traffic(ns);
    std::int64_t in = 0, out = 0;
    for (auto b : r.bytes_in) in += b;
    for (auto b : r.bytes_out) out += b;
    ASSERT_EQ(in, r.total_in);
    ASSERT_EQ(out, r.total_out);
    ASSERT_EQ(r.total(), tiling_traffic(l, ns.layers[0].dims, false, false, false));
  }
}

// Input pixels some window actually covers; strided 1x1 convs skip rows
// and columns.
std::int64_t touched_input_pixels(const LayerOp& l) {
  const auto* c = std::get_if<Conv2dShape>(&l.op);
  if (!c) return input_dims(l).rows;
  std::vector<char> hit(static_cast<std::size_t>(c->h * c->w), 0);
  for (std::int64_t oy = 0; oy < c->oh(); ++oy)
    for (std::int64_t ox = 0; ox < c->ow(); ++ox)
      for (std::int64_t dy = 0; dy < c->fy; ++dy)
        for (std::int64_t dx = 0; dx < c->fx; ++dx) {
          const auto y = oy * c->stride + dy - c->pad, x = ox * c->stride + dx - c->pad;
          if (y >= 0 && y < c->h && x >= 0 && x < c->w) hit[static_cast<std::size_t>(y * c->w + x)] = 1;
        }
  return std::count(hit.begin(), hit.end(), 1);
}

// Loaded input bytes never fall below the unique bytes the layer reads.
TEST(Traffic, ReloadFactorAtLeastOne) {
  std::mt19937_64 rng(113);
  for (int t = 0; t < 1000; ++t) {
    const auto l = random_layer(rng, 600);
    auto cfg = mode(oracle::pick(rng, 0, 1) ? MemoryMode::Shared : MemoryMode::Separated);
    const auto r = dma_traffic(tile_network(single(l), cfg));
    const auto in = input_dims(l), w = weight_dims(l);
    ASSERT_GE(r.input_bytes, touched_input_pixels(l) * in.cols);
    ASSERT_GE(r.weight_bytes, w.rows * w.cols);
    ASSERT_EQ(r.output_bytes, output_dims(l).rows * output_dims(l).cols);
  }
}

TEST(Tiling, MoreCapacityNeverAddsTraffic) {
  std::mt19937_64 rng(127);
  for (int t = 0; t < 1000; ++t) {
    const auto l = random_layer(rng, 700);
    auto small = mode(MemoryMode::Shared), big = small;
    small.memory.words_per_bank = 16 * oracle::pick(rng, 2, 32);
    big.memory.words_per_bank = small.memory.words_per_bank + 16 * oracle::pick(rng, 1, 32);
    std::int64_t a = 0;
    try {
      a = dma_traffic(tile_network(single(l), small)).total();
    } catch (const CapacityError&) {
      continue;
    }
    const auto b = dma_traffic(tile_network(single(l), big)).total();
    ASSERT_LE(b, a) << "words/bank " << small.memory.words_per_bank << " -> " << big.memory.words_per_bank;
  }
}

TEST(Tiling, GreedyWithinFivePercentOfExhaustive) {
  std::mt19937_64 rng(131);
  for (int t = 0; t < 1000; ++t) {
    const auto l = random_layer(rng, 256);
    auto cfg = mode(oracle::pick(rng, 0, 1) ? MemoryMode::Shared : MemoryMode::Separated);
    NetworkSchedule g;
    try {
      g = tile_network(single(l), cfg);
    } catch (const CapacityError&) {
      continue;
    }
    cfg.exhaustive_tiler = true;
    const auto e = tile_network(single(l), cfg);
    const auto gt = dma_traffic(g).total(), et = dma_traffic(e).total();
    ASSERT_LE(et, gt);
    ASSERT_LE(static_cast<double>(gt), 1.05 * static_cast<double>(et)) << l.name;
  }
}

TEST(Access, MhaComparison) {
  const auto a = mha_access_compare();
  EXPECT_GT(a.shared, 0);
  EXPECT_GT(a.separated, 0);
  EXPECT_LE(a.shared, a.separated);
}

TEST(Access, SharedNeverExceedsSeparatedOnBuiltins) {
  for (const auto& net : load_builtin_workloads()) {
    const auto sh = access_count(net, tile_network(net, mode(MemoryMode::Shared)));
    const auto sep = access_count(net, tile_network(net, mode(MemoryMode::Separated)));
    EXPECT_LE(sh, sep) << net.name;
  }
}

TEST(Footprint, Resnet50SharedUnderSeparatedReservation) {
  const auto net = load_builtin("resnet50");
  const auto cfg = mode(MemoryMode::Separated);
  const auto ns = tile_network(net, cfg);
  std::int64_t used = 0, reserved = 0;
  for (const auto& s : ns.layers) {
    if (s.tiles.empty()) continue;
    used += s.footprint_bytes;
    reserved += cfg.separated.input + cfg.separated.weight + cfg.separated.psum + cfg.separated.output;
  }
  EXPECT_LE(static_cast<double>(used) / static_cast<double>(reserved), 0.55);
}
