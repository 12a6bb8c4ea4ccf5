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

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "oracle.hpp"
#include "voltrasim/memory.hpp"

using namespace voltrasim;

namespace {

MemRequest rd(int ch, std::int64_t addr, int width = 64) { return {ch, addr, width, AccessKind::Read, AccessClass::Input}; }

}  // namespace

TEST(Banks, LowOrderInterleaving) {
  BankArray m(32, 512);
  EXPECT_EQ(m.bank_of(37), 5);
  EXPECT_EQ(m.row_of(37), 1);
  EXPECT_EQ(m.words(), 16384);
}

TEST(Banks, WriteThenRead) {
  BankArray m(32, 16);
  m.write(77, 0x0123456789abcdefULL);
  EXPECT_EQ(m.read(77), 0x0123456789abcdefULL);
}

TEST(Banks, WideWriteThenNarrowReads) {
  BankArray m(32, 16);
  std::vector<Word> w{1, 2, 3, 4, 5, 6, 7, 8};
  m.write_wide(40, w);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(m.read(40 + i), w[static_cast<std::size_t>(i)]);
  EXPECT_EQ(m.read_wide(40), w);
  EXPECT_THROW(m.read_wide(41), std::invalid_argument);
}

TEST(Banks, OutOfRangeAndRegionViolation) {
  BankArray m(32, 4);
  EXPECT_THROW(m.read(128), std::out_of_range);
  EXPECT_THROW(m.write(-1, 0), std::out_of_range);
  AllocationPlan plan(128);
  plan.add("a", {0, 16});
  m.set_region_check(&plan);
  EXPECT_NO_THROW(m.read(15));
  EXPECT_THROW(m.read(16), RegionViolation);
  EXPECT_THROW(m.read_wide(8 * 2), RegionViolation);
}

TEST(Banks, DumpIsLittleEndian) {
  BankArray m(8, 1);
  m.write(0, 0x0807060504030201ULL);
  m.write(7, 0xff);
  const auto path = std::filesystem::temp_directory_path() / "voltrasim_dump.bin";
  m.dump(path.string());
  std::ifstream f(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ASSERT_EQ(bytes.size(), 64u);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(bytes[static_cast<std::size_t>(i)], i + 1);
  EXPECT_EQ(bytes[56], 0xff);
  EXPECT_EQ(bytes[57], 0);
  std::filesystem::remove(path);
}

TEST(Arbiter, DisjointBanksBothGranted) {
  BankArbiter arb(32, 8, 4);
  std::vector<MemRequest> r{rd(0, 3), rd(1, 7)};
  auto g = arb.arbitrate(r);
  EXPECT_EQ(g.grants, 2);
  EXPECT_EQ(g.stalls, 0);
}

TEST(Arbiter, SameBankAlternates) {
  BankArbiter arb(32, 8, 4);
  std::vector<MemRequest> r{rd(0, 3), rd(1, 35)};
  auto g1 = arb.arbitrate(r);
  EXPECT_EQ(g1.grants, 1);
  EXPECT_EQ(g1.stalls, 1);
  const std::size_t loser = g1.granted[0] ? 1 : 0;
  std::vector<MemRequest> retry{r[loser]};
  retry.push_back(r[1 - loser]);
  auto g2 = arb.arbitrate(retry);
  EXPECT_TRUE(g2.granted[0]);
}

// A wide read on banks 0-7 and a narrow read on bank 5: one wins, and
// both are served within two cycles from every arbiter state.
TEST(Arbiter, WideAgainstNarrowTakesTwoCycles) {
  for (int p = 0; p < 3; ++p) {
    BankArbiter arb(32, 8, 3);
    for (int warm = 0; warm < p; ++warm) {
      std::vector<MemRequest> w{rd(warm, 5)};
      arb.arbitrate(w);
    }
    std::vector<MemRequest> r{rd(0, 0, 512), rd(1, 5)};
    auto g1 = arb.arbitrate(r);
    ASSERT_EQ(g1.grants, 1);
    std::vector<MemRequest> rest{g1.granted[0] ? r[1] : r[0]};
    EXPECT_EQ(arb.arbitrate(rest).grants, 1);
  }
}

TEST(Arbiter, MisalignedWideRejected) {
  BankArbiter arb(32, 8, 2);
  std::vector<MemRequest> r{rd(0, 4, 512)};
  EXPECT_THROW(arb.arbitrate(r), std::invalid_argument);
}

TEST(Arbiter, BankGrantsAtMostOncePerCycle) {
  std::mt19937_64 rng(17);
  BankArbiter arb(32, 8, 12);
  for (int cyc = 0; cyc < 1000; ++cyc) {
    std::vector<MemRequest> r;
    for (int ch = 0; ch < 12; ++ch) {
      if (oracle::pick(rng, 0, 2) == 0) continue;
      const bool wide = oracle::pick(rng, 0, 3) == 0;
      r.push_back(wide ? rd(ch, 8 * oracle::pick(rng, 0, 15), 512) : rd(ch, oracle::pick(rng, 0, 127)));
    }
    auto g = arb.arbitrate(r);
    std::vector<int> used(32, 0);
    std::int64_t grants = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!g.granted[i]) continue;
      ++grants;
      const std::int64_t b = r[i].word_addr % 32;
      for (std::int64_t k = 0; k < (r[i].width == 512 ? 8 : 1); ++k) ++used[static_cast<std::size_t>(b + k)];
    }
    for (int u : used) ASSERT_LE(u, 1) << "cycle " << cyc;
    ASSERT_EQ(g.grants, grants);
    ASSERT_EQ(g.grants + g.stalls, static_cast<std::int64_t>(r.size()));
    if (!r.empty()) {
      ASSERT_GE(g.grants, 1);
    }
  }
}

// Every channel holds its address until granted; each must be served
// within as many cycles as there are contending channels.
TEST(Arbiter, PersistentRequestsAreNotStarved) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const int channels = static_cast<int>(oracle::pick(rng, 2, 10));
    BankArbiter arb(16, 8, channels);
    std::vector<MemRequest> pending(static_cast<std::size_t>(channels));
    std::vector<int> waited(static_cast<std::size_t>(channels), 0);
    auto fresh = [&](int ch) {
      return oracle::pick(rng, 0, 2) == 0 ? rd(ch, 8 * oracle::pick(rng, 0, 1), 512) : rd(ch, oracle::pick(rng, 0, 15));
    };
    for (int ch = 0; ch < channels; ++ch) pending[static_cast<std::size_t>(ch)] = fresh(ch);
    for (int cyc = 0; cyc < 60; ++cyc) {
      auto g = arb.arbitrate(pending);
      for (int ch = 0; ch < channels; ++ch) {
        auto& w = waited[static_cast<std::size_t>(ch)];
        if (g.granted[static_cast<std::size_t>(ch)]) {
          w = 0;
          pending[static_cast<std::size_t>(ch)] = fresh(ch);
        } else {
          ASSERT_LT(++w, channels) << "trial " << trial << " channel " << ch;
        }
      }
    }
  }
}

TEST(TimeMux, PsumWins) {
  auto p = rd(0, 1);
  p.cls = AccessClass::Psum;
  MemRequest o{1, 2, 64, AccessKind::Write, AccessClass::Output};
  auto f = time_mux_port(p, o);
  EXPECT_TRUE(f.psum);
  EXPECT_FALSE(f.output);
  f = time_mux_port(std::nullopt, o);
  EXPECT_TRUE(f.output);
  f = time_mux_port(p, o, false);
  EXPECT_TRUE(f.psum && f.output);
}

TEST(TimeMux, PsumPriorityOnRandomPairs) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 1000; ++i) {
    std::optional<MemRequest> p, o;
    if (oracle::pick(rng, 0, 1)) p = MemRequest{0, oracle::pick(rng, 0, 99), 64, AccessKind::Read, AccessClass::Psum};
    if (oracle::pick(rng, 0, 1)) o = MemRequest{1, oracle::pick(rng, 0, 99), 64, AccessKind::Write, AccessClass::Output};
    auto f = time_mux_port(p, o);
    ASSERT_LE(f.psum.has_value() + f.output.has_value(), 1);
    if (p) {
      ASSERT_TRUE(f.psum);
      ASSERT_EQ(f.psum->word_addr, p->word_addr);
    } else if (o) {
      ASSERT_TRUE(f.output);
    }
  }
}

// A drain burst of 64 output words against psum preloads on alternate
// cycles: writes land only in psum-free cycles.
TEST(TimeMux, DrainBurstFillsGaps) {
  int outputs = 0, cyc = 0;
  while (outputs < 64) {
    std::optional<MemRequest> p;
    if (cyc % 2 == 0) p = MemRequest{0, cyc, 64, AccessKind::Read, AccessClass::Psum};
    auto f = time_mux_port(p, MemRequest{1, outputs, 64, AccessKind::Write, AccessClass::Output});
    if (f.output) {
      EXPECT_FALSE(p.has_value());
      ++outputs;
    }
    ++cyc;
  }
  EXPECT_EQ(cyc, 128);
}

TEST(Allocation, RandomPlansStayDisjoint) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 1000; ++t) {
    AllocationPlan plan(512);
    std::vector<Region> kept;
    for (int i = 0; i < 12; ++i) {
      Region r{oracle::pick(rng, 0, 520), oracle::pick(rng, 0, 96)};
      bool bad = r.end() > 512;
      for (const auto& k : kept) bad = bad || (r.length > 0 && k.length > 0 && r.base < k.end() && k.base < r.end());
      const std::string id = "op" + std::to_string(i);
      if (bad) {
        ASSERT_ANY_THROW(plan.add(id, r));
      } else {
        ASSERT_NO_THROW(plan.add(id, r));
        kept.push_back(r);
      }
      ASSERT_TRUE(plan.disjoint());
    }
    std::int64_t used = 0;
    for (const auto& k : kept) used += k.length;
    ASSERT_EQ(plan.used_words(), used);
  }
}

TEST(Allocation, DuplicateIdRejected) {
  AllocationPlan plan(64);
  plan.add("a", {0, 8});
  EXPECT_THROW(plan.add("a", {8, 8}), std::logic_error);
  EXPECT_THROW(plan.at("b"), std::out_of_range);
}
