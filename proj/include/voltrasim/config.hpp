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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voltrasim/common.hpp"

namespace voltrasim {

struct ArrayGeometry {
  std::int64_t mu = 8, ku = 8, nu = 8;

  std::int64_t macs() const { return mu * ku * nu; }
  bool operator==(const ArrayGeometry&) const = default;
};

// Baseline 2D array with the same MAC budget and no spatial K reduction.
inline constexpr ArrayGeometry kBaseline2D{16, 1, 32};

struct MemoryGeometry {
  std::int64_t banks = 32;
  std::int64_t word_bits = 64;
  std::int64_t words_per_bank = 512;
  std::int64_t super_bank_width = 8;

  std::int64_t total_words() const { return banks * words_per_bank; }
  std::int64_t total_bytes() const { return banks * word_bits * words_per_bank / 8; }
  bool operator==(const MemoryGeometry&) const = default;
};

enum class StreamerRole { Input, Weight, Psum, Output, SimdIn, SimdOut, Reshuffler };
inline constexpr std::size_t kStreamerRoles = 7;
inline constexpr std::array<const char*, kStreamerRoles> kStreamerRoleNames = {
    "input", "weight", "psum", "output", "simd_in", "simd_out", "reshuffler"};

struct StreamerSpec {
  std::int64_t agu_dims = 1;
  std::int64_t fifo_depth = 1;
  std::int64_t channel_width_bits = 64;
  std::int64_t channel_count = 1;
  bool has_transposer = false;
  bool present = true;
  bool operator==(const StreamerSpec&) const = default;
};

struct DmaConfig {
  std::int64_t bandwidth_bits = 64;  // per cycle
  std::int64_t latency = 100;        // fixed cycles per transfer
  bool operator==(const DmaConfig&) const = default;
};

enum class MemoryMode { Shared, Separated };
enum class PrefetchMode { Mgdp, DemandFetch };

struct SeparatedBuffers {
  std::int64_t input = 32768;
  std::int64_t weight = 32768;
  std::int64_t psum = 32768;
  std::int64_t output = 32768;

  std::int64_t sum() const { return input + weight + psum + output; }
  bool operator==(const SeparatedBuffers&) const = default;
};

struct SimConfig {
  ArrayGeometry array;
  std::int64_t mac_budget = 512;
  MemoryGeometry memory;
  std::int64_t memory_latency = 1;  // grant to data-in-FIFO
  std::array<StreamerSpec, kStreamerRoles> streamers{};
  DmaConfig dma;
  MemoryMode memory_mode = MemoryMode::Shared;
  SeparatedBuffers separated;
  PrefetchMode prefetch = PrefetchMode::Mgdp;
  std::int64_t simd_lanes = 8;
  bool crossbar_time_mux = true;
  bool double_buffer_accumulators = true;
  bool overlap_dma = false;
  bool exhaustive_tiler = false;
  std::uint64_t seed = 1;

  StreamerSpec& streamer(StreamerRole r) { return streamers[static_cast<std::size_t>(r)]; }
  const StreamerSpec& streamer(StreamerRole r) const { return streamers[static_cast<std::size_t>(r)]; }

  // The cycle-level memory path assumes one 64-bit word per array row per fire.
  bool cycle_model_geometry() const { return array == ArrayGeometry{8, 8, 8}; }
};

inline SimConfig default_config() {
  SimConfig c;
  c.streamer(StreamerRole::Input) = {6, 8, 64, 8, false, true};
  c.streamer(StreamerRole::Weight) = {3, 8, 512, 1, true, true};
  c.streamer(StreamerRole::Psum) = {3, 1, 64, 4, false, true};
  c.streamer(StreamerRole::Output) = {3, 1, 64, 4, false, true};
  c.streamer(StreamerRole::SimdIn) = {2, 1, 64, 1, false, true};
  c.streamer(StreamerRole::SimdOut) = {2, 1, 64, 1, false, true};
  c.streamer(StreamerRole::Reshuffler) = {4, 1, 64, 1, false, true};
  return c;
}

inline std::vector<std::string> validate(const SimConfig& c) {
  std::vector<std::string> e;
  const auto& a = c.array;
  if (a.mu < 1 || a.ku < 1 || a.nu < 1) e.push_back("array: mu, ku, nu must be positive");
  else if (a.macs() != c.mac_budget)
    e.push_back("array: mu*ku*nu = " + std::to_string(a.macs()) + " differs from MAC budget " +
                std::to_string(c.mac_budget));

  const auto& m = c.memory;
  if (m.banks < 1 || m.words_per_bank < 1 || m.super_bank_width < 1)
    e.push_back("memory: banks, words_per_bank and super_bank_width must be positive");
  else if (m.banks % m.super_bank_width != 0)
    e.push_back("memory: banks (" + std::to_string(m.banks) + ") not divisible by super_bank_width (" +
                std::to_string(m.super_bank_width) + ")");
  if (m.word_bits != 64) e.push_back("memory: word_bits must be 64");
  if (m.super_bank_width * m.word_bits != 512) e.push_back("memory: a super bank must be 512 bits wide");
  if (c.memory_latency < 1) e.push_back("memory: latency must be >= 1 cycle");

  for (std::size_t r = 0; r < kStreamerRoles; ++r) {
    const auto& s = c.streamers[r];
    const std::string n = std::string("streamer ") + kStreamerRoleNames[r] + ": ";
    if (!s.present) {
      e.push_back(n + "missing");
      continue;
    }
    if (s.fifo_depth < 1) e.push_back(n + "fifo_depth must be >= 1");
    if (s.channel_width_bits != 64 && s.channel_width_bits != 512)
      e.push_back(n + "channel_width_bits must be 64 or 512");
    if (s.channel_count < 1) e.push_back(n + "channel_count must be >= 1");
    if (s.agu_dims < 1) e.push_back(n + "agu_dims must be >= 1");
  }
  const auto& in = c.streamer(StreamerRole::Input);
  const auto& w = c.streamer(StreamerRole::Weight);
  if (in.channel_width_bits != 64) e.push_back("streamer input: channel width must be 64 bits");
  if (in.channel_count != a.mu && c.cycle_model_geometry())
    e.push_back("streamer input: channel_count must equal mu");
  if (in.agu_dims < 4) e.push_back("streamer input: needs at least a 4-D AGU for implicit im2col");
  if (w.channel_width_bits != 512 || w.channel_count != 1)
    e.push_back("streamer weight: expects a single 512-bit channel");
  if (w.agu_dims < 3) e.push_back("streamer weight: needs at least a 3-D AGU");
  for (auto role : {StreamerRole::Psum, StreamerRole::Output}) {
    const auto& s = c.streamer(role);
    const std::string n = std::string("streamer ") + kStreamerRoleNames[static_cast<std::size_t>(role)] + ": ";
    if (s.channel_width_bits != 64) e.push_back(n + "channel width must be 64 bits");
    if (s.channel_count < 1 || 8 % s.channel_count != 0) e.push_back(n + "channel_count must divide 8");
    if (s.agu_dims < 3) e.push_back(n + "needs at least a 3-D AGU");
  }
  if (c.streamer(StreamerRole::Psum).channel_count != c.streamer(StreamerRole::Output).channel_count &&
      c.crossbar_time_mux)
    e.push_back("crossbar time-mux pairs psum and output channels one to one; counts differ");

  if (c.simd_lanes != 8 && c.simd_lanes != 64) e.push_back("simd_lanes must be 8 or 64");
  if (c.dma.bandwidth_bits < 1) e.push_back("dma: bandwidth must be >= 1 bit/cycle");
  if (c.dma.latency < 0) e.push_back("dma: latency must be >= 0");

  if (c.memory_mode == MemoryMode::Separated) {
    const auto& s = c.separated;
    for (auto [name, v] : {std::pair{"input", s.input}, {"weight", s.weight}, {"psum", s.psum}, {"output", s.output}})
      if (v < 512 || v % 512 != 0)
        e.push_back(std::string("separated: ") + name + " buffer must be a positive multiple of 512 bytes");
    if (s.sum() != m.total_bytes())
      e.push_back("separated: buffers sum to " + std::to_string(s.sum()) + " bytes but memory holds " +
                  std::to_string(m.total_bytes()) + " bytes");
  }
  return e;
}

inline const char* to_string(MemoryMode m) { return m == MemoryMode::Shared ? "shared" : "separated"; }
inline const char* to_string(PrefetchMode p) { return p == PrefetchMode::Mgdp ? "mgdp" : "demand"; }

}  // namespace voltrasim
