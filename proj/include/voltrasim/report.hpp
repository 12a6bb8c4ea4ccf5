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
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "voltrasim/engine.hpp"
#include "voltrasim/tiler.hpp"

namespace voltrasim {

// Fixed six-decimal rendering keeps CSV files byte-stable across runs.
inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline nlohmann::ordered_json to_json(const SimConfig& c) {
  nlohmann::ordered_json j;
  j["array"] = {{"mu", c.array.mu}, {"ku", c.array.ku}, {"nu", c.array.nu}};
  j["mac_budget"] = c.mac_budget;
  j["memory"] = {{"banks", c.memory.banks},
                 {"word_bits", c.memory.word_bits},
                 {"words_per_bank", c.memory.words_per_bank},
                 {"super_bank_width", c.memory.super_bank_width}};
  j["memory_latency"] = c.memory_latency;
  nlohmann::ordered_json st;
  for (std::size_t r = 0; r < kStreamerRoles; ++r) {
    const auto& s = c.streamers[r];
    st[kStreamerRoleNames[r]] = {{"agu_dims", s.agu_dims},
                                 {"fifo_depth", s.fifo_depth},
                                 {"channel_width_bits", s.channel_width_bits},
                                 {"channel_count", s.channel_count},
                                 {"has_transposer", s.has_transposer},
                                 {"present", s.present}};
  }
  j["streamers"] = st;
  j["dma"] = {{"bandwidth_bits", c.dma.bandwidth_bits}, {"latency", c.dma.latency}};
  j["memory_mode"] = to_string(c.memory_mode);
  j["separated"] = {{"input", c.separated.input},
                    {"weight", c.separated.weight},
                    {"psum", c.separated.psum},
                    {"output", c.separated.output}};
  j["prefetch"] = to_string(c.prefetch);
  j["simd_lanes"] = c.simd_lanes;
  j["crossbar_time_mux"] = c.crossbar_time_mux;
  j["double_buffer_accumulators"] = c.double_buffer_accumulators;
  j["overlap_dma"] = c.overlap_dma;
  j["exhaustive_tiler"] = c.exhaustive_tiler;
  j["seed"] = c.seed;
  return j;
}

inline nlohmann::ordered_json to_json(const StallCounts& s) {
  return {{"bank_conflict", s.bank_conflict}, {"fifo_empty", s.fifo_empty}, {"drain_backpressure", s.drain_backpressure}};
}

inline nlohmann::ordered_json to_json(const LayerReport& l) {
  nlohmann::ordered_json j;
  j["name"] = l.name;
  j["kind"] = l.kind;
  j["gemm"] = {{"m", l.gemm.m}, {"k", l.gemm.k}, {"n", l.gemm.n}};
  j["tile"] = {{"tm", l.tile.tm}, {"tk", l.tile.tk}, {"tn", l.tile.tn}};
  j["tiles"] = l.tiles;
  j["ideal_cycles"] = l.ideal_cycles;
  j["compute_cycles"] = l.compute_cycles;
  j["drain_tail_cycles"] = l.drain_tail_cycles;
  j["dma_cycles"] = l.dma_cycles;
  j["total_cycles"] = l.total_cycles;
  j["stalls"] = to_json(l.stalls);
  j["dma_bytes_in"] = l.dma_bytes_in;
  j["dma_bytes_out"] = l.dma_bytes_out;
  j["transfers"] = l.transfers;
  j["useful_macs"] = l.useful_macs;
  j["mac_slots"] = l.mac_slots;
  j["footprint_bytes"] = l.footprint_bytes;
  j["spatial_utilization"] = l.spatial ? nlohmann::ordered_json(*l.spatial) : nullptr;
  j["temporal_utilization"] = l.temporal ? nlohmann::ordered_json(*l.temporal) : nullptr;
  j["functional_ok"] = l.functional_ok ? nlohmann::ordered_json(*l.functional_ok) : nullptr;
  return j;
}

inline nlohmann::ordered_json to_json(const SimReport& r) {
  nlohmann::ordered_json j;
  j["workload"] = r.workload;
  j["timing"] = r.timing;
  j["seed"] = r.config.seed;
  j["config"] = to_json(r.config);
  j["totals"] = {{"total_latency", r.total_latency},
                 {"compute_cycles", r.compute_cycles},
                 {"dma_cycles", r.dma_cycles},
                 {"other_cycles", r.other_cycles},
                 {"ideal_cycles", r.ideal_cycles},
                 {"dma_bytes", r.dma_bytes},
                 {"useful_macs", r.useful_macs},
                 {"mac_slots", r.mac_slots},
                 {"stalls", to_json(r.stalls)},
                 {"spatial_utilization", r.spatial},
                 {"spatial_utilization_mac_weighted", r.spatial_mac_weighted},
                 {"spatial_utilization_geomean", r.spatial_geomean},
                 {"temporal_utilization", r.temporal},
                 {"temporal_utilization_geomean", r.temporal_geomean}};
  j["functional_ok"] = r.functional_ok ? nlohmann::ordered_json(*r.functional_ok) : nullptr;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& l : r.layers) layers.push_back(to_json(l));
  j["layers"] = layers;
  return j;
}

inline constexpr const char* kReportCsvHeader =
    "layer,kind,m,k,n,tm,tk,tn,tiles,ideal_cycles,compute_cycles,drain_tail_cycles,dma_cycles,total_cycles,"
    "stall_bank_conflict,stall_fifo_empty,stall_drain_backpressure,dma_bytes_in,dma_bytes_out,transfers,"
    "useful_macs,mac_slots,spatial_utilization,temporal_utilization,functional_ok";

inline void write_csv(std::ostream& os, const SimReport& r) {
  os << kReportCsvHeader << "\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string{}; };
  auto ok = [](const std::optional<bool>& v) { return v ? std::string(*v ? "1" : "0") : std::string{}; };
  for (const auto& l : r.layers) {
    os << l.name << ',' << l.kind << ',' << l.gemm.m << ',' << l.gemm.k << ',' << l.gemm.n << ',' << l.tile.tm << ','
       << l.tile.tk << ',' << l.tile.tn << ',' << l.tiles << ',' << l.ideal_cycles << ',' << l.compute_cycles << ','
       << l.drain_tail_cycles << ',' << l.dma_cycles << ',' << l.total_cycles << ',' << l.stalls.bank_conflict << ','
       << l.stalls.fifo_empty << ',' << l.stalls.drain_backpressure << ',' << l.dma_bytes_in << ',' << l.dma_bytes_out
       << ',' << l.transfers << ',' << l.useful_macs << ',' << l.mac_slots << ',' << opt(l.spatial) << ','
       << opt(l.temporal) << ',' << ok(l.functional_ok) << "\n";
  }
  std::int64_t tiles = 0, tail = 0, in = 0, out = 0, tr = 0;
  for (const auto& l : r.layers) {
    tiles += l.tiles;
    tail += l.drain_tail_cycles;
    in += l.dma_bytes_in;
    out += l.dma_bytes_out;
    tr += l.transfers;
  }
  os << "TOTAL,,,,,,,," << tiles << ',' << r.ideal_cycles << ',' << r.compute_cycles << ',' << tail << ','
     << r.dma_cycles << ',' << r.total_latency << ',' << r.stalls.bank_conflict << ',' << r.stalls.fifo_empty << ','
     << r.stalls.drain_backpressure << ',' << in << ',' << out << ',' << tr << ',' << r.useful_macs << ','
     << r.mac_slots << ',' << fmt(r.spatial) << ',' << fmt(r.temporal) << ',' << ok(r.functional_ok) << "\n";
}

inline std::string to_csv(const SimReport& r) {
  std::ostringstream os;
  write_csv(os, r);
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

inline void write_report(const SimReport& r, const std::string& json_path, const std::string& csv_path) {
  write_text(json_path, to_json(r).dump(2) + "\n");
  write_text(csv_path, to_csv(r));
}

inline constexpr const char* kScheduleCsvHeader =
    "layer,tile,m0,tm,n0,tn,k0,tk,first_k,last_k,input_resident,weight_resident,output_resident,bytes_in,bytes_out";

// One row per tile; pooling layers contribute one row per DMA chunk pair.
inline std::string schedule_csv(const NetworkSchedule& ns) {
  std::ostringstream os;
  os << kScheduleCsvHeader << "\n";
  for (const auto& s : ns.layers) {
    std::int64_t i = 0;
    for (const auto& t : s.tiles)
      os << s.name << ',' << i++ << ',' << t.m0 << ',' << t.tm << ',' << t.n0 << ',' << t.tn << ',' << t.k0 << ','
         << t.tk << ',' << t.first_k << ',' << t.last_k << ',' << s.a_resident << ',' << s.b_resident << ','
         << s.out_resident << ',' << t.bytes_a + t.bytes_b << ',' << t.bytes_out << "\n";
    const std::size_t chunks = std::max(s.in_chunks.size(), s.out_chunks.size());
    for (std::size_t c = 0; c < chunks; ++c)
      os << s.name << ',' << i++ << ",,,,,,,,,0,0,0," << (c < s.in_chunks.size() ? s.in_chunks[c] : 0) << ','
         << (c < s.out_chunks.size() ? s.out_chunks[c] : 0) << "\n";
  }
  return os.str();
}

}  // namespace voltrasim
