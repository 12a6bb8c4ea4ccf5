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
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "voltrasim/engine.hpp"
#include "voltrasim/io.hpp"
#include "voltrasim/report.hpp"
#include "voltrasim/tiler.hpp"

namespace voltrasim {

// Feature toggled by an ablation. The proposed side has it enabled,
// the baseline side has it disabled; everything else follows the arch.
enum class Ablation { Mgdp, MemoryMode, ArrayGeom, SimdLanes, CrossbarMux };

inline const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> n{"mgdp", "memory_mode", "array_geom", "simd_lanes", "crossbar_mux"};
  return n;
}

inline Ablation parse_ablation(const std::string& s) {
  const auto& n = ablation_names();
  auto it = std::find(n.begin(), n.end(), s);
  if (it == n.end()) throw ConfigError("unknown ablation selector '" + s + "'");
  return static_cast<Ablation>(it - n.begin());
}

inline std::string to_string(Ablation a) { return ablation_names()[static_cast<std::size_t>(a)]; }

enum class Metric { Spatial, Temporal, Latency, CoreCycles };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::Spatial: return "spatial_utilization";
    case Metric::Temporal: return "temporal_utilization";
    case Metric::Latency: return "total_latency";
    case Metric::CoreCycles: return "core_cycles";
  }
  return "";
}

// Utilizations compare proposed/baseline; cycle counts compare
// baseline/proposed so that a ratio above one is always a gain.
inline bool higher_is_better(Metric m) { return m == Metric::Spatial || m == Metric::Temporal; }

inline double metric_value(const SimReport& r, Metric m) {
  switch (m) {
    case Metric::Spatial: return r.spatial;
    case Metric::Temporal: return r.temporal;
    case Metric::Latency: return static_cast<double>(r.total_latency);
    case Metric::CoreCycles: {
      std::int64_t c = 0;
      for (const auto& l : r.layers) c += l.compute_cycles + l.drain_tail_cycles;
      return static_cast<double>(c);
    }
  }
  return 0;
}

struct Variant {
  std::string key;
  SimConfig cfg;
  TimingModel timing = TimingModel::Cycle;
};

struct AblationPlan {
  Ablation ablation;
  Metric metric;
  Variant baseline, proposed;
};

inline AblationPlan plan_ablation(const SimConfig& arch, Ablation a) {
  AblationPlan p{a, Metric::Latency, {"", arch, TimingModel::Cycle}, {"", arch, TimingModel::Cycle}};
  auto& b = p.baseline.cfg;
  auto& q = p.proposed.cfg;
  switch (a) {
    case Ablation::Mgdp:
      p.metric = Metric::Temporal;
      b.prefetch = PrefetchMode::DemandFetch;
      q.prefetch = PrefetchMode::Mgdp;
      p.baseline.key = "demand";
      p.proposed.key = "mgdp";
      break;
    case Ablation::MemoryMode:
      p.metric = Metric::Latency;
      b.memory_mode = MemoryMode::Separated;
      q.memory_mode = MemoryMode::Shared;
      p.baseline.key = "separated";
      p.proposed.key = "shared";
      break;
    case Ablation::ArrayGeom:
      p.metric = Metric::Spatial;
      b.array = kBaseline2D;
      if (q.array == kBaseline2D) q.array = ArrayGeometry{};
      p.baseline.timing = p.proposed.timing = TimingModel::ArrayOnly;
      p.baseline.key = "array_" + std::to_string(b.array.mu) + "x" + std::to_string(b.array.ku) + "x" + std::to_string(b.array.nu);
      p.proposed.key = "array_" + std::to_string(q.array.mu) + "x" + std::to_string(q.array.ku) + "x" + std::to_string(q.array.nu);
      break;
    case Ablation::SimdLanes:
      p.metric = Metric::CoreCycles;
      b.simd_lanes = 64;
      q.simd_lanes = 8;
      p.baseline.key = "simd64";
      p.proposed.key = "simd8";
      break;
    case Ablation::CrossbarMux:
      p.metric = Metric::CoreCycles;
      b.crossbar_time_mux = false;
      q.crossbar_time_mux = true;
      p.baseline.key = "xbar_ports";
      p.proposed.key = "xbar_mux";
      break;
  }
  return p;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results land in
// caller-owned slots, so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp<std::int64_t>(jobs, 1, static_cast<std::int64_t>(std::max<std::size_t>(n, 1))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

struct FigureRow {
  std::string name;
  double baseline = 0, proposed = 0, ratio = 1;
  bool has_values = true;
};

struct FigureTable {
  std::string name;
  std::string metric;
  std::vector<FigureRow> rows;  // includes trailing summary rows
};

inline constexpr const char* kFigureCsvHeader = "name,baseline,proposed,ratio";

inline std::string to_csv(const FigureTable& t) {
  std::string s = std::string(kFigureCsvHeader) + "\n";
  for (const auto& r : t.rows) {
    s += r.name + ",";
    s += r.has_values ? fmt(r.baseline) + "," + fmt(r.proposed) : std::string(",");
    s += "," + fmt(r.ratio) + "\n";
  }
  return s;
}

inline double geomean(const std::vector<double>& v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += std::log(x);
  return std::exp(s / static_cast<double>(v.size()));
}

inline double ratio_of(Metric m, double baseline, double proposed) {
  if (higher_is_better(m)) return baseline > 0 ? proposed / baseline : 1.0;
  return proposed > 0 ? baseline / proposed : 1.0;
}

struct SweepResult {
  AblationPlan plan;
  std::vector<SimReport> baseline, proposed;  // parallel to the workload list
  FigureTable table;
};

// Every (workload, variant) pair is an independent simulation. With a
// non-empty out_dir each run writes its own report files before the
// tables are merged in workload order.
inline SweepResult run_sweep(const SimConfig& arch, Ablation a, const std::vector<Network>& nets, int jobs = 1,
                             const std::string& out_dir = {}) {
  SweepResult res{plan_ablation(arch, a), {}, {}, {}};
  const auto& p = res.plan;
  res.baseline.resize(nets.size());
  res.proposed.resize(nets.size());
  parallel_for(2 * nets.size(), jobs, [&](std::size_t i) {
    const auto& v = i % 2 == 0 ? p.baseline : p.proposed;
    const auto& net = nets[i / 2];
    RunOptions opt;
    opt.timing = v.timing;
    SimReport r = run(net, v.cfg, opt);
    if (!out_dir.empty()) {
      const auto dir = std::filesystem::path(out_dir) / "runs" / v.key;
      std::filesystem::create_directories(dir);
      write_report(r, (dir / (net.name + ".json")).string(), (dir / (net.name + ".csv")).string());
    }
    (i % 2 == 0 ? res.baseline : res.proposed)[i / 2] = std::move(r);
  });
  res.table.name = to_string(a);
  res.table.metric = to_string(p.metric);
  std::vector<double> gb, gp, gr;
  for (std::size_t w = 0; w < nets.size(); ++w) {
    FigureRow row{nets[w].name, metric_value(res.baseline[w], p.metric), metric_value(res.proposed[w], p.metric)};
    row.ratio = ratio_of(p.metric, row.baseline, row.proposed);
    gb.push_back(row.baseline);
    gp.push_back(row.proposed);
    gr.push_back(row.ratio);
    res.table.rows.push_back(row);
  }
  if (!nets.empty()) res.table.rows.push_back({"geomean", geomean(gb), geomean(gp), geomean(gr)});
  return res;
}

inline const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> n{"fig6a", "fig6b", "fig6c", "fig1c", "fig4c"};
  return n;
}

// Footprint of each ResNet50 layer's separated-mode tile, packed into one
// shared region, against the four fixed buffers it would otherwise reserve.
inline FigureTable footprint_table(const Network& net, SimConfig cfg) {
  cfg.memory_mode = MemoryMode::Separated;
  const auto ns = tile_network(net, cfg);
  const double reserved = static_cast<double>(cfg.separated.sum());
  FigureTable t{"fig1c", "footprint_bytes", {}};
  double fb = 0, fr = 0;
  std::vector<double> gr;
  for (const auto& s : ns.layers) {
    if (s.tiles.empty()) continue;
    FigureRow row{s.name, reserved, static_cast<double>(s.footprint_bytes)};
    row.ratio = row.proposed / row.baseline;
    fb += row.proposed;
    fr += row.baseline;
    gr.push_back(row.ratio);
    t.rows.push_back(row);
  }
  if (!gr.empty()) {
    t.rows.push_back({"total", fr, fb, fb / fr});
    t.rows.push_back({"geomean", reserved, reserved * geomean(gr), geomean(gr)});
  }
  return t;
}

// Element access counts per MHA layer: separated baseline, shared proposed.
inline FigureTable access_table(SimConfig cfg, std::int64_t tokens = 64, std::int64_t d_model = 768,
                                std::int64_t d_head = 64) {
  const Network net = mha_sequence(tokens, d_model, d_head);
  cfg.memory_mode = MemoryMode::Shared;
  const auto sh = tile_network(net, cfg);
  cfg.memory_mode = MemoryMode::Separated;
  const auto sp = tile_network(net, cfg);
  FigureTable t{"fig4c", "access_count", {}};
  double tb = 0, tp = 0;
  for (std::size_t j = 0; j < net.layers.size(); ++j) {
    FigureRow row{net.layers[j].name, static_cast<double>(layer_access_count(net, sp, j)),
                  static_cast<double>(layer_access_count(net, sh, j))};
    row.ratio = row.proposed / row.baseline;
    tb += row.baseline;
    tp += row.proposed;
    t.rows.push_back(row);
  }
  t.rows.push_back({"total", tb, tp, tp / tb});
  t.rows.push_back({"saving_pct", 0, 0, 100.0 * (tb - tp) / tb, false});
  return t;
}

inline FigureTable make_figure(const std::string& name, const SimConfig& arch, int jobs = 1,
                               const std::string& out_dir = {}) {
  auto sweep = [&](Ablation a) {
    auto t = run_sweep(arch, a, load_builtin_workloads(), jobs, out_dir).table;
    t.name = name;
    return t;
  };
  if (name == "fig6a") return sweep(Ablation::ArrayGeom);
  if (name == "fig6b") return sweep(Ablation::Mgdp);
  if (name == "fig6c") return sweep(Ablation::MemoryMode);
  if (name == "fig1c") return footprint_table(load_builtin("resnet50"), arch);
  if (name == "fig4c") return access_table(arch);
  throw ConfigError("unknown figure '" + name + "' (expected fig6a, fig6b, fig6c, fig1c or fig4c)");
}

}  // namespace voltrasim
