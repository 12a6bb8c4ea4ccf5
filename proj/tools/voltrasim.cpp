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


// voltrasim: run simulations, ablation sweeps and figure tables.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "voltrasim/engine.hpp"
#include "voltrasim/figures.hpp"
#include "voltrasim/io.hpp"
#include "voltrasim/report.hpp"

namespace fs = std::filesystem;
using namespace voltrasim;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kInfeasible = 3;

struct CommonOpts {
  std::string arch;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool overlap_dma = false;
  bool exhaustive_tiler = false;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--arch", o.arch, "architecture config (YAML); defaults apply when omitted");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "seed for synthetic operands");
  cmd->add_flag("--overlap-dma", o.overlap_dma, "pipeline DMA with compute across tiles");
  cmd->add_flag("--exhaustive-tiler", o.exhaustive_tiler, "search all tile shapes instead of the greedy heuristic");
}

SimConfig arch_config(const CommonOpts& o) {
  SimConfig c = o.arch.empty() ? default_config() : load_config(o.arch);
  if (o.seed) c.seed = *o.seed;
  if (o.overlap_dma) c.overlap_dma = true;
  if (o.exhaustive_tiler) c.exhaustive_tiler = true;
  auto errs = validate(c);
  if (!errs.empty()) throw ConfigError("arch: " + errs.front());
  return c;
}

// A workload argument is either a file path or a name looked up in the
// workload directory.
Network resolve_workload(const std::string& w) {
  if (fs::exists(w) || w.ends_with(".yaml") || w.ends_with(".yml")) return load_workload(w);
  if (fs::exists(fs::path(builtin_workload_dir()) / (w + ".yaml"))) return load_builtin(w);
  throw ConfigError("workload '" + w + "' is neither a file nor a name in " + builtin_workload_dir());
}

std::vector<Network> resolve_workloads(const std::vector<std::string>& ws) {
  if (ws.empty()) return load_builtin_workloads();
  std::vector<Network> nets;
  for (const auto& w : ws) nets.push_back(resolve_workload(w));
  return nets;
}

void dump_memory(const Engine& e, const fs::path& dir) {
  const auto& cfg = e.config();
  if (cfg.memory_mode == MemoryMode::Shared) {
    e.memory(0).dump((dir / "memory.bin").string());
    return;
  }
  const char* names[] = {"input", "weight", "psum", "output"};
  for (std::size_t s = 0; s < 4; ++s) e.memory(s).dump((dir / (std::string("memory_") + names[s] + ".bin")).string());
}

int cmd_run(const CommonOpts& o, const std::string& workload, bool trace, bool check) {
  const SimConfig cfg = arch_config(o);
  const Network net = resolve_workload(workload);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  std::ofstream tf;
  RunOptions opt;
  opt.functional = check;
  if (trace) {
    tf.open(dir / "trace.csv");
    tf << "cycle,unit,event\n";
    opt.trace = &tf;
  }
  Engine eng(cfg, opt);
  const SimReport rep = eng.run(net);
  write_report(rep, (dir / "report.json").string(), (dir / "report.csv").string());
  write_text((dir / "schedule.csv").string(), schedule_csv(eng.schedule()));
  if (check) dump_memory(eng, dir);
  std::cout << net.name << ": latency " << rep.total_latency << " cycles, spatial " << fmt(rep.spatial)
            << ", temporal " << fmt(rep.temporal);
  if (rep.functional_ok) std::cout << ", functional " << (*rep.functional_ok ? "ok" : "MISMATCH");
  std::cout << "\n";
  return rep.functional_ok && !*rep.functional_ok ? kFailure : kOk;
}

void emit_table(const FigureTable& t, const fs::path& path) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  const std::string csv = to_csv(t);
  write_text(path.string(), csv);
  std::cout << csv;
}

int cmd_figure(const CommonOpts& o, const std::string& name) {
  const SimConfig cfg = arch_config(o);
  const auto& names = figure_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw ConfigError("unknown figure '" + name + "' (expected fig6a, fig6b, fig6c, fig1c or fig4c)");
  emit_table(make_figure(name, cfg, o.jobs), fs::path(o.out) / (name + ".csv"));
  return kOk;
}

int cmd_sweep(const CommonOpts& o, const std::string& selector, const std::vector<std::string>& workloads) {
  const SimConfig cfg = arch_config(o);
  const Ablation a = parse_ablation(selector);
  const auto nets = resolve_workloads(workloads);
  auto res = run_sweep(cfg, a, nets, o.jobs, o.out);
  emit_table(res.table, fs::path(o.out) / ("sweep_" + selector + ".csv"));
  return kOk;
}

int cmd_validate(const CommonOpts& o, const std::vector<std::string>& workloads) {
  const SimConfig cfg = arch_config(o);
  for (const auto& n : resolve_workloads(workloads)) {
    tile_network(n, cfg);
    std::cout << n.name << ": ok (" << n.layers.size() << " layers)\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-level simulator for a 3D GEMM accelerator with mixed-grained prefetch and a shared scratchpad"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string workload, figure, selector;
  std::vector<std::string> workloads;
  bool trace = false, no_check = false;

  auto* run = app.add_subcommand("run", "simulate one workload and write report.json / report.csv");
  add_common(run, o);
  run->add_option("--workload", workload, "workload file or name in the workload directory")->required();
  run->add_flag("--trace", trace, "write a per-cycle trace (cycle,unit,event) to trace.csv");
  run->add_flag("--no-check", no_check, "skip data movement and the reference comparison");

  auto* fig = app.add_subcommand("figure", "emit a baseline/proposed table over the builtin workloads");
  add_common(fig, o);
  fig->add_option("name", figure, "fig6a | fig6b | fig6c | fig1c | fig4c")->required();
  fig->add_option("--jobs", o.jobs, "parallel simulations")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "run an ablation pair over workloads");
  add_common(sweep, o);
  sweep->add_option("selector", selector, "mgdp | memory_mode | array_geom | simd_lanes | crossbar_mux")->required();
  sweep->add_option("--workload", workloads, "workload files or names (default: all builtin)");
  sweep->add_option("--jobs", o.jobs, "parallel simulations")->check(CLI::PositiveNumber);

  auto* val = app.add_subcommand("validate", "check an arch config and workloads, including tiling feasibility");
  add_common(val, o);
  val->add_option("--workload", workloads, "workload files or names (default: all builtin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*run) return cmd_run(o, workload, trace, !no_check);
    if (*fig) return cmd_figure(o, figure);
    if (*sweep) return cmd_sweep(o, selector, workloads);
    if (*val) return cmd_validate(o, workloads);
  } catch (const CapacityError& e) {
    std::cerr << "error: infeasible schedule: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
