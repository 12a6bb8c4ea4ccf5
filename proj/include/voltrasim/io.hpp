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

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "voltrasim/config.hpp"
#include "voltrasim/workload.hpp"

namespace voltrasim {

namespace io_detail {

inline std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.is_null() ? std::string{} : " (line " + std::to_string(m.line + 1) + ")";
}

inline void require_map(const YAML::Node& n, const std::string& ctx) {
  if (!n.IsMap()) throw ConfigError(ctx + ": expected a mapping" + where(n));
}

inline void allow_keys(const YAML::Node& n, const std::string& ctx, std::initializer_list<const char*> keys) {
  require_map(n, ctx);
  for (const auto& kv : n) {
    const auto k = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw ConfigError(ctx + ": unknown key '" + k + "'" + where(kv.first));
  }
}

template <class T>
T get(const YAML::Node& n, const char* key, const std::string& ctx) {
  const auto v = n[key];
  if (!v) throw ConfigError(ctx + ": missing key '" + key + "'" + where(n));
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(ctx + ": bad value for '" + key + "'" + where(v));
  }
}

template <class T>
void opt(const YAML::Node& n, const char* key, T& out, const std::string& ctx) {
  if (const auto v = n[key]) {
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(ctx + ": bad value for '" + key + "'" + where(v));
    }
  }
}

inline QuantParams parse_quant(const YAML::Node& n, QuantParams q, const std::string& ctx) {
  allow_keys(n, ctx, {"multiplier", "shift", "zero_point", "relu"});
  opt(n, "multiplier", q.multiplier, ctx);
  opt(n, "shift", q.shift, ctx);
  int zp = q.zero_point;
  opt(n, "zero_point", zp, ctx);
  if (zp < -128 || zp > 127) throw ConfigError(ctx + ": zero_point out of int8 range");
  q.zero_point = static_cast<std::int8_t>(zp);
  opt(n, "relu", q.relu, ctx);
  return q;
}

inline OperandSource parse_source(const YAML::Node& n, const std::map<std::string, int>& names, const std::string& ctx) {
  OperandSource s;
  std::string ref;
  if (n.IsScalar()) {
    ref = n.as<std::string>();
  } else {
    allow_keys(n, ctx, {"layer", "transpose"});
    ref = get<std::string>(n, "layer", ctx);
    opt(n, "transpose", s.transpose, ctx);
  }
  if (ref == "offchip") {
    if (s.transpose) throw ConfigError(ctx + ": off-chip operands cannot be transposed");
    return s;
  }
  auto it = names.find(ref);
  if (it == names.end()) throw ConfigError(ctx + ": unknown layer '" + ref + "' (must be defined earlier)");
  s.layer = it->second;
  return s;
}

}  // namespace io_detail

// Workload schema:
//   name, source (optional), quant (optional default), layers: list of
//   {name, type: gemm|conv2d|maxpool|mha, dims..., quant, input, weight, host_op}.
// Operands are "offchip" (default) or an earlier layer name, optionally
// {layer: name, transpose: true}. An mha entry expands to q, k, v, s, o, p.
inline Network parse_workload(const YAML::Node& root, const std::string& fallback_name = "workload") {
  using namespace io_detail;
  allow_keys(root, "workload", {"name", "source", "quant", "layers"});
  Network net;
  net.name = fallback_name;
  opt(root, "name", net.name, "workload");
  opt(root, "source", net.source, "workload");
  QuantParams dq;
  if (root["quant"]) dq = parse_quant(root["quant"], dq, net.name + "/quant");
  const auto layers = root["layers"];
  if (!layers || !layers.IsSequence()) throw ConfigError(net.name + ": 'layers' must be a list");
  std::map<std::string, int> names;
  auto add = [&](LayerOp l) {
    if (!names.emplace(l.name, static_cast<int>(net.layers.size())).second)
      throw ConfigError(net.name + ": duplicate layer name '" + l.name + "'");
    net.layers.push_back(std::move(l));
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto n = layers[i];
    const std::string ctx = net.name + "/layers[" + std::to_string(i) + "]";
    require_map(n, ctx);
    const auto type = get<std::string>(n, "type", ctx);
    QuantParams q = n["quant"] ? parse_quant(n["quant"], dq, ctx + "/quant") : dq;
    if (type == "mha") {
      allow_keys(n, ctx, {"type", "prefix", "tokens", "d_model", "d_head", "quant", "input"});
      const auto prefix = get<std::string>(n, "prefix", ctx);
      OperandSource in;
      if (n["input"]) in = parse_source(n["input"], names, ctx + "/input");
      auto block = mha_layers(get<std::int64_t>(n, "tokens", ctx), get<std::int64_t>(n, "d_model", ctx),
                              get<std::int64_t>(n, "d_head", ctx), prefix, static_cast<int>(net.layers.size()), q);
      for (int j = 0; j < 3; ++j) block[static_cast<std::size_t>(j)].input = in;
      for (auto& l : block) add(std::move(l));
      continue;
    }
    LayerOp l;
    l.name = get<std::string>(n, "name", ctx);
    l.quant = q;
    if (type == "gemm") {
      allow_keys(n, ctx, {"name", "type", "m", "k", "n", "quant", "input", "weight", "host_op"});
      l.op = GemmShape{get<std::int64_t>(n, "m", ctx), get<std::int64_t>(n, "k", ctx), get<std::int64_t>(n, "n", ctx)};
    } else if (type == "conv2d") {
      allow_keys(n, ctx, {"name", "type", "h", "w", "c", "oc", "fy", "fx", "stride", "pad", "quant", "input",
                          "weight", "host_op"});
      Conv2dShape c;
      c.h = get<std::int64_t>(n, "h", ctx);
      c.w = get<std::int64_t>(n, "w", ctx);
      c.c = get<std::int64_t>(n, "c", ctx);
      c.oc = get<std::int64_t>(n, "oc", ctx);
      c.fy = get<std::int64_t>(n, "fy", ctx);
      c.fx = get<std::int64_t>(n, "fx", ctx);
      opt(n, "stride", c.stride, ctx);
      opt(n, "pad", c.pad, ctx);
      l.op = c;
    } else if (type == "maxpool") {
      allow_keys(n, ctx, {"name", "type", "h", "w", "c", "window", "stride", "input", "host_op"});
      MaxPoolShape p;
      p.h = get<std::int64_t>(n, "h", ctx);
      p.w = get<std::int64_t>(n, "w", ctx);
      p.c = get<std::int64_t>(n, "c", ctx);
      p.window = get<std::int64_t>(n, "window", ctx);
      opt(n, "stride", p.stride, ctx);
      l.op = p;
    } else {
      throw ConfigError(ctx + ": unknown layer type '" + type + "'");
    }
    if (n["input"]) l.input = parse_source(n["input"], names, ctx + "/input");
    if (n["weight"]) l.weight = parse_source(n["weight"], names, ctx + "/weight");
    opt(n, "host_op", l.host_op, ctx);
    add(std::move(l));
  }
  auto errs = validate_network(net);
  if (!errs.empty()) throw ConfigError(errs.front());
  return net;
}

inline YAML::Node load_yaml_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("cannot open '" + path + "'");
  try {
    return YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline Network load_workload(const std::string& path) {
  return parse_workload(load_yaml_file(path), std::filesystem::path(path).stem().string());
}

inline Network parse_workload_string(const std::string& text) {
  try {
    return parse_workload(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("workload: ") + e.what());
  }
}

// Architecture schema: every SimConfig field is a key, omitted keys keep
// their defaults.
inline SimConfig parse_config(const YAML::Node& root, SimConfig c = default_config()) {
  using namespace io_detail;
  if (!root || root.IsNull()) return c;
  allow_keys(root, "arch", {"array", "mac_budget", "memory", "memory_latency", "streamers", "dma", "memory_mode",
                            "separated", "prefetch", "simd_lanes", "crossbar_time_mux", "double_buffer_accumulators",
                            "overlap_dma", "exhaustive_tiler", "seed"});
  if (auto a = root["array"]) {
    allow_keys(a, "arch/array", {"mu", "ku", "nu"});
    opt(a, "mu", c.array.mu, "arch/array");
    opt(a, "ku", c.array.ku, "arch/array");
    opt(a, "nu", c.array.nu, "arch/array");
  }
  opt(root, "mac_budget", c.mac_budget, "arch");
  if (auto m = root["memory"]) {
    allow_keys(m, "arch/memory", {"banks", "word_bits", "words_per_bank", "super_bank_width"});
    opt(m, "banks", c.memory.banks, "arch/memory");
    opt(m, "word_bits", c.memory.word_bits, "arch/memory");
    opt(m, "words_per_bank", c.memory.words_per_bank, "arch/memory");
    opt(m, "super_bank_width", c.memory.super_bank_width, "arch/memory");
  }
  opt(root, "memory_latency", c.memory_latency, "arch");
  if (auto s = root["streamers"]) {
    require_map(s, "arch/streamers");
    for (const auto& kv : s) {
      const auto role = kv.first.as<std::string>();
      std::size_t r = 0;
      while (r < kStreamerRoles && role != kStreamerRoleNames[r]) ++r;
      if (r == kStreamerRoles) throw ConfigError("arch/streamers: unknown key '" + role + "'" + where(kv.first));
      const std::string ctx = "arch/streamers/" + role;
      allow_keys(kv.second, ctx, {"agu_dims", "fifo_depth", "channel_width_bits", "channel_count", "has_transposer", "present"});
      auto& sp = c.streamers[r];
      opt(kv.second, "agu_dims", sp.agu_dims, ctx);
      opt(kv.second, "fifo_depth", sp.fifo_depth, ctx);
      opt(kv.second, "channel_width_bits", sp.channel_width_bits, ctx);
      opt(kv.second, "channel_count", sp.channel_count, ctx);
      opt(kv.second, "has_transposer", sp.has_transposer, ctx);
      opt(kv.second, "present", sp.present, ctx);
    }
  }
  if (auto d = root["dma"]) {
    allow_keys(d, "arch/dma", {"bandwidth_bits", "latency"});
    opt(d, "bandwidth_bits", c.dma.bandwidth_bits, "arch/dma");
    opt(d, "latency", c.dma.latency, "arch/dma");
  }
  if (auto m = root["memory_mode"]) {
    const auto v = m.as<std::string>();
    if (v == "shared") c.memory_mode = MemoryMode::Shared;
    else if (v == "separated") c.memory_mode = MemoryMode::Separated;
    else throw ConfigError("arch: memory_mode must be shared or separated" + where(m));
  }
  if (auto b = root["separated"]) {
    allow_keys(b, "arch/separated", {"input", "weight", "psum", "output"});
    opt(b, "input", c.separated.input, "arch/separated");
    opt(b, "weight", c.separated.weight, "arch/separated");
    opt(b, "psum", c.separated.psum, "arch/separated");
    opt(b, "output", c.separated.output, "arch/separated");
  }
  if (auto p = root["prefetch"]) {
    const auto v = p.as<std::string>();
    if (v == "mgdp") c.prefetch = PrefetchMode::Mgdp;
    else if (v == "demand") c.prefetch = PrefetchMode::DemandFetch;
    else throw ConfigError("arch: prefetch must be mgdp or demand" + where(p));
  }
  opt(root, "simd_lanes", c.simd_lanes, "arch");
  opt(root, "crossbar_time_mux", c.crossbar_time_mux, "arch");
  opt(root, "double_buffer_accumulators", c.double_buffer_accumulators, "arch");
  opt(root, "overlap_dma", c.overlap_dma, "arch");
  opt(root, "exhaustive_tiler", c.exhaustive_tiler, "arch");
  opt(root, "seed", c.seed, "arch");
  auto errs = validate(c);
  if (!errs.empty()) throw ConfigError("arch: " + errs.front());
  return c;
}

inline SimConfig load_config(const std::string& path) { return parse_config(load_yaml_file(path)); }

inline SimConfig parse_config_string(const std::string& text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("arch: ") + e.what());
  }
}

inline std::string builtin_workload_dir() {
  if (const char* d = std::getenv("VOLTRASIM_WORKLOAD_DIR"); d && *d) return d;
#ifdef VOLTRASIM_DEFAULT_WORKLOAD_DIR
  return VOLTRASIM_DEFAULT_WORKLOAD_DIR;
#else
  return "workloads";
#endif
}

// Figure order of the eight benchmark stand-ins.
inline const std::vector<std::string>& builtin_workload_names() {
  static const std::vector<std::string> names = {"mobilenetv2", "resnet50",  "vit-b",        "pointnext",
                                                 "lstm",        "bert-base", "llama-prefill", "llama-decode"};
  return names;
}

inline Network load_builtin(const std::string& name) {
  return load_workload((std::filesystem::path(builtin_workload_dir()) / (name + ".yaml")).string());
}

inline std::vector<Network> load_builtin_workloads() {
  std::vector<Network> v;
  for (const auto& n : builtin_workload_names()) v.push_back(load_builtin(n));
  return v;
}

}  // namespace voltrasim
