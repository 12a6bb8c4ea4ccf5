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
#include <string>
#include <variant>
#include <vector>

#include "voltrasim/common.hpp"
#include "voltrasim/quant.hpp"

namespace voltrasim {

struct GemmShape {
  std::int64_t m = 1;
  std::int64_t k = 1;
  std::int64_t n = 1;

  std::int64_t macs() const { return m * k * n; }
  bool valid() const { return m >= 1 && k >= 1 && n >= 1; }
  bool operator==(const GemmShape&) const = default;
};

struct Conv2dShape {
  std::int64_t h = 1, w = 1;
  std::int64_t c = 8;
  std::int64_t oc = 8;
  std::int64_t fy = 1, fx = 1;
  std::int64_t stride = 1;
  std::int64_t pad = 0;

  std::int64_t padded_h() const { return h + 2 * pad; }
  std::int64_t padded_w() const { return w + 2 * pad; }
  // Channel count as stored in C/8HWC8 words.
  std::int64_t c8() const { return round_up(c, 8); }
  std::int64_t channel_blocks() const { return c8() / 8; }

  bool integral() const {
    return stride >= 1 && pad >= 0 && padded_h() >= fy && padded_w() >= fx &&
           (padded_h() - fy) % stride == 0 && (padded_w() - fx) % stride == 0;
  }
  std::int64_t oh() const { return (padded_h() - fy) / stride + 1; }
  std::int64_t ow() const { return (padded_w() - fx) / stride + 1; }
  bool operator==(const Conv2dShape&) const = default;
};

struct MaxPoolShape {
  std::int64_t h = 1, w = 1, c = 8;
  std::int64_t window = 2;
  std::int64_t stride = 2;

  bool integral() const {
    return window >= 1 && stride >= 1 && h >= window && w >= window &&
           (h - window) % stride == 0 && (w - window) % stride == 0;
  }
  std::int64_t oh() const { return (h - window) / stride + 1; }
  std::int64_t ow() const { return (w - window) / stride + 1; }
  bool operator==(const MaxPoolShape&) const = default;
};

inline void check_conv(const Conv2dShape& c) {
  if (c.h < 1 || c.w < 1 || c.c < 1 || c.oc < 1 || c.fy < 1 || c.fx < 1 || c.stride < 1 || c.pad < 0)
    throw ShapeError("conv2d: non-positive dimension");
  if (!c.integral()) throw ShapeError("conv2d: output size is not integral");
}

// Implicit-im2col view of a convolution: one GEMM row per output pixel,
// one reduction element per (fy, fx, channel).
inline GemmShape lower_conv_to_gemm(const Conv2dShape& c) {
  check_conv(c);
  return GemmShape{c.oh() * c.ow(), c.fy * c.fx * c.c, c.oc};
}

// Where an operand comes from. OffChip operands are synthetic tensors
// loaded by DMA; Layer operands are the int8 output of an earlier layer.
struct OperandSource {
  int layer = -1;
  bool transpose = false;

  bool off_chip() const { return layer < 0; }
  bool operator==(const OperandSource&) const = default;
};

struct LayerOp {
  std::string name;
  std::variant<GemmShape, Conv2dShape, MaxPoolShape> op;
  QuantParams quant;
  OperandSource input;
  OperandSource weight;
  // A host-side op (softmax, layernorm, ...) runs on this layer's input
  // first. It is free and functionally the identity.
  std::string host_op;

  bool is_gemm() const { return std::holds_alternative<GemmShape>(op); }
  bool is_conv() const { return std::holds_alternative<Conv2dShape>(op); }
  bool is_maxpool() const { return std::holds_alternative<MaxPoolShape>(op); }
  bool has_weight() const { return !is_maxpool(); }
};

// Shape of the GEMM the array actually runs. Convolution input channels
// are padded to the channel quantum (8 for C/8HWC8 words), so k counts
// padded channels.
inline GemmShape array_gemm(const LayerOp& l, std::int64_t channel_quantum = 8) {
  if (auto* g = std::get_if<GemmShape>(&l.op)) return *g;
  if (auto* c = std::get_if<Conv2dShape>(&l.op)) {
    Conv2dShape p = *c;
    p.c = round_up(p.c, channel_quantum);
    return lower_conv_to_gemm(p);
  }
  return GemmShape{};
}

// MACs the layer needs, without channel padding. Zero for pooling.
inline std::int64_t layer_macs(const LayerOp& l) {
  if (auto* g = std::get_if<GemmShape>(&l.op)) return g->macs();
  if (auto* c = std::get_if<Conv2dShape>(&l.op)) return lower_conv_to_gemm(*c).macs();
  return 0;
}

// Output tensor of a layer viewed as rows x cols (pixels x channels for
// feature maps).
struct MatrixDims {
  std::int64_t rows = 0, cols = 0;
  bool operator==(const MatrixDims&) const = default;
};

inline MatrixDims output_dims(const LayerOp& l) {
  if (auto* g = std::get_if<GemmShape>(&l.op)) return {g->m, g->n};
  if (auto* c = std::get_if<Conv2dShape>(&l.op)) return {c->oh() * c->ow(), c->oc};
  const auto& p = std::get<MaxPoolShape>(l.op);
  return {p.oh() * p.ow(), p.c};
}

inline MatrixDims input_dims(const LayerOp& l) {
  if (auto* g = std::get_if<GemmShape>(&l.op)) return {g->m, g->k};
  if (auto* c = std::get_if<Conv2dShape>(&l.op)) return {c->h * c->w, c->c};
  const auto& p = std::get<MaxPoolShape>(l.op);
  return {p.h * p.w, p.c};
}

// Weight operand as stored (before any transpose): k x n.
inline MatrixDims weight_dims(const LayerOp& l) {
  if (auto* g = std::get_if<GemmShape>(&l.op)) return {g->k, g->n};
  if (auto* c = std::get_if<Conv2dShape>(&l.op)) return {c->fy * c->fx * c->c, c->oc};
  return {0, 0};
}

struct Network {
  std::string name;
  std::string source;  // provenance note for builtin subsets
  std::vector<LayerOp> layers;
};

inline std::vector<std::string> validate_network(const Network& net) {
  std::vector<std::string> errs;
  if (net.layers.empty()) errs.push_back(net.name + ": network has no layers");
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    const std::string where = net.name + "/" + l.name + ": ";
    try {
      if (auto* g = std::get_if<GemmShape>(&l.op)) {
        if (!g->valid()) errs.push_back(where + "gemm dimensions must be >= 1");
      } else if (auto* c = std::get_if<Conv2dShape>(&l.op)) {
        check_conv(*c);
      } else {
        const auto& p = std::get<MaxPoolShape>(l.op);
        if (p.c < 1 || !p.integral()) errs.push_back(where + "maxpool output size is not integral");
      }
    } catch (const ShapeError& e) {
      errs.push_back(where + e.what());
    }
    if (!l.quant.valid()) errs.push_back(where + "quant shift must be in [0,31]");
    auto check_src = [&](const OperandSource& s, const char* what, MatrixDims need) {
      if (s.off_chip()) {
        if (s.transpose) errs.push_back(where + what + ": transpose only applies to on-chip producers");
        return;
      }
      if (s.layer >= static_cast<int>(i)) {
        errs.push_back(where + what + " must reference an earlier layer");
        return;
      }
      MatrixDims got = output_dims(net.layers[static_cast<std::size_t>(s.layer)]);
      if (s.transpose) std::swap(got.rows, got.cols);
      if (got != need)
        errs.push_back(where + what + " shape " + std::to_string(need.rows) + "x" + std::to_string(need.cols) +
                       " does not match producer output " + std::to_string(got.rows) + "x" +
                       std::to_string(got.cols));
    };
    bool shapes_ok = errs.empty() || errs.back().rfind(where, 0) != 0;
    if (!shapes_ok) continue;
    if (l.input.transpose) errs.push_back(where + "input operand cannot be transposed");
    check_src(l.input, "input", input_dims(l));
    if (l.has_weight()) {
      if (l.weight.transpose && l.is_conv()) errs.push_back(where + "conv weights cannot be transposed");
      check_src(l.weight, "weight", weight_dims(l));
    } else if (!l.weight.off_chip()) {
      errs.push_back(where + "maxpool has no weight operand");
    }
  }
  return errs;
}

// Single-head attention chain: Q, K, V projections, S = Q.K^T, O = S.V,
// P = O.Wo. Softmax between S and O is a host boundary. Layer names are
// prefixed so several heads can live in one network.
inline std::vector<LayerOp> mha_layers(std::int64_t tokens, std::int64_t d_model, std::int64_t d_head,
                                       const std::string& prefix, int first_index, const QuantParams& q = {}) {
  if (tokens < 1 || d_model < 1 || d_head < 1) throw ShapeError("mha: dimensions must be positive");
  std::vector<LayerOp> out;
  auto add = [&](const std::string& n, GemmShape g, OperandSource in, OperandSource w, std::string host = {}) {
    out.push_back(LayerOp{prefix + n, g, q, in, w, std::move(host)});
  };
  const int qi = first_index, ki = first_index + 1, vi = first_index + 2, si = first_index + 3,
            oi = first_index + 4;
  add("q", {tokens, d_model, d_head}, {}, {});
  add("k", {tokens, d_model, d_head}, {}, {});
  add("v", {tokens, d_model, d_head}, {}, {});
  add("s", {tokens, d_head, tokens}, {qi, false}, {ki, true});
  add("o", {tokens, tokens, d_head}, {si, false}, {vi, false}, "softmax");
  add("p", {tokens, d_head, d_model}, {oi, false}, {});
  return out;
}

inline Network mha_sequence(std::int64_t tokens, std::int64_t d_model, std::int64_t d_head) {
  Network net;
  net.name = "mha";
  net.source = "single attention head";
  net.layers = mha_layers(tokens, d_model, d_head, "", 0);
  return net;
}

inline std::int64_t total_macs(const Network& net) {
  std::int64_t s = 0;
  for (const auto& l : net.layers) s += layer_macs(l);
  return s;
}

}  // namespace voltrasim
