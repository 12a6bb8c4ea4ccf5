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
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "voltrasim/common.hpp"
#include "voltrasim/memory.hpp"
#include "voltrasim/workload.hpp"

namespace voltrasim {

struct LoopDim {
  std::int64_t bound = 1;
  std::int64_t stride = 0;
  bool operator==(const LoopDim&) const = default;
};

// Affine address stream: base + sum(idx_i * stride_i), dims[0] fastest.
struct AffinePattern {
  std::int64_t base = 0;
  std::vector<LoopDim> dims;

  std::int64_t count() const {
    std::int64_t c = 1;
    for (const auto& d : dims) c *= d.bound;
    return c;
  }
  bool valid() const {
    for (const auto& d : dims)
      if (d.bound < 1) return false;
    return true;
  }
  bool operator==(const AffinePattern&) const = default;
};

inline std::int64_t agu_next(const AffinePattern& p, std::int64_t cursor) {
  if (cursor < 0 || cursor >= p.count()) throw std::out_of_range("agu: cursor exhausted");
  std::int64_t addr = p.base;
  for (const auto& d : p.dims) {
    addr += (cursor % d.bound) * d.stride;
    cursor /= d.bound;
  }
  return addr;
}

// Hardware-style AGU: incremental counters over a sequence of patterns.
// Consecutive patterns model base-pointer updates between blocks.
class Agu {
 public:
  Agu() = default;
  explicit Agu(std::vector<AffinePattern> program) : prog_(std::move(program)) { rewind(); }
  explicit Agu(AffinePattern p) : Agu(std::vector<AffinePattern>{std::move(p)}) {}

  bool exhausted() const { return seg_ >= prog_.size(); }
  std::int64_t remaining() const { return remaining_; }

  std::int64_t next() {
    if (exhausted()) throw std::out_of_range("agu: stream exhausted");
    const std::int64_t out = addr_;
    --remaining_;
    const auto& dims = prog_[seg_].dims;
    std::size_t i = 0;
    for (; i < dims.size(); ++i) {
      addr_ += dims[i].stride;
      if (++idx_[i] < dims[i].bound) break;
      addr_ -= dims[i].stride * dims[i].bound;
      idx_[i] = 0;
    }
    if (i == dims.size()) {
      ++seg_;
      skip_empty();
      load();
    }
    return out;
  }

  void rewind() {
    seg_ = 0;
    remaining_ = 0;
    for (const auto& p : prog_) {
      if (!p.valid()) throw std::invalid_argument("agu: loop bounds must be >= 1");
      remaining_ += p.count();
    }
    skip_empty();
    load();
  }

 private:
  void skip_empty() {
    while (seg_ < prog_.size() && prog_[seg_].count() == 0) ++seg_;
  }
  void load() {
    if (exhausted()) return;
    addr_ = prog_[seg_].base;
    idx_.assign(prog_[seg_].dims.size(), 0);
  }

  std::vector<AffinePattern> prog_;
  std::size_t seg_ = 0;
  std::int64_t addr_ = 0;
  std::int64_t remaining_ = 0;
  std::vector<std::int64_t> idx_;
};

// Placement of a convolution input tile held on chip in C/8HWC8 layout:
// word = cb_local * rows * Wp + (iy - y0) * Wp + ix over the padded map.
struct ConvTileView {
  std::int64_t y0 = 0;       // first padded input row held
  std::int64_t rows = 0;     // padded input rows held
  std::int64_t cb0 = 0;      // first channel block held
  std::int64_t cbs = 1;      // channel blocks held
  std::int64_t p0 = 0;       // first output pixel of the tile
  std::int64_t pixels = 0;   // output pixels in the tile
  std::int64_t n_blocks = 1; // output-channel blocks (weight repeat)
};

// Input-streamer pattern for one array row over one m block of a conv
// tile. Dims innermost first: fx, fy, channel block, n-block repeat, and
// two unit dims that complete the 6-D AGU. Rows past the tile's last
// pixel read the zero region instead.
inline AffinePattern conv_input_pattern(const Conv2dShape& c, const ConvTileView& t, std::int64_t channel_row,
                                        std::int64_t m_block = 0, std::int64_t region_base = 0,
                                        std::int64_t zero_base = 0) {
  if (channel_row < 0 || channel_row >= 8) throw ShapeError("conv pattern: channel row out of range");
  if (t.rows < 1 || t.cbs < 1 || t.pixels < 0) throw ShapeError("conv pattern: empty tile");
  const std::int64_t wp = c.padded_w();
  const std::int64_t local = m_block * 8 + channel_row;
  AffinePattern p;
  p.dims = {{c.fx, 1}, {c.fy, wp}, {t.cbs, t.rows * wp}, {t.n_blocks, 0}, {1, 0}, {1, 0}};
  if (local >= t.pixels) {
    p.base = zero_base + channel_row;
    for (auto& d : p.dims) d.stride = 0;
    return p;
  }
  const std::int64_t pix = t.p0 + local;
  const std::int64_t oy = pix / c.ow(), ox = pix % c.ow();
  const std::int64_t iy = oy * c.stride - t.y0;
  if (iy < 0 || iy + c.fy > t.rows) throw ShapeError("conv pattern: tile rows do not cover the receptive field");
  p.base = region_base + iy * wp + ox * c.stride;
  return p;
}

inline std::vector<AffinePattern> conv_input_program(const Conv2dShape& c, const ConvTileView& t,
                                                     std::int64_t channel_row, std::int64_t region_base,
                                                     std::int64_t zero_base) {
  std::vector<AffinePattern> prog;
  const std::int64_t mb = ceil_div(t.pixels, 8);
  prog.reserve(static_cast<std::size_t>(mb));
  for (std::int64_t b = 0; b < mb; ++b) prog.push_back(conv_input_pattern(c, t, channel_row, b, region_base, zero_base));
  return prog;
}

// Input-streamer pattern for a blocked row-major GEMM operand: row r of
// every 8x8 block, k blocks innermost, n-block repeat, then m blocks.
// row_blocks is the number of k blocks per block-row in storage.
inline AffinePattern gemm_input_pattern(const GemmShape& tile, std::int64_t row_blocks, std::int64_t channel_row,
                                        std::int64_t base = 0) {
  return {base + channel_row,
          {{ceil_div(tile.k, 8), 8}, {ceil_div(tile.n, 8), 0}, {ceil_div(tile.m, 8), row_blocks * 8}}};
}

// Weight-streamer pattern in super-bank units over 8x8 int8 blocks stored
// K-block-major within each N block: k block, n block, m-block repeat.
inline AffinePattern gemm_weight_pattern(const GemmShape& tile, std::int64_t k_stride = -1, std::int64_t n_stride = -1,
                                         std::int64_t base = 0) {
  const std::int64_t kb = ceil_div(tile.k, 8);
  if (k_stride < 0) k_stride = 1;
  if (n_stride < 0) n_stride = kb;
  return {base, {{kb, k_stride}, {ceil_div(tile.n, 8), n_stride}, {ceil_div(tile.m, 8), 0}}};
}

using Block512 = std::array<Word, 8>;

inline std::int8_t byte_of(Word w, int j) { return static_cast<std::int8_t>((w >> (8 * j)) & 0xff); }
inline Word with_byte(Word w, int j, std::int8_t v) {
  const Word mask = Word{0xff} << (8 * j);
  return (w & ~mask) | (static_cast<Word>(static_cast<std::uint8_t>(v)) << (8 * j));
}

// Byte (i, j) -> (j, i) of an 8x8 block; word i holds row i.
inline Block512 transpose8x8(const Block512& b) {
  Block512 out{};
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) out[static_cast<std::size_t>(j)] = with_byte(out[static_cast<std::size_t>(j)], i, byte_of(b[static_cast<std::size_t>(i)], j));
  return out;
}

// One memory-interface channel of a read streamer: AGU, pending request,
// and a FIFO whose slots are reserved at issue. Data becomes poppable
// once the memory latency after the grant has elapsed.
class ReadChannel {
 public:
  struct Entry {
    std::vector<Word> data;
    Cycle ready = 0;
  };

  ReadChannel() = default;
  ReadChannel(int id, int space, int width, AccessClass cls, std::int64_t depth, Agu agu, std::int64_t addr_scale = 1,
              std::int64_t addr_offset = 0)
      : id_(id), space_(space), width_(width), cls_(cls), depth_(depth), agu_(std::move(agu)),
        scale_(addr_scale), offset_(addr_offset) {}

  // Request this channel presents to the crossbar in the current cycle.
  // With prefetching the MIC runs ahead while the FIFO has room; on
  // demand it only asks when the FIFO has drained.
  std::optional<MemRequest> request(bool prefetch) {
    if (!pending_) {
      if (agu_.exhausted() || static_cast<std::int64_t>(fifo_.size()) >= depth_) return std::nullopt;
      if (!prefetch && !fifo_.empty()) return std::nullopt;
      pending_ = agu_.next() * scale_ + offset_;
    }
    return MemRequest{id_, *pending_, width_, AccessKind::Read, cls_};
  }

  void grant(Cycle now, std::int64_t latency, std::vector<Word> data) {
    if (!pending_) throw std::logic_error("grant without a pending request");
    fifo_.push_back({std::move(data), now + latency});
    pending_.reset();
    ++grants_;
  }
  void deny() { ++conflicts_; denied_ = true; }
  // True if a refused request has left this channel without buffered data.
  bool denied() const { return denied_; }

  bool head_ready(Cycle now) const { return !fifo_.empty() && fifo_.front().ready <= now; }
  std::vector<Word> pop(Cycle now) {
    if (!head_ready(now)) throw InvariantViolation(now, "pop of data not yet arrived on channel " + std::to_string(id_));
    auto d = std::move(fifo_.front().data);
    fifo_.pop_front();
    ++pops_;
    if (!fifo_.empty()) denied_ = false;
    return d;
  }

  bool finished() const { return agu_.exhausted() && !pending_ && fifo_.empty(); }
  std::int64_t occupancy() const { return static_cast<std::int64_t>(fifo_.size()); }
  std::int64_t depth() const { return depth_; }
  std::optional<std::int64_t> pending_addr() const { return pending_; }
  int id() const { return id_; }
  int space() const { return space_; }
  int width() const { return width_; }
  std::int64_t conflicts() const { return conflicts_; }
  std::int64_t pops() const { return pops_; }

 private:
  int id_ = 0;
  int space_ = 0;
  int width_ = 64;
  AccessClass cls_ = AccessClass::Input;
  std::int64_t depth_ = 1;
  Agu agu_;
  std::int64_t scale_ = 1, offset_ = 0;
  std::deque<Entry> fifo_;
  std::optional<std::int64_t> pending_;
  std::int64_t grants_ = 0, pops_ = 0, conflicts_ = 0;
  bool denied_ = false;
};

// Write channel: producer pushes words, the head is written when granted.
// Addresses come from the channel's AGU in push order.
class WriteChannel {
 public:
  WriteChannel() = default;
  WriteChannel(int id, int space, AccessClass cls, std::int64_t depth, Agu agu)
      : id_(id), space_(space), cls_(cls), depth_(depth), agu_(std::move(agu)) {}

  bool can_push() const { return static_cast<std::int64_t>(fifo_.size()) < depth_; }
  void push(Word w) {
    if (!can_push()) throw std::logic_error("write channel FIFO overflow");
    fifo_.push_back({agu_.next(), w});
  }
  std::optional<MemRequest> request() const {
    if (fifo_.empty()) return std::nullopt;
    return MemRequest{id_, fifo_.front().first, 64, AccessKind::Write, cls_};
  }
  std::pair<std::int64_t, Word> grant() {
    auto e = fifo_.front();
    fifo_.pop_front();
    return e;
  }
  void retarget(Agu agu) { agu_ = std::move(agu); }
  bool empty() const { return fifo_.empty(); }
  int id() const { return id_; }
  int space() const { return space_; }

 private:
  int id_ = 0;
  int space_ = 0;
  AccessClass cls_ = AccessClass::Output;
  std::int64_t depth_ = 1;
  Agu agu_;
  std::deque<std::pair<std::int64_t, Word>> fifo_;
};

}  // namespace voltrasim
