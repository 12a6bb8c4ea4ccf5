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
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "voltrasim/common.hpp"
#include "voltrasim/config.hpp"

namespace voltrasim {

struct RegionViolation : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct Region {
  std::int64_t base = 0;    // word address
  std::int64_t length = 0;  // words
  std::int64_t end() const { return base + length; }
  bool contains(std::int64_t addr) const { return addr >= base && addr < end(); }
  bool overlaps(const Region& o) const { return base < o.end() && o.base < end(); }
};

// Operand id -> scratchpad region. Regions never overlap.
class AllocationPlan {
 public:
  explicit AllocationPlan(std::int64_t capacity_words = 0) : capacity_(capacity_words) {}

  void add(const std::string& id, Region r) {
    if (r.base < 0 || r.length < 0 || r.end() > capacity_)
      throw std::invalid_argument("allocation: region for '" + id + "' exceeds memory capacity");
    for (const auto& [other, o] : regions_)
      if (o.length > 0 && r.length > 0 && o.overlaps(r))
        throw std::logic_error("allocation: region for '" + id + "' overlaps '" + other + "'");
    if (!regions_.emplace(id, r).second) throw std::logic_error("allocation: duplicate operand '" + id + "'");
  }
  void remove(const std::string& id) { regions_.erase(id); }
  bool has(const std::string& id) const { return regions_.count(id) != 0; }
  const Region& at(const std::string& id) const {
    auto it = regions_.find(id);
    if (it == regions_.end()) throw std::out_of_range("allocation: no region for '" + id + "'");
    return it->second;
  }
  bool covers(std::int64_t addr) const {
    for (const auto& [id, r] : regions_)
      if (r.contains(addr)) return true;
    return false;
  }
  bool disjoint() const {
    for (auto i = regions_.begin(); i != regions_.end(); ++i)
      for (auto j = std::next(i); j != regions_.end(); ++j)
        if (i->second.length > 0 && j->second.length > 0 && i->second.overlaps(j->second)) return false;
    return true;
  }
  std::int64_t used_words() const {
    std::int64_t s = 0;
    for (const auto& [id, r] : regions_) s += r.length;
    return s;
  }
  std::int64_t capacity_words() const { return capacity_; }
  const std::map<std::string, Region>& regions() const { return regions_; }

 private:
  std::int64_t capacity_;
  std::map<std::string, Region> regions_;
};

// Banked scratchpad with low-order interleaving: bank = addr mod banks,
// row = addr div banks. Storage is kept in address order.
class BankArray {
 public:
  BankArray(std::int64_t banks, std::int64_t words_per_bank, std::int64_t super_bank_width = 8)
      : banks_(banks), rows_(words_per_bank), sbw_(super_bank_width),
        data_(static_cast<std::size_t>(banks * words_per_bank), 0) {}

  std::int64_t banks() const { return banks_; }
  std::int64_t words() const { return banks_ * rows_; }
  std::int64_t super_bank_width() const { return sbw_; }
  std::int64_t bank_of(std::int64_t addr) const { return addr % banks_; }
  std::int64_t row_of(std::int64_t addr) const { return addr / banks_; }

  // Debug-mode region checking: accesses outside the plan throw.
  void set_region_check(const AllocationPlan* plan) { plan_ = plan; }

  Word read(std::int64_t addr) const {
    check(addr, 1);
    return data_[static_cast<std::size_t>(addr)];
  }
  void write(std::int64_t addr, Word w) {
    check(addr, 1);
    data_[static_cast<std::size_t>(addr)] = w;
  }
  // A super-bank access touches sbw consecutive words of one row.
  std::vector<Word> read_wide(std::int64_t addr) const {
    check_wide(addr);
    auto b = data_.begin() + addr;
    return {b, b + sbw_};
  }
  void write_wide(std::int64_t addr, std::span<const Word> words) {
    check_wide(addr);
    if (static_cast<std::int64_t>(words.size()) != sbw_) throw std::invalid_argument("write_wide: size mismatch");
    std::copy(words.begin(), words.end(), data_.begin() + addr);
  }

  // Unchecked bulk access for DMA fills.
  std::span<Word> raw() { return data_; }
  std::span<const Word> raw() const { return data_; }

  void dump(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    for (Word w : data_) {
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(w >> (8 * i));
      f.write(reinterpret_cast<const char*>(b), 8);
    }
  }

 private:
  void check(std::int64_t addr, std::int64_t n) const {
    if (addr < 0 || addr + n > words()) throw std::out_of_range("memory: address " + std::to_string(addr) + " out of range");
    if (plan_)
      for (std::int64_t a = addr; a < addr + n; ++a)
        if (!plan_->covers(a)) throw RegionViolation("memory: address " + std::to_string(a) + " is not allocated");
  }
  void check_wide(std::int64_t addr) const {
    if (addr % sbw_ != 0) throw std::invalid_argument("memory: misaligned super-bank access at " + std::to_string(addr));
    check(addr, sbw_);
  }

  std::int64_t banks_, rows_, sbw_;
  std::vector<Word> data_;
  const AllocationPlan* plan_ = nullptr;
};

enum class AccessKind { Read, Write };
enum class AccessClass { Input, Weight, Psum, Output, Simd, Reshuffle, Dma };

struct MemRequest {
  int channel = 0;
  std::int64_t word_addr = 0;
  int width = 64;  // 64 or 512
  AccessKind kind = AccessKind::Read;
  AccessClass cls = AccessClass::Input;
};

struct ArbitrationResult {
  std::vector<bool> granted;  // parallel to the request list
  std::int64_t grants = 0;
  std::int64_t stalls = 0;
};

// Round-robin arbitration over a fully connected crossbar. Requests are
// visited in rotating channel order starting at the priority pointer and
// granted when every bank they touch is still free this cycle, so each
// bank grants at most one request and a 512-bit request takes all eight
// banks of its super-bank group or none. The pointer then moves to the
// first refused channel, which therefore wins outright next cycle; a
// persistent request is served within as many cycles as there are
// contending channels.
class BankArbiter {
 public:
  BankArbiter(std::int64_t banks, std::int64_t super_bank_width, int channels)
      : banks_(banks), sbw_(super_bank_width), channels_(channels) {}

  ArbitrationResult arbitrate(std::span<const MemRequest> reqs) {
    ArbitrationResult res;
    res.granted.assign(reqs.size(), false);
    if (reqs.empty()) return res;
    by_channel_.assign(static_cast<std::size_t>(channels_), -1);
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      const auto& r = reqs[i];
      if (r.channel < 0 || r.channel >= channels_) throw std::out_of_range("arbitrate: bad channel id");
      if (by_channel_[static_cast<std::size_t>(r.channel)] >= 0) throw std::logic_error("arbitrate: two requests from one channel");
      if (r.width == 512) {
        if (bank(r) % sbw_ != 0) throw std::invalid_argument("arbitrate: misaligned 512-bit request");
      } else if (r.width != 64) {
        throw std::invalid_argument("arbitrate: width must be 64 or 512");
      }
      by_channel_[static_cast<std::size_t>(r.channel)] = static_cast<int>(i);
    }
    busy_.assign(static_cast<std::size_t>(banks_), false);
    int first_refused = -1;
    for (int d = 0; d < channels_; ++d) {
      const int ch = (ptr_ + d) % channels_;
      const int i = by_channel_[static_cast<std::size_t>(ch)];
      if (i < 0) continue;
      const auto& r = reqs[static_cast<std::size_t>(i)];
      const auto b0 = bank(r);
      const std::int64_t span = r.width == 512 ? sbw_ : 1;
      bool free = true;
      for (std::int64_t b = b0; b < b0 + span; ++b) free = free && !busy_[static_cast<std::size_t>(b)];
      if (!free) {
        ++res.stalls;
        if (first_refused < 0) first_refused = ch;
        continue;
      }
      for (std::int64_t b = b0; b < b0 + span; ++b) busy_[static_cast<std::size_t>(b)] = true;
      res.granted[static_cast<std::size_t>(i)] = true;
      ++res.grants;
    }
    ptr_ = first_refused >= 0 ? first_refused : (ptr_ + 1) % channels_;
    return res;
  }

  int priority_pointer() const { return ptr_; }

 private:
  std::int64_t bank(const MemRequest& r) const { return r.word_addr % banks_; }

  std::int64_t banks_, sbw_;
  int channels_;
  int ptr_ = 0;
  std::vector<int> by_channel_;
  std::vector<bool> busy_;
};

struct PortForward {
  std::optional<MemRequest> psum;
  std::optional<MemRequest> output;
};

// Shared crossbar port for a psum-read / output-write channel pair. Psum
// reads win; without time-multiplexing each side has its own port.
inline PortForward time_mux_port(const std::optional<MemRequest>& psum_req, const std::optional<MemRequest>& out_req,
                                 bool time_mux = true) {
  if (!time_mux) return {psum_req, out_req};
  if (psum_req) return {psum_req, std::nullopt};
  return {std::nullopt, out_req};
}

}  // namespace voltrasim
