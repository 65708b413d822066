// Copyright 2026 The SpecVM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "svm/memory.h"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace svm {
namespace {

bool IsZeroPage(const std::array<uint8_t, kPageSize>& page) {
  return std::all_of(page.begin(), page.end(), [](uint8_t b) { return b == 0; });
}

// Byte distance between two inclusive intervals; 0 when they overlap.
uint64_t Distance(uint64_t a_lo, uint64_t a_hi, uint64_t b_lo, uint64_t b_hi) {
  if (a_hi < b_lo) return b_lo - a_hi;
  if (a_lo > b_hi) return a_lo - b_hi;
  return 0;
}

}  // namespace

std::string MemoryLayout::Describe() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "scratch  [0x0, 0x%llx)\n"
                "static   0x%llx\n"
                "stack    [0x%llx, 0x%llx) grows down\n"
                "heap     0x%llx (ceiling %llu bytes)\n"
                "redzone  %llu bytes\n"
                "referent window +/-%llu bytes\n",
                static_cast<unsigned long long>(scratch_size), static_cast<unsigned long long>(static_base),
                static_cast<unsigned long long>(stack_base), static_cast<unsigned long long>(stack_top),
                static_cast<unsigned long long>(heap_base), static_cast<unsigned long long>(heap_ceiling),
                static_cast<unsigned long long>(redzone), static_cast<unsigned long long>(referent_window));
  return buf;
}

uint8_t Memory::Read8(uint64_t addr) const {
  auto it = pages_.find(addr / kPageSize);
  if (it == pages_.end()) return 0;
  return it->second[addr % kPageSize];
}

uint64_t Memory::Read64(uint64_t addr) const {
  uint64_t value = 0;
  for (int i = 7; i >= 0; --i) value = (value << 8) | Read8(addr + static_cast<uint64_t>(i));
  return value;
}

Memory::Page& Memory::PageFor(uint64_t addr) {
  auto [it, inserted] = pages_.try_emplace(addr / kPageSize);
  if (inserted) it->second.fill(0);
  return it->second;
}

void Memory::Write8(uint64_t addr, uint8_t value) {
  Page& page = PageFor(addr);
  uint8_t& slot = page[addr % kPageSize];
  if (log_ != nullptr) log_->Record(addr, slot);
  slot = value;
}

void Memory::Write64(uint64_t addr, uint64_t value) {
  for (uint64_t i = 0; i < 8; ++i) Write8(addr + i, static_cast<uint8_t>(value >> (8 * i)));
}

void Memory::WriteBytes(uint64_t addr, const std::vector<uint8_t>& bytes) {
  for (size_t i = 0; i < bytes.size(); ++i) Write8(addr + i, bytes[i]);
}

void Memory::Rollback(WriteLog& log, size_t mark) {
  log.UnwindTo(mark, [this](uint64_t addr, uint8_t old) { PageFor(addr)[addr % kPageSize] = old; });
}

bool Memory::operator==(const Memory& other) const {
  auto covered = [](const Memory& a, const Memory& b) {
    for (const auto& [index, page] : a.pages_) {
      auto it = b.pages_.find(index);
      if (it == b.pages_.end()) {
        if (!IsZeroPage(page)) return false;
      } else if (it->second != page) {
        return false;
      }
    }
    return true;
  };
  return covered(*this, other) && covered(other, *this);
}

std::optional<uint64_t> AllocationTable::Allocate(uint64_t size) {
  if (size == 0) size = 1;
  const uint64_t base = bump_;
  if (size > limit_ - base) return std::nullopt;
  uint64_t advance = size + redzone_;
  advance = (advance + 15) & ~uint64_t{15};
  if (advance > limit_ - base) return std::nullopt;
  bump_ = base + advance;
  records_.push_back({base, size, true});
  return base;
}

void AllocationTable::Restore(size_t count, uint64_t bump) {
  records_.resize(std::min(count, records_.size()));
  bump_ = bump;
}

std::string_view AccessKindName(AccessKind k) {
  switch (k) {
    case AccessKind::kValid: return "VALID";
    case AccessKind::kRedzone: return "REDZONE";
    case AccessKind::kUnmapped: return "UNMAPPED";
    case AccessKind::kScratch: return "SCRATCH";
  }
  return "?";
}

AccessClass CheckAccess(const MemoryLayout& layout, uint64_t static_size, const AllocationTable& allocs,
                        uint64_t addr, uint64_t width) {
  if (width == 0) width = 1;
  if (addr > std::numeric_limits<uint64_t>::max() - width) return {AccessKind::kUnmapped, std::nullopt};
  const uint64_t end = addr + width;  // exclusive
  auto inside = [&](uint64_t lo, uint64_t hi) { return addr >= lo && end <= hi; };

  if (inside(0, layout.scratch_size)) return {AccessKind::kScratch, std::nullopt};
  if (static_size > 0 && inside(layout.static_base, layout.static_base + static_size)) {
    return {AccessKind::kValid, std::nullopt};
  }
  if (inside(layout.stack_base, layout.stack_top)) return {AccessKind::kValid, std::nullopt};

  const auto& records = allocs.records();
  // Records are sorted by base; start from the first allocation that could
  // be within the window.
  const uint64_t window_lo = addr > layout.referent_window ? addr - layout.referent_window : 0;
  auto it = std::lower_bound(records.begin(), records.end(), window_lo,
                             [](const Allocation& a, uint64_t lo) { return a.base + a.size <= lo; });
  std::optional<uint32_t> best;
  uint64_t best_dist = 0;
  for (; it != records.end(); ++it) {
    if (it->base > end - 1 && it->base - (end - 1) > layout.referent_window) break;
    if (!it->live) continue;
    const uint64_t hi = it->base + it->size - 1;
    if (addr >= it->base && end - 1 <= hi) return {AccessKind::kValid, std::nullopt};
    const uint64_t dist = Distance(addr, end - 1, it->base, hi);
    if (dist > layout.referent_window) continue;
    if (!best || dist < best_dist) {
      best = static_cast<uint32_t>(it - records.begin());
      best_dist = dist;
    }
  }
  if (!best) return {AccessKind::kUnmapped, std::nullopt};
  const Allocation& a = records[*best];
  Referent ref{*best, a.base, a.size, static_cast<int64_t>(addr - a.base)};
  return {best_dist <= layout.redzone ? AccessKind::kRedzone : AccessKind::kUnmapped, ref};
}

}  // namespace svm
