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

#ifndef SVM_MEMORY_H_
#define SVM_MEMORY_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace svm {

// Address-space layout. All regions are configuration; nothing in the VM
// hardcodes these values.
struct MemoryLayout {
  uint64_t scratch_size = 4096;  // [0, scratch_size) is always mapped
  uint64_t static_base = 0x1'0000;
  uint64_t stack_base = 0x2'0000;  // stack occupies [stack_base, stack_top)
  uint64_t stack_top = 0x3'0000;   // and grows down from stack_top
  uint64_t heap_base = 0x10'0000;
  uint64_t heap_ceiling = 64ull << 20;  // bytes of heap the bump allocator may hand out
  uint64_t redzone = 16;
  uint64_t referent_window = 4096;

  std::string Describe() const;
};

inline constexpr uint64_t kPageSize = 4096;

// Append-only undo log of (address, previous byte) pairs.
class WriteLog {
 public:
  struct Entry {
    uint64_t addr;
    uint8_t old;
  };

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void Record(uint64_t addr, uint8_t old) { entries_.push_back({addr, old}); }
  const std::vector<Entry>& entries() const { return entries_; }

  // Pops entries above `mark`, newest first, handing each to `restore`.
  template <typename Fn>
  void UnwindTo(size_t mark, Fn&& restore) {
    while (entries_.size() > mark) {
      const Entry e = entries_.back();
      entries_.pop_back();
      restore(e.addr, e.old);
    }
  }

 private:
  std::vector<Entry> entries_;
};

// Sparse byte-addressable storage in 4 KiB pages. Absent pages read as zero;
// whether an address is *accessible* is decided by CheckAccess, not here.
class Memory {
 public:
  uint8_t Read8(uint64_t addr) const;
  uint64_t Read64(uint64_t addr) const;  // little-endian
  void Write8(uint64_t addr, uint8_t value);
  void Write64(uint64_t addr, uint64_t value);
  void WriteBytes(uint64_t addr, const std::vector<uint8_t>& bytes);

  // While attached, every byte write records its previous value.
  void AttachLog(WriteLog* log) { log_ = log; }
  WriteLog* log() const { return log_; }

  // Undoes logged writes down to `mark` without re-logging them.
  void Rollback(WriteLog& log, size_t mark);

  // Content equality; an all-zero page equals an absent one.
  bool operator==(const Memory& other) const;

 private:
  using Page = std::array<uint8_t, kPageSize>;

  Page& PageFor(uint64_t addr);

  std::unordered_map<uint64_t, Page> pages_;
  WriteLog* log_ = nullptr;
};

struct Allocation {
  uint64_t base = 0;
  uint64_t size = 0;
  bool live = true;

  bool operator==(const Allocation&) const = default;
};

// Bump allocator with trailing redzones. Records are kept in base order.
class AllocationTable {
 public:
  explicit AllocationTable(const MemoryLayout& layout)
      : bump_(layout.heap_base), limit_(layout.heap_base + layout.heap_ceiling), redzone_(layout.redzone) {}

  // Returns the 16-byte aligned base, or nullopt when the heap is exhausted.
  std::optional<uint64_t> Allocate(uint64_t size);

  const std::vector<Allocation>& records() const { return records_; }
  uint64_t bump() const { return bump_; }
  uint64_t redzone() const { return redzone_; }

  // Restores a snapshot taken as (records().size(), bump()).
  void Restore(size_t count, uint64_t bump);

  bool operator==(const AllocationTable& other) const {
    return records_ == other.records_ && bump_ == other.bump_;
  }

 private:
  std::vector<Allocation> records_;
  uint64_t bump_;
  uint64_t limit_;
  uint64_t redzone_;
};

enum class AccessKind : uint8_t { kValid, kRedzone, kUnmapped, kScratch };

std::string_view AccessKindName(AccessKind k);

struct Referent {
  uint32_t index = 0;  // position in the allocation table
  uint64_t base = 0;
  uint64_t size = 0;
  int64_t offset = 0;  // accessed address - base

  bool operator==(const Referent&) const = default;
};

struct AccessClass {
  AccessKind kind = AccessKind::kValid;
  std::optional<Referent> referent;

  bool ok() const { return kind == AccessKind::kValid || kind == AccessKind::kScratch; }
  bool operator==(const AccessClass&) const = default;
};

// Classifies [addr, addr + width). `static_size` is the length of the
// program's static data at layout.static_base.
AccessClass CheckAccess(const MemoryLayout& layout, uint64_t static_size, const AllocationTable& allocs,
                        uint64_t addr, uint64_t width);

}  // namespace svm

#endif  // SVM_MEMORY_H_
