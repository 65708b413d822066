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

#ifndef SVM_ENGINE_H_
#define SVM_ENGINE_H_

// Speculation exposure: at every architectural conditional branch the engine
// checkpoints the machine, executes the mispredicted side for real (nesting
// further mispredictions depth-first, up to the allowed order), records any
// speculative memory-safety or code-pointer violation, and rolls back before
// following the correct outcome. The architectural result is bit-identical
// to RunArchitectural.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "svm/detect.h"
#include "svm/isa.h"
#include "svm/memory.h"
#include "svm/vm.h"

namespace svm {

class EngineError : public std::runtime_error {
 public:
  explicit EngineError(const std::string& what) : std::runtime_error(what) {}
};

struct SpecConfig {
  uint64_t window = 250;  // speculated instructions per simulation tree
  uint64_t stride = 50;   // long blocks are charged in chunks of this size
  uint32_t max_order = 6;
  uint64_t order_base = 4;
  bool enabled = true;
  // When false every tree is explored up to max_order regardless of how
  // often its root has executed.
  bool prioritized = true;
  IdentityMode identity = IdentityMode::kOffset;

  // Empty when valid, otherwise a description of the first problem.
  std::string Check() const;
};

// Nested-misprediction budget for the n-th execution of a branch:
// 1 + the largest j with n divisible by base^j, clamped to [1, max_order].
uint32_t AllowedOrder(uint64_t n, const SpecConfig& cfg);

// Number of distinct inputs that executed each branch architecturally.
// Safe to share between workers.
class BranchStats {
 public:
  BranchStats() = default;
  BranchStats(const BranchStats& other);
  BranchStats& operator=(const BranchStats& other);

  // Returns the count after incrementing.
  uint64_t Increment(const InstructionId& branch);
  uint64_t Get(const InstructionId& branch) const;
  void Set(const InstructionId& branch, uint64_t count);
  std::map<InstructionId, uint64_t> Snapshot() const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<InstructionId, uint64_t> counts_;
};

struct Checkpoint {
  MachineState state;  // pc is the forked BR
  size_t alloc_count = 0;
  uint64_t alloc_bump = 0;
  uint64_t counter = 0;
  size_t log_mark = 0;
  InstructionId branch;
  bool resume_taken = false;  // the outcome to follow after rollback
  uint32_t depth = 0;         // mispredictions in effect below this frame
};

// Stack of snapshots plus the shared write log. While any frame is open the
// machine's memory logs every write.
class CheckpointStack {
 public:
  explicit CheckpointStack(size_t max_frames) : max_frames_(max_frames) {}

  void Push(Machine& m, const InstructionId& branch, bool resume_taken, uint32_t depth, uint64_t counter);
  // Restores the top frame (memory, registers, allocator) and pops it.
  Checkpoint Rollback(Machine& m);

  bool empty() const { return frames_.empty(); }
  size_t size() const { return frames_.size(); }
  const std::vector<Checkpoint>& frames() const { return frames_; }
  const WriteLog& log() const { return log_; }

 private:
  size_t max_frames_;
  std::vector<Checkpoint> frames_;
  WriteLog log_;
};

struct Edge {
  InstructionId branch;
  bool taken = false;

  auto operator<=>(const Edge&) const = default;
};

struct RunTrace {
  std::vector<ViolationRecord> violations;  // deduplicated per run, discovery order
  std::vector<Edge> covered_edges;          // architectural only, first-hit order
  std::map<InstructionId, uint32_t> max_order;
  uint64_t arch_steps = 0;
  uint64_t spec_steps = 0;
  uint64_t trees = 0;
};

struct ExposureResult {
  RunTrace trace;
  RunResult arch;
};

class Engine {
 public:
  Engine(const Program& program, SpecConfig cfg, MemoryLayout layout = {}, RunLimits limits = {});

  // `stats` may be null, in which case every branch counts as executed once.
  // `input_id` and `run` are copied into each ViolationRecord.
  ExposureResult Run(std::span<const uint8_t> input, BranchStats* stats, const std::string& input_id = "",
                     uint64_t run = 0);

  const SpecConfig& config() const { return cfg_; }
  const Program& program() const { return program_; }

 private:
  class RunState;

  const Program& program_;
  SpecConfig cfg_;
  MemoryLayout layout_;
  RunLimits limits_;
};

}  // namespace svm

#endif  // SVM_ENGINE_H_
