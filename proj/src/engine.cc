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

#include "svm/engine.h"

#include <algorithm>
#include <limits>
#include <utility>

namespace svm {

std::string SpecConfig::Check() const {
  if (window < 1) return "speculation window must be >= 1";
  if (stride < 1) return "check stride must be >= 1";
  if (max_order < 1) return "max order must be >= 1";
  if (order_base < 2) return "order base must be >= 2";
  return "";
}

uint32_t AllowedOrder(uint64_t n, const SpecConfig& cfg) {
  uint32_t order = 1;
  uint64_t period = cfg.order_base;
  while (order < cfg.max_order && n != 0 && n % period == 0) {
    ++order;
    if (period > std::numeric_limits<uint64_t>::max() / cfg.order_base) break;
    period *= cfg.order_base;
  }
  return std::max<uint32_t>(1, std::min(order, cfg.max_order));
}

BranchStats::BranchStats(const BranchStats& other) {
  std::lock_guard<std::mutex> lock(other.mu_);
  counts_ = other.counts_;
}

BranchStats& BranchStats::operator=(const BranchStats& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  counts_ = other.counts_;
  return *this;
}

uint64_t BranchStats::Increment(const InstructionId& branch) {
  std::lock_guard<std::mutex> lock(mu_);
  return ++counts_[branch];
}

uint64_t BranchStats::Get(const InstructionId& branch) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = counts_.find(branch);
  return it == counts_.end() ? 0 : it->second;
}

void BranchStats::Set(const InstructionId& branch, uint64_t count) {
  std::lock_guard<std::mutex> lock(mu_);
  counts_[branch] = count;
}

std::map<InstructionId, uint64_t> BranchStats::Snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return {counts_.begin(), counts_.end()};
}

void CheckpointStack::Push(Machine& m, const InstructionId& branch, bool resume_taken, uint32_t depth,
                           uint64_t counter) {
  if (frames_.size() >= max_frames_) throw EngineError("CHECKPOINT-OVERFLOW");
  if (frames_.empty()) m.memory.AttachLog(&log_);
  Checkpoint cp;
  cp.state = m.state;
  cp.alloc_count = m.allocs.records().size();
  cp.alloc_bump = m.allocs.bump();
  cp.counter = counter;
  cp.log_mark = log_.size();
  cp.branch = branch;
  cp.resume_taken = resume_taken;
  cp.depth = depth;
  frames_.push_back(cp);
}

Checkpoint CheckpointStack::Rollback(Machine& m) {
  if (frames_.empty() || frames_.back().log_mark > log_.size()) throw EngineError("INTERNAL-LOG-UNDERFLOW");
  Checkpoint cp = frames_.back();
  frames_.pop_back();
  m.memory.Rollback(log_, cp.log_mark);
  m.state = cp.state;
  m.allocs.Restore(cp.alloc_count, cp.alloc_bump);
  if (frames_.empty()) {
    m.memory.AttachLog(nullptr);
    if (!log_.empty()) throw EngineError("INTERNAL-LOG-UNDERFLOW");
  }
  return cp;
}

class Engine::RunState {
 public:
  RunState(const Engine& engine, std::span<const uint8_t> input, BranchStats* stats, const std::string& input_id,
           uint64_t run)
      : engine_(engine),
        program_(engine.program_),
        cfg_(engine.cfg_),
        input_(input),
        stats_(stats),
        input_id_(input_id),
        run_(run),
        frames_(static_cast<size_t>(engine.cfg_.max_order) + 1) {}

  ExposureResult Execute() {
    ExposureResult out{RunTrace{}, RunResult{Machine(program_, engine_.layout_), 0, FaultKind::kNone, {}, std::nullopt}};
    trace_ = &out.trace;
    RunResult& result = out.arch;
    Machine& m = result.machine;
    machine_ = &m;
    while (!m.state.halted) {
      if (result.steps >= engine_.limits_.max_steps) {
        result.fault = FaultKind::kStepLimit;
        result.fault_at = m.state.pc;
        break;
      }
      const InstructionId pc = m.state.pc;
      const Instruction& inst = At(pc);
      if (inst.op == Opcode::kBr) {
        const bool taken = BranchTaken(m.state, inst);
        NoteEdge({pc, taken});
        if (cfg_.enabled) SimulateTree(pc, OrderFor(pc), taken);
        TakeBranch(m.state, inst, taken);
        ++result.steps;
        continue;
      }
      StepOutcome step = Step(m, program_, input_, ExecMode::kArchitectural);
      ++result.steps;
      if (step.kind == StepOutcome::Kind::kFault) {
        result.fault = step.fault;
        result.fault_at = step.at;
        result.fault_access = step.access;
        break;
      }
    }
    out.trace.arch_steps = result.steps;
    return out;
  }

 private:
  const Instruction& At(const InstructionId& id) const {
    return program_.functions[id.fn].blocks[id.block].insts[id.idx];
  }

  void NoteEdge(const Edge& e) {
    if (seen_edges_.insert(e).second) trace_->covered_edges.push_back(e);
  }

  uint32_t OrderFor(const InstructionId& branch) {
    auto it = run_orders_.find(branch);
    if (it != run_orders_.end()) return it->second;
    uint32_t order = cfg_.max_order;
    if (cfg_.prioritized) {
      const uint64_t n = stats_ != nullptr ? stats_->Increment(branch) : 1;
      order = AllowedOrder(n, cfg_);
    } else if (stats_ != nullptr) {
      stats_->Increment(branch);
    }
    run_orders_.emplace(branch, order);
    return order;
  }

  // Charges the chunk starting at the current instruction if it begins one.
  // Returns false once the speculation window is exhausted.
  bool Charge() {
    const InstructionId& pc = machine_->state.pc;
    if (pc.idx % cfg_.stride != 0) return true;
    const uint64_t len = program_.functions[pc.fn].blocks[pc.block].insts.size();
    counter_ += std::min<uint64_t>(len - pc.idx, cfg_.stride);
    return counter_ < cfg_.window;
  }

  void SimulateTree(const InstructionId& root, uint32_t order, bool taken) {
    Machine& m = *machine_;
    ++trace_->trees;
    uint32_t& max_order = trace_->max_order[root];
    max_order = std::max(max_order, order);

    counter_ = 0;
    frames_.Push(m, root, taken, 0, counter_);
    TakeBranch(m.state, At(root), !taken);
    while (!frames_.empty()) {
      if (!Charge()) {
        Unwind();
        continue;
      }
      const InstructionId pc = m.state.pc;
      const Instruction& inst = At(pc);
      ++trace_->spec_steps;
      if (inst.op == Opcode::kBr) {
        const bool correct = BranchTaken(m.state, inst);
        if (frames_.size() < order) {
          frames_.Push(m, pc, correct, static_cast<uint32_t>(frames_.size()), counter_);
          TakeBranch(m.state, inst, !correct);
        } else {
          TakeBranch(m.state, inst, correct);
        }
        continue;
      }
      if (inst.op == Opcode::kFence || inst.op == Opcode::kHalt) {
        Unwind();
        continue;
      }
      StepOutcome step = Step(m, program_, input_, ExecMode::kSpeculative);
      if (step.access) {
        const SpecAction action = OnSpeculativeAccess(step.access->cls);
        if (action == SpecAction::kProceedAfterRecord || action == SpecAction::kRollbackAfterRecord) {
          RecordData(step);
        }
        if (action == SpecAction::kRollbackAfterRecord || action == SpecAction::kRollback) {
          Unwind();
        }
        continue;
      }
      if (step.kind == StepOutcome::Kind::kFault) {
        if (OnSpeculativeFault(step.fault) == SpecAction::kRollbackAfterRecord) RecordCode(step);
        Unwind();
        continue;
      }
      if (step.kind == StepOutcome::Kind::kHalted) Unwind();
    }
  }

  // Rolls back to the innermost frame and resumes its correct outcome. When
  // the root frame is popped the machine is left at the root branch.
  void Unwind() {
    Checkpoint cp = frames_.Rollback(*machine_);
    counter_ = cp.counter;
    if (!frames_.empty()) TakeBranch(machine_->state, At(cp.branch), cp.resume_taken);
  }

  std::vector<InstructionId> CurrentBranches() const {
    std::vector<InstructionId> out;
    out.reserve(frames_.size());
    for (const auto& f : frames_.frames()) out.push_back(f.branch);
    return out;
  }

  void Emit(ViolationRecord v) {
    v.branches = CurrentBranches();
    v.input_id = input_id_;
    v.run = run_;
    auto key = std::make_pair(MakeDedupKey(v, cfg_.identity), v.branches);
    if (!dedup_.insert(std::move(key)).second) return;
    trace_->violations.push_back(std::move(v));
  }

  void RecordData(const StepOutcome& step) {
    ViolationRecord v;
    v.kind = ViolationKind::kDataOob;
    v.offending = step.at;
    v.addr = step.access->addr;
    v.access = step.access->cls;
    Emit(std::move(v));
  }

  void RecordCode(const StepOutcome& step) {
    ViolationRecord v;
    v.kind = ViolationKind::kCodePtr;
    v.offending = step.at;
    v.addr = step.detail;
    v.code_fault = step.fault;
    Emit(std::move(v));
  }

  const Engine& engine_;
  const Program& program_;
  const SpecConfig& cfg_;
  std::span<const uint8_t> input_;
  BranchStats* stats_;
  const std::string& input_id_;
  uint64_t run_;

  Machine* machine_ = nullptr;
  RunTrace* trace_ = nullptr;
  CheckpointStack frames_;
  uint64_t counter_ = 0;
  std::unordered_map<InstructionId, uint32_t> run_orders_;
  std::set<Edge> seen_edges_;
  std::set<std::pair<DedupKey, std::vector<InstructionId>>> dedup_;
};

Engine::Engine(const Program& program, SpecConfig cfg, MemoryLayout layout, RunLimits limits)
    : program_(program), cfg_(cfg), layout_(layout), limits_(limits) {
  if (std::string problem = cfg_.Check(); !problem.empty()) throw EngineError(problem);
}

ExposureResult Engine::Run(std::span<const uint8_t> input, BranchStats* stats, const std::string& input_id,
                           uint64_t run) {
  RunState state(*this, input, stats, input_id, run);
  return state.Execute();
}

}  // namespace svm
