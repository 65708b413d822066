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

#ifndef SVM_VM_H_
#define SVM_VM_H_

// Architectural interpreter. One Machine is confined to one thread at a time.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "svm/isa.h"
#include "svm/memory.h"

namespace svm {

enum class FaultKind : uint8_t {
  kNone,
  kOobAccess,
  kDivZero,
  kBadJtabIndex,
  kBadRet,
  kStackOverflow,
  kHeapExhausted,
  kStepLimit,
};

std::string_view FaultName(FaultKind k);

// Operands retained by the last CMP.
struct Flags {
  uint64_t lhs = 0;
  uint64_t rhs = 0;

  bool operator==(const Flags&) const = default;
};

struct MachineState {
  std::array<uint64_t, kNumRegisters> regs{};
  Flags flags;
  InstructionId pc;
  uint64_t sp = 0;
  bool halted = false;

  bool operator==(const MachineState&) const = default;
};

struct Machine {
  Machine(const Program& program, const MemoryLayout& layout);

  MemoryLayout layout;
  uint64_t static_size = 0;
  MachineState state;
  Memory memory;
  AllocationTable allocs;

  AccessClass Classify(uint64_t addr, uint64_t width) const {
    return CheckAccess(layout, static_size, allocs, addr, width);
  }

  // Architectural equality: registers, flags, pc, stack pointer, memory
  // contents and allocator state.
  bool SameArchitecturalState(const Machine& other) const {
    return state == other.state && memory == other.memory && allocs == other.allocs;
  }
};

enum class ExecMode : uint8_t { kArchitectural, kSpeculative };

struct AccessEvent {
  uint64_t addr = 0;
  uint64_t width = 0;
  bool is_store = false;
  AccessClass cls;
};

struct StepOutcome {
  enum class Kind : uint8_t { kContinued, kHalted, kFault };

  Kind kind = Kind::kContinued;
  FaultKind fault = FaultKind::kNone;
  InstructionId at;
  // Set when a LOAD/STORE touched memory outside VALID/SCRATCH. In
  // speculative mode a REDZONE access is performed and reported with
  // kContinued; an UNMAPPED one is not performed and reported as kOobAccess.
  std::optional<AccessEvent> access;
  // BAD-RET: the popped value. BAD-JTAB-INDEX: the index.
  uint64_t detail = 0;
};

// Executes the instruction at state.pc. BR follows its architectural outcome;
// callers that need to force outcomes intercept BR before calling Step.
StepOutcome Step(Machine& m, const Program& p, std::span<const uint8_t> input, ExecMode mode);

// Outcome of the BR at pc under the current flags.
bool BranchTaken(const MachineState& s, const Instruction& br);
// Moves pc to the BR's taken or fall-through target.
void TakeBranch(MachineState& s, const Instruction& br, bool taken);

// Return-address encoding stored on the VM stack by CALL.
uint64_t EncodeReturnAddress(const InstructionId& id);
// Decodes only addresses that point just past a CALL in `p`.
std::optional<InstructionId> DecodeReturnAddress(const Program& p, uint64_t value);

struct RunLimits {
  uint64_t max_steps = 1'000'000;
};

struct RunResult {
  Machine machine;
  uint64_t steps = 0;
  FaultKind fault = FaultKind::kNone;
  InstructionId fault_at;
  std::optional<AccessEvent> fault_access;

  bool faulted() const { return fault != FaultKind::kNone; }
};

// Deterministic: identical (program, input, limits, layout) give identical results.
RunResult RunArchitectural(const Program& p, std::span<const uint8_t> input, const RunLimits& limits = {},
                           const MemoryLayout& layout = {});

// Same state and fault behaviour, comparing everything but step counts.
bool SameOutcome(const RunResult& a, const RunResult& b);

}  // namespace svm

#endif  // SVM_VM_H_
