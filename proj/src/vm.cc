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

#include "svm/vm.h"

namespace svm {
namespace {

constexpr uint64_t kReturnTag = 0x5356ull << 48;
constexpr uint64_t kReturnTagMask = 0xffffull << 48;

StepOutcome Continue(const InstructionId& at) { return {StepOutcome::Kind::kContinued, FaultKind::kNone, at, {}, 0}; }

StepOutcome Fault(const InstructionId& at, FaultKind kind, uint64_t detail = 0) {
  return {StepOutcome::Kind::kFault, kind, at, {}, detail};
}

uint64_t SecondSource(const MachineState& s, const Instruction& inst) {
  return inst.b_is_imm ? inst.imm : s.regs[inst.rb];
}

void GoToBlock(MachineState& s, uint32_t block) {
  s.pc.block = block;
  s.pc.idx = 0;
}

}  // namespace

std::string_view FaultName(FaultKind k) {
  switch (k) {
    case FaultKind::kNone: return "NONE";
    case FaultKind::kOobAccess: return "OOB-ACCESS";
    case FaultKind::kDivZero: return "DIV-ZERO";
    case FaultKind::kBadJtabIndex: return "BAD-JTAB-INDEX";
    case FaultKind::kBadRet: return "BAD-RET";
    case FaultKind::kStackOverflow: return "STACK-OVERFLOW";
    case FaultKind::kHeapExhausted: return "HEAP-EXHAUSTED";
    case FaultKind::kStepLimit: return "STEP-LIMIT";
  }
  return "?";
}

Machine::Machine(const Program& program, const MemoryLayout& l)
    : layout(l), static_size(program.data.size()), allocs(l) {
  memory.WriteBytes(layout.static_base, program.data);
  state.sp = layout.stack_top;
  if (auto entry = program.FindFunction(program.entry)) state.pc = InstructionId{*entry, 0, 0};
}

bool BranchTaken(const MachineState& s, const Instruction& br) {
  return EvalCond(br.cond, s.flags.lhs, s.flags.rhs);
}

void TakeBranch(MachineState& s, const Instruction& br, bool taken) {
  GoToBlock(s, br.targets[taken ? 0 : 1]);
}

uint64_t EncodeReturnAddress(const InstructionId& id) {
  return kReturnTag | (static_cast<uint64_t>(id.fn & 0xffff) << 32) |
         (static_cast<uint64_t>(id.block & 0xffff) << 16) | (id.idx & 0xffff);
}

std::optional<InstructionId> DecodeReturnAddress(const Program& p, uint64_t value) {
  if ((value & kReturnTagMask) != kReturnTag) return std::nullopt;
  const InstructionId id{static_cast<uint32_t>((value >> 32) & 0xffff), static_cast<uint32_t>((value >> 16) & 0xffff),
                         static_cast<uint32_t>(value & 0xffff)};
  if (id.idx == 0) return std::nullopt;
  const Instruction* at = InstructionAt(p, id);
  const Instruction* call = InstructionAt(p, {id.fn, id.block, id.idx - 1});
  if (at == nullptr || call == nullptr || call->op != Opcode::kCall) return std::nullopt;
  return id;
}

StepOutcome Step(Machine& m, const Program& p, std::span<const uint8_t> input, ExecMode mode) {
  MachineState& s = m.state;
  const InstructionId at = s.pc;
  const Instruction& inst = p.functions[at.fn].blocks[at.block].insts[at.idx];
  auto& r = s.regs;

  switch (inst.op) {
    case Opcode::kConst: r[inst.rd] = inst.imm; break;
    case Opcode::kMov: r[inst.rd] = r[inst.ra]; break;
    case Opcode::kAdd: r[inst.rd] = r[inst.ra] + SecondSource(s, inst); break;
    case Opcode::kSub: r[inst.rd] = r[inst.ra] - SecondSource(s, inst); break;
    case Opcode::kMul: r[inst.rd] = r[inst.ra] * SecondSource(s, inst); break;
    case Opcode::kAnd: r[inst.rd] = r[inst.ra] & SecondSource(s, inst); break;
    case Opcode::kOr: r[inst.rd] = r[inst.ra] | SecondSource(s, inst); break;
    case Opcode::kXor: r[inst.rd] = r[inst.ra] ^ SecondSource(s, inst); break;
    case Opcode::kShl: r[inst.rd] = r[inst.ra] << (SecondSource(s, inst) & 63); break;
    case Opcode::kShr: r[inst.rd] = r[inst.ra] >> (SecondSource(s, inst) & 63); break;
    case Opcode::kDiv: {
      const uint64_t divisor = SecondSource(s, inst);
      if (divisor == 0) return Fault(at, FaultKind::kDivZero);
      r[inst.rd] = r[inst.ra] / divisor;
      break;
    }
    case Opcode::kCmp:
      s.flags = {r[inst.ra], SecondSource(s, inst)};
      break;
    case Opcode::kSetcc: r[inst.rd] = EvalCond(inst.cond, s.flags.lhs, s.flags.rhs) ? 1 : 0; break;
    case Opcode::kBr:
      TakeBranch(s, inst, BranchTaken(s, inst));
      return Continue(at);
    case Opcode::kJmp:
      GoToBlock(s, inst.targets[0]);
      return Continue(at);
    case Opcode::kJtab: {
      const uint64_t index = r[inst.ra];
      if (index >= inst.targets.size()) return Fault(at, FaultKind::kBadJtabIndex, index);
      GoToBlock(s, inst.targets[index]);
      return Continue(at);
    }
    case Opcode::kLoad:
    case Opcode::kStore: {
      const bool is_store = inst.op == Opcode::kStore;
      const uint64_t addr = r[inst.ra] + inst.imm;
      const AccessClass cls = m.Classify(addr, 8);
      StepOutcome out = Continue(at);
      if (!cls.ok()) {
        out.access = AccessEvent{addr, 8, is_store, cls};
        if (mode == ExecMode::kArchitectural || cls.kind != AccessKind::kRedzone) {
          out.kind = StepOutcome::Kind::kFault;
          out.fault = FaultKind::kOobAccess;
          return out;
        }
      }
      if (is_store) {
        m.memory.Write64(addr, r[inst.rb]);
      } else {
        r[inst.rd] = m.memory.Read64(addr);
      }
      ++s.pc.idx;
      return out;
    }
    case Opcode::kAlloc: {
      auto base = m.allocs.Allocate(SecondSource(s, inst));
      if (!base) return Fault(at, FaultKind::kHeapExhausted);
      r[inst.rd] = *base;
      break;
    }
    case Opcode::kCall: {
      if (s.sp < m.layout.stack_base + 8) return Fault(at, FaultKind::kStackOverflow);
      s.sp -= 8;
      m.memory.Write64(s.sp, EncodeReturnAddress({at.fn, at.block, at.idx + 1}));
      s.pc = InstructionId{inst.targets[0], 0, 0};
      return Continue(at);
    }
    case Opcode::kRet: {
      if (s.sp >= m.layout.stack_top) {
        // Returning from the entry function ends the program.
        s.halted = true;
        return {StepOutcome::Kind::kHalted, FaultKind::kNone, at, {}, 0};
      }
      const uint64_t value = m.memory.Read64(s.sp);
      auto target = DecodeReturnAddress(p, value);
      if (!target) return Fault(at, FaultKind::kBadRet, value);
      s.sp += 8;
      s.pc = *target;
      return Continue(at);
    }
    case Opcode::kFence: break;
    case Opcode::kInput: r[inst.rd] = inst.imm < input.size() ? input[inst.imm] : 0; break;
    case Opcode::kInputLen: r[inst.rd] = input.size(); break;
    case Opcode::kHalt:
      s.halted = true;
      return {StepOutcome::Kind::kHalted, FaultKind::kNone, at, {}, 0};
  }
  ++s.pc.idx;
  return Continue(at);
}

RunResult RunArchitectural(const Program& p, std::span<const uint8_t> input, const RunLimits& limits,
                           const MemoryLayout& layout) {
  RunResult result{Machine(p, layout), 0, FaultKind::kNone, {}, std::nullopt};
  Machine& m = result.machine;
  while (!m.state.halted) {
    if (result.steps >= limits.max_steps) {
      result.fault = FaultKind::kStepLimit;
      result.fault_at = m.state.pc;
      break;
    }
    StepOutcome out = Step(m, p, input, ExecMode::kArchitectural);
    ++result.steps;
    if (out.kind == StepOutcome::Kind::kFault) {
      result.fault = out.fault;
      result.fault_at = out.at;
      result.fault_access = out.access;
      break;
    }
  }
  return result;
}

bool SameOutcome(const RunResult& a, const RunResult& b) {
  return a.fault == b.fault && (!a.faulted() || a.fault_at == b.fault_at) &&
         a.machine.SameArchitecturalState(b.machine);
}

}  // namespace svm
