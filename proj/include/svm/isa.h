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

#ifndef SVM_ISA_H_
#define SVM_ISA_H_

// SpecVM instruction set: a 16-register, 64-bit toy ISA organized into
// functions of labeled basic blocks. Every block ends in exactly one
// terminator (BR, JMP, JTAB, RET, HALT).

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace svm {

inline constexpr int kNumRegisters = 16;

enum class Opcode : uint8_t {
  kConst,
  kMov,
  kAdd,
  kSub,
  kMul,
  kAnd,
  kOr,
  kXor,
  kShl,
  kShr,
  kDiv,
  kCmp,
  kSetcc,
  kBr,
  kJmp,
  kJtab,
  kLoad,
  kStore,
  kAlloc,
  kCall,
  kRet,
  kFence,
  kInput,
  kInputLen,
  kHalt,
};

// Unsigned comparisons against the operands retained by the last CMP.
enum class Cond : uint8_t { kEq, kNe, kLt, kLe, kGt, kGe };

std::string_view OpcodeName(Opcode op);
std::optional<Opcode> OpcodeFromName(std::string_view name);
std::string_view CondName(Cond c);
std::optional<Cond> CondFromName(std::string_view name);
Cond InvertCond(Cond c);
bool EvalCond(Cond c, uint64_t lhs, uint64_t rhs);

bool IsTerminator(Opcode op);
// ALU ops of the form `op rd, ra, rb|imm`.
bool IsBinaryAlu(Opcode op);

// One instruction. Field use depends on the opcode:
//   const rd, imm            mov rd, ra
//   <alu> rd, ra, rb|imm     cmp ra, rb|imm        setcc rd, cc
//   br cc, taken, fall       jmp target            jtab ra, l0, l1, ...
//   load rd, ra, imm         store ra, imm, rb     alloc rd, rb|imm
//   call fn                  input rd, imm         inputlen rd
//   ret / fence / halt
// `labels` holds block labels (BR/JMP/JTAB) or the callee name (CALL).
// `targets` is derived by linking and is not part of structural identity.
struct Instruction {
  Opcode op = Opcode::kHalt;
  uint8_t rd = 0;
  uint8_t ra = 0;
  uint8_t rb = 0;
  bool b_is_imm = false;
  uint64_t imm = 0;
  Cond cond = Cond::kEq;
  std::vector<std::string> labels;

  std::vector<uint32_t> targets;  // block or function indices after Link()
  int line = 0;                   // source line, 0 when synthesized

  bool operator==(const Instruction& other) const;
};

struct BasicBlock {
  std::string label;
  std::vector<Instruction> insts;

  bool operator==(const BasicBlock& other) const = default;
};

struct Function {
  std::string name;
  std::vector<BasicBlock> blocks;

  bool operator==(const Function& other) const = default;
};

// Functions keep source order; the first block of a function is its entry.
struct Program {
  std::vector<Function> functions;
  std::string entry;
  std::vector<uint8_t> data;

  bool operator==(const Program& other) const = default;

  std::optional<uint32_t> FindFunction(std::string_view name) const;
  std::optional<uint32_t> FindBlock(uint32_t fn, std::string_view label) const;
  size_t InstructionCount() const;
};

// Structural code position: indices into a Program.
struct InstructionId {
  uint32_t fn = 0;
  uint32_t block = 0;
  uint32_t idx = 0;

  auto operator<=>(const InstructionId&) const = default;
};

// Name-based code position used in every serialized artifact.
struct CodeLocation {
  std::string fn;
  std::string block;
  uint32_t idx = 0;

  auto operator<=>(const CodeLocation&) const = default;

  // "fn:block:idx"
  std::string ToString() const;
  static std::optional<CodeLocation> Parse(std::string_view text);
};

CodeLocation ToLocation(const Program& p, const InstructionId& id);
std::optional<InstructionId> Resolve(const Program& p, const CodeLocation& loc);
const Instruction* InstructionAt(const Program& p, const InstructionId& id);

// Fills Instruction::targets from labels. Returns false if any label or
// callee does not resolve; unresolved targets are left as UINT32_MAX.
bool Link(Program& p);

// Every BR terminator in the program, in function/block order.
std::vector<InstructionId> AllBranches(const Program& p);

}  // namespace svm

template <>
struct std::hash<svm::InstructionId> {
  size_t operator()(const svm::InstructionId& id) const noexcept {
    return (static_cast<size_t>(id.fn) << 40) ^ (static_cast<size_t>(id.block) << 20) ^ id.idx;
  }
};

#endif  // SVM_ISA_H_
