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

#include "svm/isa.h"

#include <array>
#include <charconv>
#include <limits>
#include <utility>

namespace svm {
namespace {

constexpr std::array<std::pair<Opcode, std::string_view>, 25> kOpcodeNames = {{
    {Opcode::kConst, "const"}, {Opcode::kMov, "mov"},       {Opcode::kAdd, "add"},
    {Opcode::kSub, "sub"},     {Opcode::kMul, "mul"},       {Opcode::kAnd, "and"},
    {Opcode::kOr, "or"},       {Opcode::kXor, "xor"},       {Opcode::kShl, "shl"},
    {Opcode::kShr, "shr"},     {Opcode::kDiv, "div"},       {Opcode::kCmp, "cmp"},
    {Opcode::kSetcc, "setcc"}, {Opcode::kBr, "br"},         {Opcode::kJmp, "jmp"},
    {Opcode::kJtab, "jtab"},   {Opcode::kLoad, "load"},     {Opcode::kStore, "store"},
    {Opcode::kAlloc, "alloc"}, {Opcode::kCall, "call"},     {Opcode::kRet, "ret"},
    {Opcode::kFence, "fence"}, {Opcode::kInput, "input"},   {Opcode::kInputLen, "inputlen"},
    {Opcode::kHalt, "halt"},
}};

constexpr std::array<std::string_view, 6> kCondNames = {"eq", "ne", "lt", "le", "gt", "ge"};

constexpr uint32_t kUnresolved = std::numeric_limits<uint32_t>::max();

}  // namespace

std::string_view OpcodeName(Opcode op) {
  for (const auto& [code, name] : kOpcodeNames) {
    if (code == op) return name;
  }
  return "?";
}

std::optional<Opcode> OpcodeFromName(std::string_view name) {
  for (const auto& [code, n] : kOpcodeNames) {
    if (n == name) return code;
  }
  return std::nullopt;
}

std::string_view CondName(Cond c) { return kCondNames[static_cast<size_t>(c)]; }

std::optional<Cond> CondFromName(std::string_view name) {
  for (size_t i = 0; i < kCondNames.size(); ++i) {
    if (kCondNames[i] == name) return static_cast<Cond>(i);
  }
  return std::nullopt;
}

Cond InvertCond(Cond c) {
  switch (c) {
    case Cond::kEq: return Cond::kNe;
    case Cond::kNe: return Cond::kEq;
    case Cond::kLt: return Cond::kGe;
    case Cond::kLe: return Cond::kGt;
    case Cond::kGt: return Cond::kLe;
    case Cond::kGe: return Cond::kLt;
  }
  return c;
}

bool EvalCond(Cond c, uint64_t lhs, uint64_t rhs) {
  switch (c) {
    case Cond::kEq: return lhs == rhs;
    case Cond::kNe: return lhs != rhs;
    case Cond::kLt: return lhs < rhs;
    case Cond::kLe: return lhs <= rhs;
    case Cond::kGt: return lhs > rhs;
    case Cond::kGe: return lhs >= rhs;
  }
  return false;
}

bool IsTerminator(Opcode op) {
  return op == Opcode::kBr || op == Opcode::kJmp || op == Opcode::kJtab || op == Opcode::kRet ||
         op == Opcode::kHalt;
}

bool IsBinaryAlu(Opcode op) {
  switch (op) {
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kMul:
    case Opcode::kAnd:
    case Opcode::kOr:
    case Opcode::kXor:
    case Opcode::kShl:
    case Opcode::kShr:
    case Opcode::kDiv:
      return true;
    default:
      return false;
  }
}

bool Instruction::operator==(const Instruction& other) const {
  // Only the fields an opcode actually uses take part in identity, so a
  // program built in code compares equal to its parsed text.
  if (op != other.op || labels != other.labels) return false;
  switch (op) {
    case Opcode::kConst:
      return rd == other.rd && imm == other.imm;
    case Opcode::kMov:
      return rd == other.rd && ra == other.ra;
    case Opcode::kCmp:
      return ra == other.ra && b_is_imm == other.b_is_imm &&
             (b_is_imm ? imm == other.imm : rb == other.rb);
    case Opcode::kSetcc:
      return rd == other.rd && cond == other.cond;
    case Opcode::kBr:
      return cond == other.cond;
    case Opcode::kJtab:
      return ra == other.ra;
    case Opcode::kLoad:
      return rd == other.rd && ra == other.ra && imm == other.imm;
    case Opcode::kStore:
      return ra == other.ra && rb == other.rb && imm == other.imm;
    case Opcode::kAlloc:
      return rd == other.rd && b_is_imm == other.b_is_imm &&
             (b_is_imm ? imm == other.imm : rb == other.rb);
    case Opcode::kInput:
      return rd == other.rd && imm == other.imm;
    case Opcode::kInputLen:
      return rd == other.rd;
    case Opcode::kJmp:
    case Opcode::kCall:
    case Opcode::kRet:
    case Opcode::kFence:
    case Opcode::kHalt:
      return true;
    default:
      break;
  }
  // Binary ALU ops.
  return rd == other.rd && ra == other.ra && b_is_imm == other.b_is_imm &&
         (b_is_imm ? imm == other.imm : rb == other.rb);
}

std::optional<uint32_t> Program::FindFunction(std::string_view name) const {
  for (uint32_t i = 0; i < functions.size(); ++i) {
    if (functions[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<uint32_t> Program::FindBlock(uint32_t fn, std::string_view label) const {
  const auto& blocks = functions.at(fn).blocks;
  for (uint32_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].label == label) return i;
  }
  return std::nullopt;
}

size_t Program::InstructionCount() const {
  size_t n = 0;
  for (const auto& f : functions) {
    for (const auto& b : f.blocks) n += b.insts.size();
  }
  return n;
}

std::string CodeLocation::ToString() const {
  return fn + ":" + block + ":" + std::to_string(idx);
}

std::optional<CodeLocation> CodeLocation::Parse(std::string_view text) {
  const size_t first = text.find(':');
  const size_t last = text.rfind(':');
  if (first == std::string_view::npos || first == last) return std::nullopt;
  CodeLocation loc;
  loc.fn = std::string(text.substr(0, first));
  loc.block = std::string(text.substr(first + 1, last - first - 1));
  const std::string_view num = text.substr(last + 1);
  if (loc.fn.empty() || loc.block.empty() || num.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), loc.idx);
  if (ec != std::errc() || ptr != num.data() + num.size()) return std::nullopt;
  return loc;
}

CodeLocation ToLocation(const Program& p, const InstructionId& id) {
  const Function& f = p.functions.at(id.fn);
  return CodeLocation{f.name, f.blocks.at(id.block).label, id.idx};
}

std::optional<InstructionId> Resolve(const Program& p, const CodeLocation& loc) {
  auto fn = p.FindFunction(loc.fn);
  if (!fn) return std::nullopt;
  auto block = p.FindBlock(*fn, loc.block);
  if (!block) return std::nullopt;
  if (loc.idx >= p.functions[*fn].blocks[*block].insts.size()) return std::nullopt;
  return InstructionId{*fn, *block, loc.idx};
}

const Instruction* InstructionAt(const Program& p, const InstructionId& id) {
  if (id.fn >= p.functions.size()) return nullptr;
  const auto& blocks = p.functions[id.fn].blocks;
  if (id.block >= blocks.size()) return nullptr;
  const auto& insts = blocks[id.block].insts;
  if (id.idx >= insts.size()) return nullptr;
  return &insts[id.idx];
}

bool Link(Program& p) {
  bool ok = true;
  for (uint32_t fi = 0; fi < p.functions.size(); ++fi) {
    for (auto& block : p.functions[fi].blocks) {
      for (auto& inst : block.insts) {
        inst.targets.clear();
        for (const auto& label : inst.labels) {
          std::optional<uint32_t> target = inst.op == Opcode::kCall ? p.FindFunction(label)
                                                                    : p.FindBlock(fi, label);
          if (!target) ok = false;
          inst.targets.push_back(target.value_or(kUnresolved));
        }
      }
    }
  }
  return ok;
}

std::vector<InstructionId> AllBranches(const Program& p) {
  std::vector<InstructionId> out;
  for (uint32_t fi = 0; fi < p.functions.size(); ++fi) {
    const auto& blocks = p.functions[fi].blocks;
    for (uint32_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& insts = blocks[bi].insts;
      if (!insts.empty() && insts.back().op == Opcode::kBr) {
        out.push_back({fi, bi, static_cast<uint32_t>(insts.size() - 1)});
      }
    }
  }
  return out;
}

}  // namespace svm
