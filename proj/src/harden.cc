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

#include "svm/harden.h"

#include <algorithm>

namespace svm {
namespace {

Instruction Make(Opcode op) {
  Instruction i;
  i.op = op;
  return i;
}

Instruction Jmp(const std::string& target) {
  Instruction i = Make(Opcode::kJmp);
  i.labels = {target};
  return i;
}

Instruction AluImm(Opcode op, uint8_t rd, uint8_t ra, uint64_t imm) {
  Instruction i = Make(op);
  i.rd = rd;
  i.ra = ra;
  i.b_is_imm = true;
  i.imm = imm;
  return i;
}

Instruction AluReg(Opcode op, uint8_t rd, uint8_t ra, uint8_t rb) {
  Instruction i = Make(op);
  i.rd = rd;
  i.ra = ra;
  i.rb = rb;
  return i;
}

std::string FreshLabel(const Function& f, const std::string& want) {
  auto taken = [&](const std::string& l) {
    return std::any_of(f.blocks.begin(), f.blocks.end(), [&](const BasicBlock& b) { return b.label == l; });
  };
  if (!taken(want)) return want;
  for (int n = 2;; ++n) {
    std::string candidate = want + "." + std::to_string(n);
    if (!taken(candidate)) return candidate;
  }
}

bool Whitelisted(const Whitelist& w, const Program& p, uint32_t fn, uint32_t block, uint32_t idx) {
  return w.Contains(CodeLocation{p.functions[fn].name, p.functions[fn].blocks[block].label, idx});
}

// Splits both edges of every non-whitelisted BR. `body(cond)` yields the
// trampoline prefix for an edge that is consistent with `cond` holding.
template <typename Body>
HardenResult SplitBranchEdges(const Program& p, const Whitelist& w, const std::string& tag, Body body) {
  HardenResult out{p, {}};
  for (uint32_t fn = 0; fn < out.program.functions.size(); ++fn) {
    Function& f = out.program.functions[fn];
    const size_t original_blocks = f.blocks.size();
    for (uint32_t b = 0; b < original_blocks; ++b) {
      const uint32_t idx = static_cast<uint32_t>(f.blocks[b].insts.size() - 1);
      if (f.blocks[b].insts[idx].op != Opcode::kBr) continue;
      ++out.summary.branches_total;
      if (Whitelisted(w, p, fn, b, static_cast<uint32_t>(p.functions[fn].blocks[b].insts.size() - 1))) {
        ++out.summary.whitelisted;
        continue;
      }
      ++out.summary.instrumented;
      const Cond cond = f.blocks[b].insts[idx].cond;
      const std::string base = f.blocks[b].label + "." + tag;
      for (int side = 0; side < 2; ++side) {
        BasicBlock tramp;
        tramp.label = FreshLabel(f, base + (side == 0 ? ".t" : ".f"));
        tramp.insts = body(side == 0 ? cond : InvertCond(cond));
        tramp.insts.push_back(Jmp(f.blocks[b].insts[idx].labels[side]));
        f.blocks[b].insts[idx].labels[side] = tramp.label;
        f.blocks.push_back(std::move(tramp));
      }
    }
  }
  Link(out.program);
  return out;
}

}  // namespace

std::string_view HardenModeName(HardenMode m) { return m == HardenMode::kFence ? "fence" : "slh"; }

std::optional<HardenMode> HardenModeFromName(std::string_view name) {
  if (name == "fence") return HardenMode::kFence;
  if (name == "slh") return HardenMode::kSlh;
  return std::nullopt;
}

std::vector<uint8_t> RegistersOf(const Instruction& i) {
  switch (i.op) {
    case Opcode::kConst:
    case Opcode::kSetcc:
    case Opcode::kInput:
    case Opcode::kInputLen:
      return {i.rd};
    case Opcode::kMov:
      return {i.rd, i.ra};
    case Opcode::kCmp:
      return i.b_is_imm ? std::vector<uint8_t>{i.ra} : std::vector<uint8_t>{i.ra, i.rb};
    case Opcode::kJtab:
      return {i.ra};
    case Opcode::kLoad:
      return {i.rd, i.ra};
    case Opcode::kStore:
      return {i.ra, i.rb};
    case Opcode::kAlloc:
      return i.b_is_imm ? std::vector<uint8_t>{i.rd} : std::vector<uint8_t>{i.rd, i.rb};
    case Opcode::kBr:
    case Opcode::kJmp:
    case Opcode::kCall:
    case Opcode::kRet:
    case Opcode::kFence:
    case Opcode::kHalt:
      return {};
    default:
      break;
  }
  if (IsBinaryAlu(i.op)) {
    return i.b_is_imm ? std::vector<uint8_t>{i.rd, i.ra} : std::vector<uint8_t>{i.rd, i.ra, i.rb};
  }
  return {};
}

HardenResult FencePass(const Program& p, const Whitelist& w) {
  return SplitBranchEdges(p, w, "fence", [](Cond) { return std::vector<Instruction>{Make(Opcode::kFence)}; });
}

HardenResult SlhPass(const Program& p, const Whitelist& w, uint8_t mask, uint8_t scratch) {
  for (const Function& f : p.functions) {
    for (const BasicBlock& b : f.blocks) {
      for (const Instruction& i : b.insts) {
        for (uint8_t r : RegistersOf(i)) {
          if (r == mask || r == scratch) {
            throw HardenError("MASK-REGISTER-IN-USE: r" + std::to_string(r) + " is used in " + f.name + ":" + b.label +
                              " and is reserved by the SLH pass");
          }
        }
      }
    }
  }

  HardenResult out = SplitBranchEdges(p, w, "slh", [&](Cond agree_cond) {
    Instruction setcc = Make(Opcode::kSetcc);
    setcc.rd = scratch;
    setcc.cond = agree_cond;
    return std::vector<Instruction>{setcc, AluImm(Opcode::kXor, scratch, scratch, 1),
                                    AluImm(Opcode::kSub, scratch, scratch, 1),
                                    AluReg(Opcode::kAnd, mask, mask, scratch)};
  });

  for (Function& f : out.program.functions) {
    for (BasicBlock& b : f.blocks) {
      std::vector<Instruction> rewritten;
      rewritten.reserve(b.insts.size());
      for (const Instruction& i : b.insts) {
        if (i.op == Opcode::kLoad || i.op == Opcode::kStore) {
          rewritten.push_back(AluImm(Opcode::kAdd, scratch, i.ra, i.imm));
          rewritten.push_back(AluReg(Opcode::kAnd, scratch, scratch, mask));
          Instruction access = i;
          access.ra = scratch;
          access.imm = 0;
          rewritten.push_back(access);
        } else if (i.op == Opcode::kJtab) {
          rewritten.push_back(AluReg(Opcode::kAnd, scratch, i.ra, mask));
          Instruction jtab = i;
          jtab.ra = scratch;
          rewritten.push_back(jtab);
        } else {
          rewritten.push_back(i);
        }
      }
      b.insts = std::move(rewritten);
    }
  }

  if (auto entry = out.program.FindFunction(out.program.entry)) {
    BasicBlock& first = out.program.functions[*entry].blocks.front();
    Instruction init = Make(Opcode::kConst);
    init.rd = mask;
    init.imm = ~uint64_t{0};
    first.insts.insert(first.insts.begin(), init);
  }
  Link(out.program);
  return out;
}

HardenResult Harden(const Program& p, const HardenConfig& cfg) {
  return cfg.mode == HardenMode::kFence ? FencePass(p, cfg.whitelist)
                                        : SlhPass(p, cfg.whitelist, cfg.mask_reg, cfg.scratch_reg);
}

size_t CountFencedBranches(const Program& p) {
  size_t count = 0;
  for (const InstructionId& id : AllBranches(p)) {
    const Instruction& br = *InstructionAt(p, id);
    const Function& f = p.functions[id.fn];
    auto fenced = [&](uint32_t target) {
      return target < f.blocks.size() && f.blocks[target].insts.front().op == Opcode::kFence;
    };
    if (br.targets.size() == 2 && fenced(br.targets[0]) && fenced(br.targets[1])) ++count;
  }
  return count;
}

std::vector<TraceRecord> VerifyHardening(const Program& hardened, std::span<const std::vector<uint8_t>> inputs,
                                         const SpecConfig& spec, const std::set<CodeLocation>& branches) {
  std::set<std::pair<std::string, std::string>> wanted;
  for (const auto& b : branches) wanted.insert({b.fn, b.block});
  SpecConfig cfg = spec;
  cfg.prioritized = false;
  Engine engine(hardened, cfg);
  std::vector<TraceRecord> residual;
  for (size_t n = 0; n < inputs.size(); ++n) {
    ExposureResult r = engine.Run(inputs[n], nullptr, InputId(inputs[n]), n + 1);
    for (const ViolationRecord& v : r.trace.violations) {
      TraceRecord rec = ToTraceRecord(hardened, v);
      const bool hit = std::any_of(rec.branches.begin(), rec.branches.end(),
                                   [&](const CodeLocation& b) { return wanted.count({b.fn, b.block}) != 0; });
      if (hit) residual.push_back(std::move(rec));
    }
  }
  return residual;
}

}  // namespace svm
