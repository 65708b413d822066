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

#include "svm/oracle.h"

#include <algorithm>
#include <sstream>

namespace svm {
namespace {

struct ScriptRun {
  bool reached_root = false;
  uint64_t spec_branches = 0;  // speculative BR occurrences encountered
  std::vector<std::string> blocks;
};

class ScriptExecutor {
 public:
  ScriptExecutor(const Program& p, std::span<const uint8_t> input, const OracleConfig& cfg, OracleResult& out)
      : p_(p), input_(input), cfg_(cfg), out_(out) {}

  // Number of BR instructions the architectural run executes.
  uint64_t CountArchitecturalBranches() {
    Machine m(p_, cfg_.layout);
    uint64_t count = 0;
    uint64_t steps = 0;
    while (!m.state.halted && steps++ < cfg_.limits.max_steps) {
      if (At(m.state.pc).op == Opcode::kBr) ++count;
      if (Step(m, p_, input_, ExecMode::kArchitectural).kind == StepOutcome::Kind::kFault) break;
    }
    return count;
  }

  ScriptRun Execute(uint64_t root, const std::vector<uint64_t>& script) {
    ScriptRun run;
    Machine m(p_, cfg_.layout);
    uint64_t occurrence = 0;
    uint64_t steps = 0;
    // Architectural prefix up to the root occurrence.
    while (true) {
      if (m.state.halted || steps++ >= cfg_.limits.max_steps) return run;
      if (At(m.state.pc).op == Opcode::kBr) {
        if (occurrence == root) break;
        ++occurrence;
      }
      if (Step(m, p_, input_, ExecMode::kArchitectural).kind == StepOutcome::Kind::kFault) return run;
    }
    run.reached_root = true;

    std::vector<InstructionId> inverted = {m.state.pc};
    run.blocks.push_back(p_.functions[m.state.pc.fn].blocks[m.state.pc.block].label);
    const Instruction& root_br = At(m.state.pc);
    TakeBranch(m.state, root_br, !BranchTaken(m.state, root_br));

    uint64_t counter = 0;
    while (true) {
      const InstructionId pc = m.state.pc;
      const BasicBlock& block = p_.functions[pc.fn].blocks[pc.block];
      if (pc.idx % cfg_.stride == 0) {
        counter += std::min<uint64_t>(block.insts.size() - pc.idx, cfg_.stride);
        if (counter >= cfg_.window) return run;
      }
      if (pc.idx == 0) run.blocks.push_back(block.label);
      const Instruction& inst = block.insts[pc.idx];
      if (inst.op == Opcode::kBr) {
        const bool correct = BranchTaken(m.state, inst);
        const bool invert = std::find(script.begin(), script.end(), run.spec_branches) != script.end();
        ++run.spec_branches;
        if (invert) inverted.push_back(pc);
        TakeBranch(m.state, inst, invert ? !correct : correct);
        continue;
      }
      if (inst.op == Opcode::kFence || inst.op == Opcode::kHalt) return run;
      StepOutcome step = Step(m, p_, input_, ExecMode::kSpeculative);
      if (step.access) {
        const AccessEvent& a = *step.access;
        if (a.cls.kind == AccessKind::kRedzone || a.cls.kind == AccessKind::kUnmapped) {
          Add(step.at, inverted, ViolationKind::kDataOob,
              IdentityOf(ViolationKind::kDataOob, a.cls.referent, a.addr, FaultKind::kNone, cfg_.identity));
        }
        if (a.cls.kind == AccessKind::kUnmapped) return run;
        continue;
      }
      if (step.kind == StepOutcome::Kind::kFault) {
        if (step.fault == FaultKind::kBadRet || step.fault == FaultKind::kBadJtabIndex) {
          Add(step.at, inverted, ViolationKind::kCodePtr,
              IdentityOf(ViolationKind::kCodePtr, std::nullopt, step.detail, step.fault, cfg_.identity));
        }
        return run;
      }
      if (step.kind == StepOutcome::Kind::kHalted) return run;
    }
  }

 private:
  const Instruction& At(const InstructionId& id) const { return p_.functions[id.fn].blocks[id.block].insts[id.idx]; }

  void Add(const InstructionId& at, const std::vector<InstructionId>& inverted, ViolationKind kind,
           std::string identity) {
    out_.violations.insert(OracleViolation{at, inverted, kind, std::move(identity)});
  }

  const Program& p_;
  std::span<const uint8_t> input_;
  const OracleConfig& cfg_;
  OracleResult& out_;
};

}  // namespace

OracleResult EnumeratePaths(const Program& p, std::span<const uint8_t> input, const OracleConfig& cfg) {
  OracleResult result;
  ScriptExecutor exec(p, input, cfg, result);
  const uint64_t roots = exec.CountArchitecturalBranches();
  for (uint64_t root = 0; root < roots; ++root) {
    std::vector<std::vector<uint64_t>> pending = {{}};
    while (!pending.empty()) {
      std::vector<uint64_t> script = std::move(pending.back());
      pending.pop_back();
      if (++result.scripts > cfg.max_scripts) {
        throw EnumerationTooLarge("ENUMERATION-TOO-LARGE: more than " + std::to_string(cfg.max_scripts) +
                                  " inversion scripts");
      }
      ScriptRun run = exec.Execute(root, script);
      if (!run.reached_root) continue;
      if (script.size() + 1 < cfg.max_order) {
        const uint64_t first = script.empty() ? 0 : script.back() + 1;
        // Reverse so children are explored in increasing occurrence order.
        for (uint64_t j = run.spec_branches; j > first; --j) {
          std::vector<uint64_t> child = script;
          child.push_back(j - 1);
          pending.push_back(std::move(child));
        }
      }
      if (cfg.keep_paths) result.paths.push_back({root, std::move(script), std::move(run.blocks)});
    }
  }
  return result;
}

std::string FormatOracleResult(const Program& p, const OracleResult& r) {
  std::vector<std::string> lines;
  for (const auto& v : r.violations) {
    std::string line = std::string(ViolationKindName(v.kind)) + " " + ToLocation(p, v.offending).ToString() + " " +
                       v.identity + " order=" + std::to_string(v.branches.size()) + " via";
    for (const auto& b : v.branches) line += " " + ToLocation(p, b).ToString();
    lines.push_back(std::move(line));
  }
  std::sort(lines.begin(), lines.end());
  std::ostringstream out;
  for (const auto& l : lines) out << l << "\n";
  return out.str();
}

}  // namespace svm
