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

#ifndef SVM_HARDEN_H_
#define SVM_HARDEN_H_

// Whitelist-aware hardening passes.
//
// Both passes split every edge of a non-whitelisted BR into a fresh
// trampoline block appended to the function, so branch blocks keep their
// labels and a shared successor is never instrumented on behalf of a
// whitelisted branch.
//
//   fence: <block>.fence.t:  fence; jmp T
//   slh:   <block>.slh.t:    setcc r14, cc; xor r14, r14, 1; sub r14, r14, 1
//                            and r15, r15, r14; jmp T
//
// SLH also rewrites every memory operand to (address AND r15) through r14
// and masks JTAB indices the same way. r15 is set to all-ones once, at the
// start of the entry function, and is live across calls.

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svm/analyze.h"
#include "svm/engine.h"
#include "svm/isa.h"
#include "svm/trace_io.h"

namespace svm {

class HardenError : public std::runtime_error {
 public:
  explicit HardenError(const std::string& what) : std::runtime_error(what) {}
};

enum class HardenMode : uint8_t { kFence, kSlh };

std::string_view HardenModeName(HardenMode m);
std::optional<HardenMode> HardenModeFromName(std::string_view name);

struct HardenConfig {
  HardenMode mode = HardenMode::kFence;
  Whitelist whitelist;
  uint8_t mask_reg = 15;
  uint8_t scratch_reg = 14;
};

struct HardenSummary {
  size_t branches_total = 0;
  size_t instrumented = 0;
  size_t whitelisted = 0;
};

struct HardenResult {
  Program program;
  HardenSummary summary;
};

HardenResult FencePass(const Program& p, const Whitelist& w);
// Throws HardenError("MASK-REGISTER-IN-USE: ...") if the program touches the
// mask or scratch register.
HardenResult SlhPass(const Program& p, const Whitelist& w, uint8_t mask_reg = 15, uint8_t scratch_reg = 14);
HardenResult Harden(const Program& p, const HardenConfig& cfg);

// Registers an instruction reads or writes.
std::vector<uint8_t> RegistersOf(const Instruction& inst);

// Static scan: BRs whose taken and fall-through targets both begin with FENCE.
size_t CountFencedBranches(const Program& p);

// Replays `inputs` under exposure with the full order cap on every branch and
// returns the violations whose branch sequence contains a branch from
// `branches`. Branches are matched by function and block, so locations taken
// from the unhardened program match their hardened counterparts.
std::vector<TraceRecord> VerifyHardening(const Program& hardened, std::span<const std::vector<uint8_t>> inputs,
                                         const SpecConfig& spec, const std::set<CodeLocation>& branches);

}  // namespace svm

#endif  // SVM_HARDEN_H_
