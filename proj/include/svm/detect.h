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

#ifndef SVM_DETECT_H_
#define SVM_DETECT_H_

// Violation records and the softened-sanitizer policy applied on
// speculative paths.

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "svm/isa.h"
#include "svm/memory.h"
#include "svm/vm.h"

namespace svm {

enum class ViolationKind : uint8_t { kDataOob, kCodePtr };

std::string_view ViolationKindName(ViolationKind k);
std::optional<ViolationKind> ViolationKindFromName(std::string_view name);

// How two accesses by the same instruction are judged "the same target".
// kOffset compares (referent, offset) and survives base-address changes;
// kRaw compares absolute addresses.
enum class IdentityMode : uint8_t { kOffset, kRaw };

std::string_view IdentityModeName(IdentityMode m);
std::optional<IdentityMode> IdentityModeFromName(std::string_view name);

struct ViolationRecord {
  ViolationKind kind = ViolationKind::kDataOob;
  InstructionId offending;
  // DATA-OOB: the accessed address. CODE-PTR: the rejected code pointer
  // (popped return value or jump-table index).
  uint64_t addr = 0;
  AccessClass access;                     // DATA-OOB only
  FaultKind code_fault = FaultKind::kNone;  // CODE-PTR: kBadRet or kBadJtabIndex
  std::vector<InstructionId> branches;    // mispredicted branches, root first
  std::string input_id;
  uint64_t run = 0;

  uint32_t order() const { return static_cast<uint32_t>(branches.size()); }
};

// Identity component of a dedup key, computed from serializable fields so
// that trace consumers derive exactly the same string.
std::string IdentityOf(ViolationKind kind, const std::optional<Referent>& referent, uint64_t addr,
                       FaultKind code_fault, IdentityMode mode);

struct DedupKey {
  InstructionId offending;
  ViolationKind kind = ViolationKind::kDataOob;
  std::string identity;

  auto operator<=>(const DedupKey&) const = default;
};

DedupKey MakeDedupKey(const ViolationRecord& v, IdentityMode mode);

enum class SpecAction : uint8_t { kProceed, kProceedAfterRecord, kRollbackAfterRecord, kRollback };

// VALID/SCRATCH proceed silently; REDZONE is recorded and execution
// continues; UNMAPPED is recorded and the path rolls back.
SpecAction OnSpeculativeAccess(const AccessClass& access);

// DIV-ZERO, STACK-OVERFLOW, HEAP-EXHAUSTED roll back silently; corrupted
// code pointers (BAD-RET, BAD-JTAB-INDEX) are recorded first.
SpecAction OnSpeculativeFault(FaultKind kind);

}  // namespace svm

#endif  // SVM_DETECT_H_
