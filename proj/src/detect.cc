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

#include "svm/detect.h"

#include <cstdio>

namespace svm {
namespace {

std::string Hex(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string_view ViolationKindName(ViolationKind k) {
  return k == ViolationKind::kDataOob ? "DATA-OOB" : "CODE-PTR";
}

std::optional<ViolationKind> ViolationKindFromName(std::string_view name) {
  if (name == "DATA-OOB") return ViolationKind::kDataOob;
  if (name == "CODE-PTR") return ViolationKind::kCodePtr;
  return std::nullopt;
}

std::string_view IdentityModeName(IdentityMode m) { return m == IdentityMode::kOffset ? "offset" : "raw"; }

std::optional<IdentityMode> IdentityModeFromName(std::string_view name) {
  if (name == "offset") return IdentityMode::kOffset;
  if (name == "raw") return IdentityMode::kRaw;
  return std::nullopt;
}

std::string IdentityOf(ViolationKind kind, const std::optional<Referent>& referent, uint64_t addr,
                       FaultKind code_fault, IdentityMode mode) {
  if (kind == ViolationKind::kCodePtr) return std::string(FaultName(code_fault)) + "@" + Hex(addr);
  if (mode == IdentityMode::kOffset && referent) {
    return "obj" + std::to_string(referent->index) + "/" + std::to_string(referent->size) + "+" +
           std::to_string(referent->offset);
  }
  return Hex(addr);
}

DedupKey MakeDedupKey(const ViolationRecord& v, IdentityMode mode) {
  return {v.offending, v.kind, IdentityOf(v.kind, v.access.referent, v.addr, v.code_fault, mode)};
}

SpecAction OnSpeculativeAccess(const AccessClass& access) {
  switch (access.kind) {
    case AccessKind::kValid:
    case AccessKind::kScratch:
      return SpecAction::kProceed;
    case AccessKind::kRedzone:
      return SpecAction::kProceedAfterRecord;
    case AccessKind::kUnmapped:
      return SpecAction::kRollbackAfterRecord;
  }
  return SpecAction::kRollback;
}

SpecAction OnSpeculativeFault(FaultKind kind) {
  switch (kind) {
    case FaultKind::kBadRet:
    case FaultKind::kBadJtabIndex:
      return SpecAction::kRollbackAfterRecord;
    case FaultKind::kOobAccess:
      return SpecAction::kRollbackAfterRecord;
    default:
      return SpecAction::kRollback;
  }
}

}  // namespace svm
