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

#ifndef SVM_ORACLE_H_
#define SVM_ORACLE_H_

// Ground-truth enumerator of speculative paths. Each path is produced by
// re-executing the program from the start with a script of forced branch
// inversions; there is no checkpointing and no undo log. It shares only the
// ISA and the VM step function with the exposure engine.

#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "svm/detect.h"
#include "svm/isa.h"
#include "svm/memory.h"
#include "svm/vm.h"

namespace svm {

class EnumerationTooLarge : public std::runtime_error {
 public:
  explicit EnumerationTooLarge(const std::string& what) : std::runtime_error(what) {}
};

struct OracleConfig {
  uint32_t max_order = 1;
  uint64_t window = 250;
  uint64_t stride = 50;
  IdentityMode identity = IdentityMode::kOffset;
  MemoryLayout layout;
  RunLimits limits;
  uint64_t max_scripts = 1u << 16;
  bool keep_paths = false;  // populate OracleResult::paths
};

struct OracleViolation {
  InstructionId offending;
  std::vector<InstructionId> branches;
  ViolationKind kind = ViolationKind::kDataOob;
  std::string identity;

  auto operator<=>(const OracleViolation&) const = default;
};

struct OraclePath {
  uint64_t root_occurrence = 0;       // index among architectural BR executions
  std::vector<uint64_t> script;       // speculative BR occurrences to invert
  std::vector<std::string> blocks;    // labels: root block, then each block entered
};

struct OracleResult {
  std::set<OracleViolation> violations;
  std::vector<OraclePath> paths;
  uint64_t scripts = 0;
};

OracleResult EnumeratePaths(const Program& p, std::span<const uint8_t> input, const OracleConfig& cfg);

// Canonical, sorted, one violation per line.
std::string FormatOracleResult(const Program& p, const OracleResult& r);

}  // namespace svm

#endif  // SVM_ORACLE_H_
