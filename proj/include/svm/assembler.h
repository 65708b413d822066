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

#ifndef SVM_ASSEMBLER_H_
#define SVM_ASSEMBLER_H_

// Text format (.sasm), one item per line, `;` starts a comment:
//
//   entry main            optional; defaults to the first function
//   data "\x10\x00..."    static bytes, appended in order
//   fn main:              starts a function
//   loop:                 starts a block
//     add r1, r1, 1       operands comma-separated
//
// Registers are r0..r15; immediates are decimal or 0x-hex.

#include <string>
#include <string_view>
#include <optional>
#include <vector>

#include "svm/isa.h"

namespace svm {

struct Diagnostic {
  int line = 0;  // 0 when the problem has no source line
  std::string message;

  std::string ToString() const;
};

struct ParseResult {
  Program program;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return diagnostics.empty(); }
};

// Two-pass: collects labels, then resolves references and validates.
ParseResult ParseProgram(std::string_view text);

// Canonical text. ParseProgram(EmitText(p)).program == p for valid p.
std::string EmitText(const Program& p);
std::string EmitInstruction(const Instruction& inst);

struct ValidationIssue {
  std::optional<InstructionId> at;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
};

// Checks every structural invariant of the ISA. Pure.
ValidationReport Validate(const Program& p);

}  // namespace svm

#endif  // SVM_ASSEMBLER_H_
