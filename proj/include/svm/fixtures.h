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

#ifndef SVM_FIXTURES_H_
#define SVM_FIXTURES_H_

// Builtin gadget corpus. Sources live in fixtures/gadgets/*.sasm and are
// embedded at build time; each file names its trigger input, a safe input
// and the expected violation in `; @key value` comment lines.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "svm/detect.h"
#include "svm/isa.h"

namespace svm {

class UnknownGadget : public std::runtime_error {
 public:
  explicit UnknownGadget(const std::string& what) : std::runtime_error(what) {}
};

struct ExpectedViolation {
  CodeLocation offending;
  uint32_t min_order = 1;
  ViolationKind kind = ViolationKind::kDataOob;
};

struct GadgetFixture {
  int id = 0;
  std::string name;
  std::string source;
  Program program;
  std::vector<uint8_t> trigger;
  std::vector<uint8_t> safe;
  ExpectedViolation expected;
};

inline constexpr int kClassicVariants = 15;

// Throws UnknownGadget("UNKNOWN-GADGET: ...") for an id with no fixture.
const GadgetFixture& BuiltinGadget(int id);
// Every fixture, in id order.
const std::vector<GadgetFixture>& BuiltinGadgets();

// Parses one fixture source; throws std::runtime_error on malformed sources
// or annotations.
GadgetFixture ParseFixture(std::string_view file_stem, std::string_view source);

}  // namespace svm

#endif  // SVM_FIXTURES_H_
