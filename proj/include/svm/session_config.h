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

#ifndef SVM_SESSION_CONFIG_H_
#define SVM_SESSION_CONFIG_H_

// Resolved configuration for one CLI invocation. Sources are applied in
// order default, config file, command-line flags; each is a list of
// key=value settings with the same key names:
//
//   window stride max_order order_base spec prioritized identity
//   seed runs max_len workers
//   min_branch_executions min_vuln_triggers uncontrolled_is_benign
//   mode

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "svm/analyze.h"
#include "svm/assembler.h"
#include "svm/engine.h"
#include "svm/fuzz.h"
#include "svm/harden.h"

namespace svm {

struct SessionConfig {
  SpecConfig spec;
  FuzzConfig fuzz;
  AnalysisCriteria criteria;
  HardenMode mode = HardenMode::kFence;

  // Sets one key. Returns an empty string on success, else the problem.
  std::string Set(std::string_view key, std::string_view value);
  // Applies a config file body; one diagnostic per bad line.
  std::vector<Diagnostic> Apply(std::string_view text);
  // Empty when every component is valid.
  std::string Check() const;

  nlohmann::ordered_json ToJson() const;
  std::string ToText() const;
};

}  // namespace svm

#endif  // SVM_SESSION_CONFIG_H_
