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

#ifndef SVM_ANALYZE_H_
#define SVM_ANALYZE_H_

// Trace aggregation, controllability classification, whitelisting and
// investigation reports. Everything here works on serialized trace records,
// so it needs no Program.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "svm/assembler.h"
#include "svm/detect.h"
#include "svm/isa.h"
#include "svm/trace_io.h"

namespace svm {

enum class Controllability : uint8_t { kControlled, kUncontrolled, kUnknown, kCode };

std::string_view ControllabilityName(Controllability c);

struct AnalysisCriteria {
  uint64_t min_branch_executions = 100;
  uint64_t min_vuln_triggers = 100;
  bool uncontrolled_is_benign = true;
  IdentityMode identity = IdentityMode::kOffset;

  std::string Check() const;
  std::string Describe() const;
};

using BranchSequence = std::vector<CodeLocation>;
using BranchCounts = std::map<CodeLocation, uint64_t>;

struct AggregatedFinding {
  CodeLocation offending;
  ViolationKind kind = ViolationKind::kDataOob;
  std::set<std::string> inputs;
  uint64_t triggers = 0;
  uint32_t min_order = 0;
  std::set<BranchSequence> sequences;
  std::set<std::string> identities;  // the identity signature
  std::set<uint64_t> addrs;
  std::set<int64_t> offsets;
  Controllability controllability = Controllability::kUnknown;

  uint64_t distinct_inputs() const { return inputs.size(); }
};

// Groups by (offending, kind), sorted by that key. Classification is left
// at kUnknown; see Classify.
std::vector<AggregatedFinding> Aggregate(const std::vector<TraceRecord>& records, IdentityMode identity);
std::vector<AggregatedFinding> Merge(const std::vector<AggregatedFinding>& a, const std::vector<AggregatedFinding>& b);

Controllability ClassifyControllability(const AggregatedFinding& f, const AnalysisCriteria& c);
void Classify(std::vector<AggregatedFinding>& findings, const AnalysisCriteria& c);
bool IsBenign(const AggregatedFinding& f, const AnalysisCriteria& c);

struct Whitelist {
  std::set<CodeLocation> branches;
  std::string provenance;

  bool Contains(const CodeLocation& b) const { return branches.count(b) != 0; }
};

Whitelist BuildWhitelist(const std::vector<AggregatedFinding>& findings, const BranchCounts& stats,
                         const AnalysisCriteria& c);

std::string FormatWhitelist(const Whitelist& w);
struct WhitelistParse {
  Whitelist whitelist;
  std::vector<Diagnostic> diagnostics;
};
WhitelistParse ParseWhitelist(std::string_view text);

// Reads the "branch_stats" object of a session summary.
std::optional<BranchCounts> BranchCountsFromSession(const nlohmann::json& session, std::string* error);

struct Report {
  nlohmann::ordered_json json;
  std::string text;
};

Report RenderReport(const std::vector<AggregatedFinding>& findings, const BranchCounts& stats,
                    const Whitelist* whitelist, const nlohmann::ordered_json& config);

}  // namespace svm

#endif  // SVM_ANALYZE_H_
