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

#include "svm/analyze.h"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace svm {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

int Severity(Controllability c) {
  switch (c) {
    case Controllability::kCode: return 0;
    case Controllability::kControlled: return 1;
    case Controllability::kUnknown: return 2;
    case Controllability::kUncontrolled: return 3;
  }
  return 4;
}

std::string SequenceString(const BranchSequence& seq) {
  std::string s;
  for (const auto& b : seq) {
    if (!s.empty()) s += " -> ";
    s += b.ToString();
  }
  return s;
}

void MergeInto(AggregatedFinding& into, const AggregatedFinding& from) {
  into.inputs.insert(from.inputs.begin(), from.inputs.end());
  into.triggers += from.triggers;
  into.min_order = into.min_order == 0 ? from.min_order : std::min(into.min_order, from.min_order);
  into.sequences.insert(from.sequences.begin(), from.sequences.end());
  into.identities.insert(from.identities.begin(), from.identities.end());
  into.addrs.insert(from.addrs.begin(), from.addrs.end());
  into.offsets.insert(from.offsets.begin(), from.offsets.end());
}

}  // namespace

std::string_view ControllabilityName(Controllability c) {
  switch (c) {
    case Controllability::kControlled: return "CONTROLLED";
    case Controllability::kUncontrolled: return "UNCONTROLLED";
    case Controllability::kUnknown: return "UNKNOWN";
    case Controllability::kCode: return "CODE";
  }
  return "?";
}

std::string AnalysisCriteria::Check() const {
  if (min_branch_executions < 1) return "min branch executions must be >= 1";
  if (min_vuln_triggers < 1) return "min vulnerability triggers must be >= 1";
  return "";
}

std::string AnalysisCriteria::Describe() const {
  return "min_branch_executions=" + std::to_string(min_branch_executions) +
         " min_vuln_triggers=" + std::to_string(min_vuln_triggers) +
         " uncontrolled_is_benign=" + (uncontrolled_is_benign ? "true" : "false") +
         " identity=" + std::string(IdentityModeName(identity));
}

std::vector<AggregatedFinding> Aggregate(const std::vector<TraceRecord>& records, IdentityMode identity) {
  std::map<std::pair<CodeLocation, ViolationKind>, AggregatedFinding> groups;
  for (const TraceRecord& r : records) {
    AggregatedFinding one;
    one.offending = r.offending;
    one.kind = r.kind;
    one.inputs.insert(r.input_id);
    one.triggers = 1;
    one.min_order = r.order();
    one.sequences.insert(r.branches);
    one.identities.insert(r.Identity(identity));
    one.addrs.insert(r.addr);
    if (r.referent) one.offsets.insert(r.referent->offset);
    auto [it, inserted] = groups.try_emplace({r.offending, r.kind}, one);
    if (!inserted) MergeInto(it->second, one);
  }
  std::vector<AggregatedFinding> out;
  for (auto& [key, f] : groups) out.push_back(std::move(f));
  return out;
}

std::vector<AggregatedFinding> Merge(const std::vector<AggregatedFinding>& a, const std::vector<AggregatedFinding>& b) {
  std::map<std::pair<CodeLocation, ViolationKind>, AggregatedFinding> groups;
  for (const auto* side : {&a, &b}) {
    for (const AggregatedFinding& f : *side) {
      auto [it, inserted] = groups.try_emplace({f.offending, f.kind}, f);
      if (!inserted) MergeInto(it->second, f);
      it->second.controllability = Controllability::kUnknown;
    }
  }
  std::vector<AggregatedFinding> out;
  for (auto& [key, f] : groups) out.push_back(std::move(f));
  return out;
}

Controllability ClassifyControllability(const AggregatedFinding& f, const AnalysisCriteria& c) {
  if (f.kind == ViolationKind::kCodePtr) return Controllability::kCode;
  if (f.distinct_inputs() < c.min_vuln_triggers) return Controllability::kUnknown;
  return f.identities.size() == 1 ? Controllability::kUncontrolled : Controllability::kControlled;
}

void Classify(std::vector<AggregatedFinding>& findings, const AnalysisCriteria& c) {
  for (auto& f : findings) f.controllability = ClassifyControllability(f, c);
}

bool IsBenign(const AggregatedFinding& f, const AnalysisCriteria& c) {
  return c.uncontrolled_is_benign && f.controllability == Controllability::kUncontrolled &&
         f.triggers >= c.min_vuln_triggers;
}

Whitelist BuildWhitelist(const std::vector<AggregatedFinding>& findings, const BranchCounts& stats,
                         const AnalysisCriteria& c) {
  std::set<CodeLocation> tainted;
  for (const auto& f : findings) {
    if (IsBenign(f, c)) continue;
    for (const auto& seq : f.sequences) tainted.insert(seq.begin(), seq.end());
  }
  Whitelist w;
  w.provenance = c.Describe();
  for (const auto& [branch, count] : stats) {
    if (count >= c.min_branch_executions && tainted.count(branch) == 0) w.branches.insert(branch);
  }
  return w;
}

std::string FormatWhitelist(const Whitelist& w) {
  std::ostringstream out;
  out << "# svm whitelist\n# version: " << kToolVersion << "\n";
  if (!w.provenance.empty()) out << "# criteria: " << w.provenance << "\n";
  for (const auto& b : w.branches) out << b.ToString() << "\n";
  return out.str();
}

WhitelistParse ParseWhitelist(std::string_view text) {
  WhitelistParse result;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const size_t last = line.find_last_not_of(" \t\r");
    const std::string body = line.substr(first, last - first + 1);
    if (body[0] == '#') {
      const std::string tag = "# criteria: ";
      if (body.rfind(tag, 0) == 0) result.whitelist.provenance = body.substr(tag.size());
      continue;
    }
    auto loc = CodeLocation::Parse(body);
    if (!loc) {
      result.diagnostics.push_back({line_no, "expected fn:block:idx, got '" + body + "'"});
      continue;
    }
    result.whitelist.branches.insert(*loc);
  }
  return result;
}

std::optional<BranchCounts> BranchCountsFromSession(const json& session, std::string* error) {
  if (!session.is_object() || !session.contains("branch_stats") || !session["branch_stats"].is_object()) {
    if (error != nullptr) *error = "session has no branch_stats object";
    return std::nullopt;
  }
  BranchCounts counts;
  for (const auto& [key, value] : session["branch_stats"].items()) {
    auto loc = CodeLocation::Parse(key);
    if (!loc || !value.is_number_unsigned()) {
      if (error != nullptr) *error = "malformed branch_stats entry '" + key + "'";
      return std::nullopt;
    }
    counts[*loc] = value.get<uint64_t>();
  }
  return counts;
}

Report RenderReport(const std::vector<AggregatedFinding>& findings, const BranchCounts& stats,
                    const Whitelist* whitelist, const ordered_json& config) {
  std::vector<const AggregatedFinding*> sorted;
  for (const auto& f : findings) sorted.push_back(&f);
  std::stable_sort(sorted.begin(), sorted.end(), [](const AggregatedFinding* a, const AggregatedFinding* b) {
    return std::make_tuple(Severity(a->controllability), a->min_order, a->offending, a->kind) <
           std::make_tuple(Severity(b->controllability), b->min_order, b->offending, b->kind);
  });

  // Per-branch view: which offending instructions each branch can lead to.
  std::map<CodeLocation, std::set<std::string>> reachable;
  for (const auto& [b, count] : stats) reachable[b];
  for (const auto& f : findings) {
    for (const auto& seq : f.sequences) {
      for (const auto& b : seq) reachable[b].insert(f.offending.ToString());
    }
  }

  Report report;
  ordered_json& j = report.json;
  j["svm_header"] = ordered_json{{"version", kToolVersion}, {"config", config}};
  ordered_json jf = ordered_json::array();
  std::ostringstream txt;
  txt << "Speculative violation report\n\n";
  txt << "Findings: " << findings.size() << "\n";
  for (const AggregatedFinding* f : sorted) {
    ordered_json e;
    e["offending"] = f->offending.ToString();
    e["kind"] = std::string(ViolationKindName(f->kind));
    e["controllability"] = std::string(ControllabilityName(f->controllability));
    e["min_order"] = f->min_order;
    e["distinct_inputs"] = f->distinct_inputs();
    e["triggers"] = f->triggers;
    ordered_json addrs = ordered_json::array();
    for (uint64_t a : f->addrs) addrs.push_back(HexString(a));
    e["addrs"] = std::move(addrs);
    e["offsets"] = f->offsets;
    e["identities"] = f->identities;
    ordered_json seqs = ordered_json::array();
    for (const auto& seq : f->sequences) {
      ordered_json s = ordered_json::array();
      for (const auto& b : seq) s.push_back(b.ToString());
      seqs.push_back(std::move(s));
    }
    e["branch_sequences"] = std::move(seqs);
    e["inputs"] = f->inputs;
    jf.push_back(std::move(e));

    txt << "\n" << f->offending.ToString() << "  " << ViolationKindName(f->kind) << "  "
        << ControllabilityName(f->controllability) << "  order " << f->min_order << "\n";
    txt << "  triggers " << f->triggers << " from " << f->distinct_inputs() << " input(s)\n";
    if (!f->offsets.empty()) {
      txt << "  offsets:";
      for (int64_t o : f->offsets) txt << " " << (o >= 0 ? "+" : "") << o;
      txt << "\n";
    }
    txt << "  addresses:";
    for (uint64_t a : f->addrs) txt << " " << HexString(a);
    txt << "\n";
    for (const auto& seq : f->sequences) txt << "  via " << SequenceString(seq) << "\n";
    txt << "  inputs:";
    size_t shown = 0;
    for (const auto& id : f->inputs) {
      if (shown++ == 8) {
        txt << " ...";
        break;
      }
      txt << " " << id;
    }
    txt << "\n";
  }
  j["findings"] = std::move(jf);

  ordered_json jb = ordered_json::array();
  txt << "\nBranches:\n";
  for (const auto& [b, offenders] : reachable) {
    auto it = stats.find(b);
    const uint64_t count = it == stats.end() ? 0 : it->second;
    const bool listed = whitelist != nullptr && whitelist->Contains(b);
    ordered_json e{{"branch", b.ToString()}, {"executions", count}, {"vulnerabilities", offenders}};
    if (whitelist != nullptr) e["whitelisted"] = listed;
    jb.push_back(std::move(e));
    txt << "  " << b.ToString() << "  executed " << count;
    if (listed) txt << "  whitelisted";
    if (!offenders.empty()) {
      txt << "  ->";
      for (const auto& o : offenders) txt << " " << o;
    }
    txt << "\n";
  }
  j["branches"] = std::move(jb);
  report.text = txt.str();
  return report;
}

}  // namespace svm
