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

#include "svm/session_config.h"

#include <charconv>
#include <limits>
#include <sstream>

namespace svm {
namespace {

std::string_view Trim(std::string_view s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
std::string ParseUnsigned(std::string_view value, T& out) {
  uint64_t v = 0;
  int base = 10;
  if (value.size() > 2 && value[0] == '0' && (value[1] == 'x' || value[1] == 'X')) {
    value.remove_prefix(2);
    base = 16;
  }
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v, base);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size() ||
      v > static_cast<uint64_t>(std::numeric_limits<T>::max())) {
    return "expected an unsigned integer, got '" + std::string(value) + "'";
  }
  out = static_cast<T>(v);
  return "";
}

std::string ParseBool(std::string_view value, bool& out) {
  if (value == "true" || value == "1" || value == "yes") {
    out = true;
  } else if (value == "false" || value == "0" || value == "no") {
    out = false;
  } else {
    return "expected true or false, got '" + std::string(value) + "'";
  }
  return "";
}

}  // namespace

std::string SessionConfig::Set(std::string_view key, std::string_view value) {
  value = Trim(value);
  if (key == "window") return ParseUnsigned(value, spec.window);
  if (key == "stride") return ParseUnsigned(value, spec.stride);
  if (key == "max_order") return ParseUnsigned(value, spec.max_order);
  if (key == "order_base") return ParseUnsigned(value, spec.order_base);
  if (key == "spec") return ParseBool(value, spec.enabled);
  if (key == "prioritized") return ParseBool(value, spec.prioritized);
  if (key == "identity") {
    auto m = IdentityModeFromName(value);
    if (!m) return "identity must be offset or raw";
    spec.identity = *m;
    criteria.identity = *m;
    return "";
  }
  if (key == "seed") return ParseUnsigned(value, fuzz.seed);
  if (key == "runs") return ParseUnsigned(value, fuzz.max_runs);
  if (key == "max_len") return ParseUnsigned(value, fuzz.max_len);
  if (key == "workers") return ParseUnsigned(value, fuzz.workers);
  if (key == "min_branch_executions") return ParseUnsigned(value, criteria.min_branch_executions);
  if (key == "min_vuln_triggers") return ParseUnsigned(value, criteria.min_vuln_triggers);
  if (key == "uncontrolled_is_benign") return ParseBool(value, criteria.uncontrolled_is_benign);
  if (key == "mode") {
    auto m = HardenModeFromName(value);
    if (!m) return "mode must be fence or slh";
    mode = *m;
    return "";
  }
  return "unknown key '" + std::string(key) + "'";
}

std::vector<Diagnostic> SessionConfig::Apply(std::string_view text) {
  std::vector<Diagnostic> diags;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (const size_t hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = Trim(body);
    if (body.empty()) continue;
    const size_t eq = body.find('=');
    if (eq == std::string_view::npos) {
      diags.push_back({line_no, "expected key=value"});
      continue;
    }
    if (std::string err = Set(Trim(body.substr(0, eq)), body.substr(eq + 1)); !err.empty()) {
      diags.push_back({line_no, err});
    }
  }
  return diags;
}

std::string SessionConfig::Check() const {
  if (std::string e = spec.Check(); !e.empty()) return e;
  if (std::string e = criteria.Check(); !e.empty()) return e;
  if (fuzz.max_len == 0) return "max_len must be >= 1";
  if (fuzz.workers == 0) return "workers must be >= 1";
  return "";
}

nlohmann::ordered_json SessionConfig::ToJson() const {
  return {{"window", spec.window},
          {"stride", spec.stride},
          {"max_order", spec.max_order},
          {"order_base", spec.order_base},
          {"spec", spec.enabled},
          {"prioritized", spec.prioritized},
          {"identity", std::string(IdentityModeName(spec.identity))},
          {"seed", fuzz.seed},
          {"runs", fuzz.max_runs},
          {"max_len", fuzz.max_len},
          {"workers", fuzz.workers},
          {"min_branch_executions", criteria.min_branch_executions},
          {"min_vuln_triggers", criteria.min_vuln_triggers},
          {"uncontrolled_is_benign", criteria.uncontrolled_is_benign},
          {"mode", std::string(HardenModeName(mode))}};
}

std::string SessionConfig::ToText() const {
  std::ostringstream out;
  const auto json = ToJson();
  for (const auto& [key, value] : json.items()) {
    out << key << "=" << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
  }
  return out.str();
}

}  // namespace svm
