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

#include "svm/trace_io.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>

namespace svm {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json LocationToJson(const CodeLocation& loc) {
  return ordered_json{{"fn", loc.fn}, {"block", loc.block}, {"idx", loc.idx}};
}

std::optional<CodeLocation> LocationFromJson(const json& j) {
  if (!j.is_object() || !j.contains("fn") || !j.contains("block") || !j.contains("idx")) return std::nullopt;
  if (!j["fn"].is_string() || !j["block"].is_string() || !j["idx"].is_number_unsigned()) return std::nullopt;
  return CodeLocation{j["fn"].get<std::string>(), j["block"].get<std::string>(), j["idx"].get<uint32_t>()};
}

std::optional<FaultKind> CodeFaultFromName(const std::string& name) {
  if (name == FaultName(FaultKind::kBadRet)) return FaultKind::kBadRet;
  if (name == FaultName(FaultKind::kBadJtabIndex)) return FaultKind::kBadJtabIndex;
  return std::nullopt;
}

}  // namespace

std::string InputId(std::span<const uint8_t> data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string HexString(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::optional<uint64_t> ParseHexString(const std::string& s) {
  if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) return std::nullopt;
  uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string TraceRecord::Identity(IdentityMode mode) const {
  return IdentityOf(kind, referent, addr, code_fault, mode);
}

TraceRecord ToTraceRecord(const Program& p, const ViolationRecord& v) {
  TraceRecord r;
  r.kind = v.kind;
  r.offending = ToLocation(p, v.offending);
  r.addr = v.addr;
  r.access = v.access.kind;
  r.referent = v.access.referent;
  r.code_fault = v.code_fault;
  for (const auto& b : v.branches) r.branches.push_back(ToLocation(p, b));
  r.input_id = v.input_id;
  r.run = v.run;
  return r;
}

ordered_json RecordToJson(const TraceRecord& r) {
  ordered_json j;
  j["kind"] = std::string(ViolationKindName(r.kind));
  j["offending"] = LocationToJson(r.offending);
  j["addr"] = HexString(r.addr);
  if (r.kind == ViolationKind::kDataOob) {
    j["class"] = std::string(AccessKindName(r.access));
  } else {
    j["class"] = nullptr;
  }
  if (r.referent) {
    j["referent"] = ordered_json{{"base", HexString(r.referent->base)},
                                 {"size", r.referent->size},
                                 {"index", r.referent->index}};
    j["offset"] = r.referent->offset;
  } else {
    j["referent"] = nullptr;
    j["offset"] = nullptr;
  }
  if (r.kind == ViolationKind::kCodePtr) {
    j["detail"] = std::string(FaultName(r.code_fault));
  } else {
    j["detail"] = nullptr;
  }
  ordered_json branches = ordered_json::array();
  for (const auto& b : r.branches) branches.push_back(LocationToJson(b));
  j["branches"] = std::move(branches);
  j["order"] = r.order();
  j["input_id"] = r.input_id;
  j["run"] = r.run;
  return j;
}

std::optional<TraceRecord> RecordFromJson(const json& j, std::string* error) {
  auto fail = [&](const std::string& what) -> std::optional<TraceRecord> {
    if (error != nullptr) *error = what;
    return std::nullopt;
  };
  if (!j.is_object()) return fail("record is not an object");
  TraceRecord r;
  if (!j.contains("kind") || !j["kind"].is_string()) return fail("missing kind");
  auto kind = ViolationKindFromName(j["kind"].get<std::string>());
  if (!kind) return fail("unknown kind");
  r.kind = *kind;
  auto offending = j.contains("offending") ? LocationFromJson(j["offending"]) : std::nullopt;
  if (!offending) return fail("missing or malformed offending");
  r.offending = *offending;
  if (!j.contains("addr") || !j["addr"].is_string()) return fail("missing addr");
  auto addr = ParseHexString(j["addr"].get<std::string>());
  if (!addr) return fail("malformed addr");
  r.addr = *addr;
  if (r.kind == ViolationKind::kDataOob) {
    const std::string cls = j.value("class", std::string());
    if (cls == "REDZONE") {
      r.access = AccessKind::kRedzone;
    } else if (cls == "UNMAPPED") {
      r.access = AccessKind::kUnmapped;
    } else {
      return fail("DATA-OOB record needs class REDZONE or UNMAPPED");
    }
  } else {
    auto code = CodeFaultFromName(j.value("detail", std::string()));
    if (!code) return fail("CODE-PTR record needs detail");
    r.code_fault = *code;
  }
  if (j.contains("referent") && !j["referent"].is_null()) {
    const json& ref = j["referent"];
    if (!ref.is_object() || !ref.contains("base") || !ref.contains("size") || !j.contains("offset") ||
        !j["offset"].is_number_integer()) {
      return fail("malformed referent");
    }
    auto base = ref["base"].is_string() ? ParseHexString(ref["base"].get<std::string>()) : std::nullopt;
    if (!base || !ref["size"].is_number_unsigned()) return fail("malformed referent");
    Referent referent;
    referent.base = *base;
    referent.size = ref["size"].get<uint64_t>();
    referent.index = ref.value("index", 0u);
    referent.offset = j["offset"].get<int64_t>();
    r.referent = referent;
  }
  if (!j.contains("branches") || !j["branches"].is_array() || j["branches"].empty()) {
    return fail("branches must be a non-empty array");
  }
  for (const auto& b : j["branches"]) {
    auto loc = LocationFromJson(b);
    if (!loc) return fail("malformed branch location");
    r.branches.push_back(*loc);
  }
  if (j.contains("order") && (!j["order"].is_number_unsigned() || j["order"].get<uint64_t>() != r.branches.size())) {
    return fail("order does not match branch sequence length");
  }
  if (!j.contains("input_id") || !j["input_id"].is_string()) return fail("missing input_id");
  r.input_id = j["input_id"].get<std::string>();
  r.run = j.value("run", uint64_t{0});
  return r;
}

std::string HeaderLine(const ordered_json& config) {
  ordered_json header;
  header["svm_header"] = ordered_json{{"version", kToolVersion}, {"config", config}};
  return header.dump();
}

TraceReadResult ReadTrace(std::istream& in) {
  TraceReadResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      result.diagnostics.push_back({line_no, "malformed JSON"});
      continue;
    }
    if (j.is_object() && j.contains("svm_header")) continue;
    std::string error;
    auto record = RecordFromJson(j, &error);
    if (!record) {
      result.diagnostics.push_back({line_no, error});
      continue;
    }
    result.records.push_back(std::move(*record));
  }
  return result;
}

TraceReadResult ReadTraceFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    TraceReadResult r;
    r.diagnostics.push_back({0, "cannot open trace file '" + path + "'"});
    return r;
  }
  return ReadTrace(in);
}

}  // namespace svm
