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

#ifndef SVM_TRACE_IO_H_
#define SVM_TRACE_IO_H_

// Line-delimited JSON trace format. Each line is one violation:
//
//   {"kind":"DATA-OOB","offending":{"fn":..,"block":..,"idx":..},
//    "addr":"0x100080","class":"REDZONE",
//    "referent":{"base":"0x100000","size":128,"index":0}|null,
//    "offset":128|null,"detail":null|"BAD-RET"|"BAD-JTAB-INDEX",
//    "branches":[{"fn":..,"block":..,"idx":..},...],"order":1,
//    "input_id":"...","run":12}
//
// A file may begin with one header line {"svm_header":{...}} carrying the
// tool version and resolved configuration; readers skip it.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "svm/assembler.h"
#include "svm/detect.h"
#include "svm/isa.h"

namespace svm {

inline constexpr const char* kToolVersion = "0.3.1";

struct TraceRecord {
  ViolationKind kind = ViolationKind::kDataOob;
  CodeLocation offending;
  uint64_t addr = 0;
  AccessKind access = AccessKind::kUnmapped;  // DATA-OOB only
  std::optional<Referent> referent;
  FaultKind code_fault = FaultKind::kNone;    // CODE-PTR only
  std::vector<CodeLocation> branches;
  std::string input_id;
  uint64_t run = 0;

  uint32_t order() const { return static_cast<uint32_t>(branches.size()); }
  std::string Identity(IdentityMode mode) const;
};

TraceRecord ToTraceRecord(const Program& p, const ViolationRecord& v);

nlohmann::ordered_json RecordToJson(const TraceRecord& r);
// Returns nullopt and sets `error` when a required field is missing or malformed.
std::optional<TraceRecord> RecordFromJson(const nlohmann::json& j, std::string* error);

std::string HeaderLine(const nlohmann::ordered_json& config);

struct TraceReadResult {
  std::vector<TraceRecord> records;
  std::vector<Diagnostic> diagnostics;  // malformed lines, which are skipped
};

TraceReadResult ReadTrace(std::istream& in);
TraceReadResult ReadTraceFile(const std::string& path);

// 64-bit FNV-1a of the input bytes as 16 hex digits.
std::string InputId(std::span<const uint8_t> data);

std::string HexString(uint64_t v);
std::optional<uint64_t> ParseHexString(const std::string& s);

}  // namespace svm

#endif  // SVM_TRACE_IO_H_
