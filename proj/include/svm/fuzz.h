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

#ifndef SVM_FUZZ_H_
#define SVM_FUZZ_H_

// Coverage-guided fuzzing loop. Coverage counts architectural branch edges
// only; a child is kept when it covers a new edge or produces a violation
// key not seen before in the session.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "svm/engine.h"
#include "svm/isa.h"
#include "svm/mutator.h"
#include "svm/trace_io.h"

namespace svm {

class FuzzIoError : public std::runtime_error {
 public:
  explicit FuzzIoError(const std::string& what) : std::runtime_error(what) {}
};

enum class DiscoveryReason : uint8_t { kSeed, kNewEdge, kNewVuln };

std::string_view DiscoveryReasonName(DiscoveryReason r);
std::optional<DiscoveryReason> DiscoveryReasonFromName(std::string_view name);

struct CorpusEntry {
  std::string id;
  Bytes data;
  DiscoveryReason reason = DiscoveryReason::kSeed;
};

// In-memory corpus, optionally mirrored to a directory as <id>_<reason>.bin.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::string dir) : dir_(std::move(dir)) {}

  // Reads every *.bin file of `dir` in file-name order. Missing directory
  // yields an empty corpus bound to `dir`.
  static Corpus Load(const std::string& dir);

  // Returns false if an entry with the same content already exists.
  // Persists the entry when the corpus is bound to a directory.
  bool Add(Bytes data, DiscoveryReason reason);

  bool Contains(const std::string& id) const { return ids_.count(id) != 0; }
  const std::vector<CorpusEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::vector<CorpusEntry> entries_;
  std::set<std::string> ids_;
};

class CoverageMap {
 public:
  // No-op returning false while in speculation; otherwise counts the hit and
  // reports whether it was the first.
  bool Update(const Edge& edge, bool in_speculation);

  uint64_t Hits(const Edge& edge) const;
  size_t size() const { return hits_.size(); }
  const std::map<Edge, uint64_t>& hits() const { return hits_; }

 private:
  std::map<Edge, uint64_t> hits_;
};

struct FuzzConfig {
  uint64_t seed = 0;
  uint64_t max_runs = 10000;
  size_t max_len = 64;
  unsigned workers = 1;
};

struct FuzzOutputs {
  std::string trace_path;    // empty: no trace file
  std::string session_path;  // empty: no summary
  std::string crash_dir;     // empty: crashes are counted but not saved
  nlohmann::ordered_json config = nlohmann::ordered_json::object();  // embedded in headers
};

struct FuzzStats {
  uint64_t runs = 0;
  double seconds = 0;
  size_t corpus_size = 0;
  size_t edges = 0;
  size_t keys = 0;
  uint64_t crashes = 0;
  uint64_t records = 0;

  double runs_per_sec() const { return seconds > 0 ? runs / seconds : 0; }
};

struct FuzzSession {
  FuzzStats stats;
  CoverageMap coverage;
  BranchStats branch_stats;
  std::set<DedupKey> keys;
};

// Seeds are executed first (they count as runs), then `max_runs` mutated
// children. The corpus must not be empty.
FuzzSession FuzzLoop(const Program& p, Corpus& corpus, const FuzzConfig& cfg, const SpecConfig& spec,
                     const FuzzOutputs& out);

// Session summary written next to the trace; also read back by analysis.
nlohmann::ordered_json SessionSummary(const Program& p, const FuzzSession& s, const FuzzConfig& cfg,
                                      const nlohmann::ordered_json& config);

}  // namespace svm

#endif  // SVM_FUZZ_H_
