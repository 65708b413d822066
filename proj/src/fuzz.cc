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

#include "svm/fuzz.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <thread>

#include "svm/trace_io.h"

namespace svm {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void WriteFile(const fs::path& path, std::span<const uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw FuzzIoError("IO-ERROR: cannot write '" + path.string() + "'");
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FuzzIoError("IO-ERROR: cannot create directory '" + dir + "': " + ec.message());
}

// State shared by all workers. Everything here is touched under `mu`.
class SharedSession {
 public:
  SharedSession(const Program& p, Corpus& corpus, const FuzzOutputs& out, FuzzSession& session)
      : p_(p), corpus_(corpus), out_(out), session_(session) {
    if (!out.trace_path.empty()) {
      trace_.open(out.trace_path, std::ios::trunc);
      if (!trace_) throw FuzzIoError("IO-ERROR: cannot open trace '" + out.trace_path + "'");
      trace_ << HeaderLine(out.config) << "\n";
    }
    if (!out.crash_dir.empty()) EnsureDir(out.crash_dir);
  }

  // Picks parent and partner uniformly from the corpus.
  std::pair<Bytes, Bytes> Pick(std::mt19937_64& rng) {
    std::lock_guard<std::mutex> lock(mu_);
    const auto& e = corpus_.entries();
    Bytes parent = e[Draw(rng, e.size())].data;
    Bytes partner = e[Draw(rng, e.size())].data;
    return {std::move(parent), std::move(partner)};
  }

  uint64_t NextRun() { return ++next_run_; }

  // Merges one run into the session; `seed` entries are already in the corpus.
  void Commit(const Bytes& input, const ExposureResult& r, bool seed) {
    std::lock_guard<std::mutex> lock(mu_);
    FuzzStats& stats = session_.stats;
    ++stats.runs;
    bool new_edge = false;
    for (const Edge& e : r.trace.covered_edges) new_edge |= session_.coverage.Update(e, /*in_speculation=*/false);
    bool new_vuln = false;
    for (const ViolationRecord& v : r.trace.violations) {
      new_vuln |= session_.keys.insert(MakeDedupKey(v, IdentityMode::kOffset)).second;
      if (trace_.is_open()) trace_ << RecordToJson(ToTraceRecord(p_, v)).dump() << "\n";
      ++stats.records;
    }
    if (r.arch.faulted()) {
      ++stats.crashes;
      if (!out_.crash_dir.empty()) {
        WriteFile(fs::path(out_.crash_dir) / (InputId(input) + "_crash.bin"), input);
      }
      return;
    }
    if (seed) return;
    if (new_vuln) {
      corpus_.Add(input, DiscoveryReason::kNewVuln);
    } else if (new_edge) {
      corpus_.Add(input, DiscoveryReason::kNewEdge);
    }
  }

  void Flush() {
    if (!trace_.is_open()) return;
    trace_.flush();
    if (!trace_) throw FuzzIoError("IO-ERROR: cannot write trace '" + out_.trace_path + "'");
  }

 private:
  const Program& p_;
  Corpus& corpus_;
  const FuzzOutputs& out_;
  FuzzSession& session_;
  std::mutex mu_;
  std::ofstream trace_;
  std::atomic<uint64_t> next_run_{0};
};

}  // namespace

std::string_view DiscoveryReasonName(DiscoveryReason r) {
  switch (r) {
    case DiscoveryReason::kSeed: return "seed";
    case DiscoveryReason::kNewEdge: return "new-edge";
    case DiscoveryReason::kNewVuln: return "new-vuln";
  }
  return "?";
}

std::optional<DiscoveryReason> DiscoveryReasonFromName(std::string_view name) {
  for (auto r : {DiscoveryReason::kSeed, DiscoveryReason::kNewEdge, DiscoveryReason::kNewVuln}) {
    if (DiscoveryReasonName(r) == name) return r;
  }
  return std::nullopt;
}

Corpus Corpus::Load(const std::string& dir) {
  Corpus corpus(dir);
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return corpus;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ".bin") files.push_back(e.path());
  }
  if (ec) throw FuzzIoError("IO-ERROR: cannot list '" + dir + "': " + ec.message());
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FuzzIoError("IO-ERROR: cannot read '" + path.string() + "'");
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string stem = path.stem().string();
    const size_t sep = stem.find('_');
    auto reason = sep == std::string::npos ? std::nullopt : DiscoveryReasonFromName(stem.substr(sep + 1));
    CorpusEntry entry{InputId(data), std::move(data), reason.value_or(DiscoveryReason::kSeed)};
    if (corpus.ids_.insert(entry.id).second) corpus.entries_.push_back(std::move(entry));
  }
  return corpus;
}

bool Corpus::Add(Bytes data, DiscoveryReason reason) {
  std::string id = InputId(data);
  if (!ids_.insert(id).second) return false;
  if (!dir_.empty()) {
    EnsureDir(dir_);
    WriteFile(fs::path(dir_) / (id + "_" + std::string(DiscoveryReasonName(reason)) + ".bin"), data);
  }
  entries_.push_back({std::move(id), std::move(data), reason});
  return true;
}

bool CoverageMap::Update(const Edge& edge, bool in_speculation) {
  if (in_speculation) return false;
  return ++hits_[edge] == 1;
}

uint64_t CoverageMap::Hits(const Edge& edge) const {
  auto it = hits_.find(edge);
  return it == hits_.end() ? 0 : it->second;
}

FuzzSession FuzzLoop(const Program& p, Corpus& corpus, const FuzzConfig& cfg, const SpecConfig& spec,
                     const FuzzOutputs& out) {
  if (corpus.empty()) throw FuzzIoError("EMPTY-CORPUS: at least one seed input is required");
  const auto start = std::chrono::steady_clock::now();
  FuzzSession session;
  SharedSession shared(p, corpus, out, session);
  const Mutator mutator(cfg.max_len);

  {
    Engine engine(p, spec);
    const std::vector<CorpusEntry> seeds = corpus.entries();
    for (const CorpusEntry& seed : seeds) {
      const uint64_t run = shared.NextRun();
      shared.Commit(seed.data, engine.Run(seed.data, &session.branch_stats, seed.id, run), /*seed=*/true);
    }
  }

  std::atomic<uint64_t> remaining{cfg.max_runs};
  auto worker = [&](unsigned index) {
    Engine engine(p, spec);
    std::mt19937_64 rng(cfg.seed + index);
    while (true) {
      uint64_t left = remaining.load();
      do {
        if (left == 0) return;
      } while (!remaining.compare_exchange_weak(left, left - 1));
      auto [parent, partner] = shared.Pick(rng);
      Bytes child = mutator.Mutate(parent, rng, partner);
      const uint64_t run = shared.NextRun();
      shared.Commit(child, engine.Run(child, &session.branch_stats, InputId(child), run), /*seed=*/false);
    }
  };
  const unsigned workers = std::max(1u, cfg.workers);
  if (workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned i = 0; i < workers; ++i) threads.emplace_back(worker, i);
    for (auto& t : threads) t.join();
  }
  shared.Flush();

  FuzzStats& stats = session.stats;
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  stats.corpus_size = corpus.size();
  stats.edges = session.coverage.size();
  stats.keys = session.keys.size();

  if (!out.session_path.empty()) {
    std::ofstream s(out.session_path, std::ios::trunc);
    s << SessionSummary(p, session, cfg, out.config).dump(2) << "\n";
    if (!s) throw FuzzIoError("IO-ERROR: cannot write '" + out.session_path + "'");
  }
  return session;
}

ordered_json SessionSummary(const Program& p, const FuzzSession& s, const FuzzConfig& cfg,
                            const ordered_json& config) {
  ordered_json j;
  j["version"] = kToolVersion;
  j["config"] = config;
  j["seed"] = cfg.seed;
  j["runs"] = s.stats.runs;
  j["edges"] = s.stats.edges;
  j["keys"] = s.stats.keys;
  j["corpus_size"] = s.stats.corpus_size;
  j["crashes"] = s.stats.crashes;
  j["wall_time"] = s.stats.seconds;
  ordered_json branches = ordered_json::object();
  for (const auto& [id, count] : s.branch_stats.Snapshot()) branches[ToLocation(p, id).ToString()] = count;
  j["branch_stats"] = std::move(branches);
  return j;
}

}  // namespace svm
