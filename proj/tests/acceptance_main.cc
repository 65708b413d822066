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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "svm/analyze.h"
#include "svm/engine.h"
#include "svm/fixtures.h"
#include "svm/fuzz.h"
#include "svm/harden.h"
#include "svm/oracle.h"
#include "svm/trace_io.h"
#include "svm/vm.h"
#include "test_util.h"

namespace svm {
namespace {

namespace fs = std::filesystem;
using ::svm::testing::EngineViolations;
using ::svm::testing::MustParse;
using ::svm::testing::OracleViolations;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void Fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

double Seconds(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path ScratchDir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "svm_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SpecConfig Exhaustive(uint32_t k) {
  SpecConfig cfg;
  cfg.max_order = k;
  cfg.prioritized = false;
  return cfg;
}

Outcome GadgetDetection() {
  Outcome o;
  double slowest = 0;
  for (int id = 1; id <= kClassicVariants; ++id) {
    const GadgetFixture& g = BuiltinGadget(id);
    const auto start = Clock::now();
    Engine engine(g.program, Exhaustive(2));
    ExposureResult r = engine.Run(g.trigger, nullptr, InputId(g.trigger));
    const double took = Seconds(start);
    slowest = std::max(slowest, took);
    uint32_t min_order = 0;
    for (const auto& v : r.trace.violations) {
      if (ToLocation(g.program, v.offending) != g.expected.offending || v.kind != g.expected.kind) continue;
      if (min_order == 0 || v.order() < min_order) min_order = v.order();
    }
    if (min_order == 0) o.Fail("g" + std::to_string(id) + ": expected violation missing");
    if (min_order != 0 && min_order != g.expected.min_order) {
      o.Fail("g" + std::to_string(id) + ": min order " + std::to_string(min_order));
    }
    if (took >= 1.0) o.Fail("g" + std::to_string(id) + ": took " + std::to_string(took) + "s");
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "15/15 detected, slowest %.3fs", slowest);
  if (o.pass) o.detail = buf;
  return o;
}

Outcome Hardening() {
  Outcome o;
  const auto start = Clock::now();
  size_t sessions = 0;
  uint64_t runs = 0;
  for (int id = 1; id <= kClassicVariants; ++id) {
    const GadgetFixture& g = BuiltinGadget(id);
    std::set<CodeLocation> all;
    for (const auto& b : AllBranches(g.program)) all.insert(ToLocation(g.program, b));
    for (HardenMode mode : {HardenMode::kFence, HardenMode::kSlh}) {
      HardenConfig hc;
      hc.mode = mode;
      const Program hardened = Harden(g.program, hc).program;
      const std::string tag = "g" + std::to_string(id) + "/" + std::string(HardenModeName(mode));
      const std::vector<std::vector<uint8_t>> replay = {g.trigger};
      if (!VerifyHardening(hardened, replay, SpecConfig{}, all).empty()) o.Fail(tag + ": trigger replay violates");
      Corpus corpus;
      corpus.Add(g.trigger, DiscoveryReason::kSeed);
      FuzzConfig fc;
      fc.seed = 1234;
      fc.max_runs = 10000;
      FuzzSession s = FuzzLoop(hardened, corpus, fc, SpecConfig{}, FuzzOutputs{});
      if (!s.keys.empty()) o.Fail(tag + ": " + std::to_string(s.keys.size()) + " violation keys while fuzzing");
      ++sessions;
      runs += s.stats.runs;
    }
  }
  const double took = Seconds(start);
  if (took >= 300) o.Fail("took " + std::to_string(took) + "s");
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu sessions, %llu runs, clean in %.1fs", sessions,
                static_cast<unsigned long long>(runs), took);
  if (o.pass) o.detail = buf;
  return o;
}

Outcome OracleEquivalence() {
  Outcome o;
  std::mt19937_64 rng(2026);
  size_t cases = 0;
  size_t nonempty = 0;
  auto compare = [&](const Program& p, const std::vector<uint8_t>& in, uint32_t k, const std::string& tag) {
    auto e = EngineViolations(p, in, k);
    auto r = OracleViolations(p, in, k);
    ++cases;
    nonempty += !r.empty();
    if (e != r) o.Fail(tag + " K=" + std::to_string(k) + "\nengine:\n" + ::svm::testing::Describe(p, e) +
                       "oracle:\n" + ::svm::testing::Describe(p, r));
  };
  for (int i = 0; i < 200; ++i) {
    const std::string text = ::svm::testing::RandomProgramText(rng);
    Program p = MustParse(text);
    auto in = ::svm::testing::RandomInput(rng);
    for (uint32_t k = 1; k <= 3; ++k) compare(p, in, k, "random #" + std::to_string(i));
  }
  for (const GadgetFixture& g : BuiltinGadgets()) {
    for (uint32_t k = 1; k <= 3; ++k) {
      compare(g.program, g.trigger, k, "g" + std::to_string(g.id) + " trigger");
      compare(g.program, g.safe, k, "g" + std::to_string(g.id) + " safe");
    }
  }
  if (o.pass) o.detail = std::to_string(cases) + " cases equal (" + std::to_string(nonempty) + " with violations)";
  return o;
}

Outcome ExposureTransparency() {
  Outcome o;
  std::mt19937_64 rng(4242);
  for (int i = 0; i < 500 && o.pass; ++i) {
    Program p = MustParse(::svm::testing::RandomProgramText(rng));
    auto in = ::svm::testing::RandomInput(rng);
    Engine engine(p, Exhaustive(3));
    ExposureResult r = engine.Run(in, nullptr);
    RunResult plain = RunArchitectural(p, in);
    if (!SameOutcome(r.arch, plain) || !r.arch.machine.SameArchitecturalState(plain.machine) ||
        r.arch.steps != plain.steps) {
      o.Fail("pair #" + std::to_string(i) + " differs");
    }
  }
  if (o.pass) o.detail = "500 pairs identical";
  return o;
}

Outcome WindowFidelity() {
  Outcome o;
  for (uint64_t block_len : {10u, 1000u}) {
    for (uint64_t distance : {249u, 251u}) {
      Program p = MustParse(::svm::testing::WindowProgramText(distance, block_len));
      const std::vector<uint8_t> in = {0};
      const size_t want = distance < 250 ? 1 : 0;
      const size_t e = EngineViolations(p, in, 1).size();
      const size_t r = OracleViolations(p, in, 1).size();
      if (e != want || r != want) {
        o.Fail("distance " + std::to_string(distance) + " block " + std::to_string(block_len) + ": engine " +
               std::to_string(e) + " oracle " + std::to_string(r));
      }
    }
  }
  if (o.pass) o.detail = "249 detected, 251 not (engine and oracle)";
  return o;
}

Outcome PrioritizedSchedule() {
  Outcome o;
  Program p = MustParse(
      "fn main:\n"
      "s:\n  input r1, 0\n  cmp r1, 4\n  br lt, a, b\n"
      "a:\n  cmp r1, 2\n  br lt, c, b\n"
      "b:\n  halt\n"
      "c:\n  halt\n");
  const InstructionId root{0, 0, 2};
  Engine engine(p, SpecConfig{});
  BranchStats stats;
  int ge2 = 0;
  int ge3 = 0;
  for (int n = 1; n <= 1024; ++n) {
    const std::vector<uint8_t> in = {static_cast<uint8_t>(n)};
    ExposureResult r = engine.Run(in, &stats);
    const uint32_t order = r.trace.max_order.at(root);
    ge2 += order >= 2;
    ge3 += order >= 3;
  }
  if (ge2 != 256 || ge3 != 64) o.Fail("order>=2: " + std::to_string(ge2) + ", order>=3: " + std::to_string(ge3));
  if (o.pass) o.detail = "order>=2 on 256 runs, order>=3 on 64 runs";
  return o;
}

Outcome CoveragePurity() {
  Outcome o;
  Program p = MustParse(::svm::testing::SpeculativeOnlyProgramText());
  const uint32_t x = *p.FindBlock(0, "x");
  Corpus corpus;
  corpus.Add({}, DiscoveryReason::kSeed);
  FuzzConfig fc;
  fc.seed = 5;
  fc.max_runs = 10000;
  FuzzSession s = FuzzLoop(p, corpus, fc, SpecConfig{}, FuzzOutputs{});
  for (const auto& [edge, hits] : s.coverage.hits()) {
    if (edge.branch.fn == 0 && edge.branch.block == x) o.Fail("edge from x covered " + std::to_string(hits) + "x");
  }
  OracleConfig oc;
  oc.keep_paths = true;
  OracleResult r = EnumeratePaths(p, std::vector<uint8_t>{}, oc);
  const bool speculative = std::any_of(r.paths.begin(), r.paths.end(), [](const OraclePath& path) {
    return std::find(path.blocks.begin(), path.blocks.end(), "x") != path.blocks.end();
  });
  if (!speculative) o.Fail("oracle never reached x");
  if (o.pass) {
    o.detail = std::to_string(s.stats.runs) + " runs, " + std::to_string(s.coverage.size()) +
               " edges, none from x; oracle reaches x";
  }
  return o;
}

std::vector<TraceRecord> Records(size_t inputs, size_t identities) {
  std::vector<TraceRecord> out;
  for (size_t i = 0; i < inputs; ++i) {
    TraceRecord r;
    r.kind = ViolationKind::kDataOob;
    r.offending = {"victim", "body", 2};
    r.access = AccessKind::kRedzone;
    const uint64_t offset = 128 + 8 * (i % identities);
    r.referent = Referent{1, 0x100010, 128, static_cast<int64_t>(offset)};
    r.addr = 0x100010 + offset;
    r.branches = {{"victim", "check", 3}};
    r.input_id = "in" + std::to_string(i);
    out.push_back(r);
  }
  return out;
}

Outcome ClassificationThresholds() {
  Outcome o;
  AnalysisCriteria c;
  struct Case {
    size_t inputs;
    size_t identities;
    Controllability want;
  };
  const Case cases[] = {
      {99, 1, Controllability::kUnknown},      {100, 1, Controllability::kUncontrolled},
      {150, 1, Controllability::kUncontrolled}, {99, 3, Controllability::kUnknown},
      {100, 2, Controllability::kControlled},   {150, 5, Controllability::kControlled},
  };
  for (const Case& k : cases) {
    auto findings = Aggregate(Records(k.inputs, k.identities), c.identity);
    Classify(findings, c);
    if (findings.size() != 1 || findings[0].controllability != k.want) {
      o.Fail(std::to_string(k.inputs) + " inputs/" + std::to_string(k.identities) + " signatures: got " +
             (findings.empty() ? std::string("none") : std::string(ControllabilityName(findings[0].controllability))));
    }
  }
  if (o.pass) o.detail = "99->UNKNOWN, 100->UNCONTROLLED, multi-signature->CONTROLLED";
  return o;
}

Outcome WhitelistReduction() {
  Outcome o;
  const fs::path dir = ScratchDir("whitelist");
  AnalysisCriteria criteria;
  size_t listed_total = 0;
  size_t expected_residuals = 0;
  for (const GadgetFixture& g : BuiltinGadgets()) {
    const std::string tag = "g" + std::to_string(g.id);
    Corpus corpus;
    corpus.Add(g.trigger, DiscoveryReason::kSeed);
    corpus.Add(g.safe, DiscoveryReason::kSeed);
    FuzzConfig fc;
    fc.seed = 99;
    fc.max_runs = 3000;
    FuzzOutputs out;
    out.trace_path = (dir / (tag + ".jsonl")).string();
    FuzzSession s = FuzzLoop(g.program, corpus, fc, SpecConfig{}, out);
    TraceReadResult trace = ReadTraceFile(out.trace_path);
    auto findings = Aggregate(trace.records, criteria.identity);
    Classify(findings, criteria);
    BranchCounts counts;
    for (const auto& [id, n] : s.branch_stats.Snapshot()) counts[ToLocation(g.program, id)] = n;
    const Whitelist w = BuildWhitelist(findings, counts, criteria);
    listed_total += w.branches.size();

    const size_t total = AllBranches(g.program).size();
    const Program hardened = FencePass(g.program, w).program;
    if (CountFencedBranches(hardened) != total - w.branches.size()) {
      o.Fail(tag + ": fenced " + std::to_string(CountFencedBranches(hardened)) + " of " + std::to_string(total) +
             " with " + std::to_string(w.branches.size()) + " listed");
    }
    std::vector<std::vector<uint8_t>> inputs;
    for (const auto& e : corpus.entries()) inputs.push_back(e.data);
    for (const CodeLocation& b : w.branches) {
      const bool expected = std::any_of(findings.begin(), findings.end(), [&](const AggregatedFinding& f) {
        return std::any_of(f.sequences.begin(), f.sequences.end(),
                           [&](const BranchSequence& seq) { return std::count(seq.begin(), seq.end(), b) > 0; });
      });
      const bool residual = !VerifyHardening(hardened, inputs, SpecConfig{}, {b}).empty();
      if (expected && !residual) o.Fail(tag + ": no residual exposure at whitelisted " + b.ToString());
      expected_residuals += expected;
    }
  }
  if (expected_residuals == 0) o.Fail("no whitelisted branch carries a benign finding");
  if (o.pass) {
    o.detail = std::to_string(listed_total) + " branches listed, " + std::to_string(expected_residuals) +
               " with confirmed residual exposure";
  }
  return o;
}

Outcome Determinism() {
  Outcome o;
  const fs::path dir = ScratchDir("determinism");
  const GadgetFixture& g = BuiltinGadget(1);
  std::string traces[2];
  for (int i = 0; i < 2; ++i) {
    Corpus corpus;
    corpus.Add(g.safe, DiscoveryReason::kSeed);
    FuzzConfig fc;
    fc.seed = 7;
    fc.max_runs = 5000;
    FuzzOutputs out;
    out.trace_path = (dir / ("t" + std::to_string(i) + ".jsonl")).string();
    FuzzLoop(g.program, corpus, fc, SpecConfig{}, out);
    traces[i] = Slurp(out.trace_path);
  }
  if (traces[0].empty()) o.Fail("empty trace");
  if (traces[0] != traces[1]) o.Fail("traces differ");
  if (o.pass) o.detail = std::to_string(traces[0].size()) + " bytes identical";
  return o;
}

}  // namespace
}  // namespace svm

int main() {
  struct Criterion {
    const char* name;
    std::function<svm::Outcome()> check;
  };
  const Criterion criteria[] = {
      {"gadget-detection", svm::GadgetDetection},
      {"hardening", svm::Hardening},
      {"oracle-equivalence", svm::OracleEquivalence},
      {"exposure-transparency", svm::ExposureTransparency},
      {"window-fidelity", svm::WindowFidelity},
      {"prioritized-schedule", svm::PrioritizedSchedule},
      {"coverage-purity", svm::CoveragePurity},
      {"classification-thresholds", svm::ClassificationThresholds},
      {"whitelist-reduction", svm::WhitelistReduction},
      {"determinism", svm::Determinism},
  };
  int failed = 0;
  int n = 0;
  for (const Criterion& c : criteria) {
    svm::Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.Fail(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", ++n, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
