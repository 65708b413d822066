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

// svm: assemble, expose, fuzz, analyze and harden SpecVM programs.
//
// Exit codes: 0 success, 1 usage/config/input error, 2 architectural crash
// (run), 3 violations found with --strict (run, verify).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "svm/analyze.h"
#include "svm/assembler.h"
#include "svm/engine.h"
#include "svm/fixtures.h"
#include "svm/fuzz.h"
#include "svm/harden.h"
#include "svm/oracle.h"
#include "svm/session_config.h"
#include "svm/trace_io.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using svm::Bytes;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCrash = 2;
constexpr int kExitViolations = 3;

// Raised for any failure that should end the command with a diagnostic.
struct CliError {
  int code;
  std::string tag;
  std::string detail;
};

[[noreturn]] void Fail(const std::string& tag, const std::string& detail, int code = kExitUsage) {
  throw CliError{code, tag, detail};
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail("IO-ERROR", "cannot read '" + path + "'");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Bytes ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail("IO-ERROR", "cannot read '" + path + "'");
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) Fail("IO-ERROR", "cannot write '" + path + "'");
}

Bytes ParseHexInput(const std::string& text) {
  Bytes out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(tok.c_str(), &end, 16);
    if (*end != '\0' || v > 0xff) Fail("BAD-INPUT", "bad hex byte '" + tok + "'");
    out.push_back(static_cast<uint8_t>(v));
  }
  return out;
}

svm::Program LoadProgram(const std::string& path) {
  svm::ParseResult r = svm::ParseProgram(ReadText(path));
  if (!r.ok()) {
    const auto& d = r.diagnostics.front();
    std::string more;
    for (size_t i = 1; i < r.diagnostics.size(); ++i) more += "\n  " + r.diagnostics[i].ToString();
    Fail("ASM-ERROR", path + ":" + std::to_string(d.line) + ": " + d.message + more);
  }
  return std::move(r.program);
}

// Config flags shared by every subcommand. Values given on the command line
// are applied after the config file.
class Settings {
 public:
  void Attach(CLI::App* app, bool spec_flags) {
    app->add_option("--config", config_path_, "key=value config file");
    if (!spec_flags) return;
    Add(app, "--window", "window", "speculation window in instructions");
    Add(app, "--stride", "stride", "long-block accounting stride");
    Add(app, "--max-order", "max_order", "maximum nested mispredictions");
    Add(app, "--order-base", "order_base", "base of the prioritized order schedule");
    Add(app, "--identity", "identity", "violation identity: offset or raw");
    no_spec_ = app->add_flag("--no-spec", "disable speculation exposure");
  }

  void Add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = values_[key];
    options_.push_back({key, app->add_option(flag, slot, help)});
  }

  svm::SessionConfig Resolve() const {
    svm::SessionConfig cfg;
    if (!config_path_.empty()) {
      for (const auto& d : cfg.Apply(ReadText(config_path_))) {
        Fail("CONFIG-ERROR", config_path_ + ":" + std::to_string(d.line) + ": " + d.message);
      }
    }
    for (const auto& [key, opt] : options_) {
      if (opt->count() == 0) continue;
      if (std::string err = cfg.Set(key, values_.at(key)); !err.empty()) Fail("CONFIG-ERROR", key + ": " + err);
    }
    if (no_spec_ != nullptr && no_spec_->count() > 0) cfg.spec.enabled = false;
    if (std::string err = cfg.Check(); !err.empty()) Fail("CONFIG-ERROR", err);
    return cfg;
  }

 private:
  std::string config_path_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
  CLI::Option* no_spec_ = nullptr;
};

std::string DescribeRecord(const svm::TraceRecord& r) {
  std::ostringstream out;
  out << svm::ViolationKindName(r.kind) << " " << r.offending.ToString() << " addr=" << svm::HexString(r.addr);
  if (r.kind == svm::ViolationKind::kDataOob) out << " class=" << svm::AccessKindName(r.access);
  if (r.referent) {
    out << " referent=" << svm::HexString(r.referent->base) << "/" << r.referent->size << " offset=" << r.referent->offset;
  }
  if (r.kind == svm::ViolationKind::kCodePtr) out << " detail=" << svm::FaultName(r.code_fault);
  out << " order=" << r.order() << " via";
  for (const auto& b : r.branches) out << " " << b.ToString();
  return out.str();
}

struct InputOptions {
  std::string path;
  std::string hex;

  void Attach(CLI::App* app) {
    app->add_option("--input", path, "input file");
    app->add_option("--input-hex", hex, "input as hex bytes, e.g. \"10 00\"");
  }
  Bytes Load() const {
    if (!path.empty() && !hex.empty()) Fail("USAGE", "use either --input or --input-hex");
    if (!path.empty()) return ReadBytes(path);
    return ParseHexInput(hex);
  }
};

// ---------------------------------------------------------------------------

int CmdAsm(const std::string& file, const std::string& out) {
  svm::Program p = LoadProgram(file);
  const std::string text = svm::EmitText(p);
  if (out.empty()) {
    std::cout << text;
  } else {
    WriteText(out, text);
  }
  return kExitOk;
}

int CmdRun(const std::string& file, const InputOptions& input, const svm::SessionConfig& base, bool strict,
           bool print_layout, const std::string& trace_path) {
  svm::MemoryLayout layout;
  if (print_layout) std::cout << layout.Describe();
  if (file.empty()) {
    if (print_layout) return kExitOk;
    Fail("USAGE", "run needs a program file");
  }
  svm::Program p = LoadProgram(file);
  svm::SessionConfig cfg = base;
  // A single run has no execution history, so every tree gets the full cap.
  cfg.spec.prioritized = false;
  const Bytes data = input.Load();
  const std::string id = svm::InputId(data);
  svm::Engine engine(p, cfg.spec, layout);
  svm::ExposureResult r = engine.Run(data, nullptr, id, 1);

  std::ofstream trace;
  if (!trace_path.empty()) {
    trace.open(trace_path, std::ios::trunc);
    if (!trace) Fail("IO-ERROR", "cannot write '" + trace_path + "'");
    trace << svm::HeaderLine(cfg.ToJson()) << "\n";
  }
  for (const auto& v : r.trace.violations) {
    svm::TraceRecord rec = svm::ToTraceRecord(p, v);
    std::cout << DescribeRecord(rec) << "\n";
    if (trace.is_open()) trace << svm::RecordToJson(rec).dump() << "\n";
  }
  std::cout << "violations: " << r.trace.violations.size() << "  arch steps: " << r.trace.arch_steps
            << "  spec steps: " << r.trace.spec_steps << "  trees: " << r.trace.trees << "\n";
  if (r.arch.faulted()) {
    std::ostringstream at;
    at << svm::FaultName(r.arch.fault) << " at " << svm::ToLocation(p, r.arch.fault_at).ToString();
    Fail("ARCH-CRASH", at.str(), kExitCrash);
  }
  if (strict && !r.trace.violations.empty()) {
    Fail("VIOLATIONS-FOUND", std::to_string(r.trace.violations.size()) + " violation(s)", kExitViolations);
  }
  return kExitOk;
}

int CmdFuzz(const std::string& file, svm::SessionConfig cfg, const std::string& corpus_dir,
            const std::string& trace_path, std::string session_path, std::string crash_dir,
            const std::vector<std::string>& seed_files, const CLI::Option* seed_opt) {
  if (seed_opt->count() == 0) {
    if (const char* env = std::getenv("SVM_SEED")) {
      if (std::string err = cfg.Set("seed", env); !err.empty()) Fail("CONFIG-ERROR", "SVM_SEED: " + err);
    }
  }
  svm::Program p = LoadProgram(file);
  svm::Corpus corpus = svm::Corpus::Load(corpus_dir);
  for (const auto& f : seed_files) corpus.Add(ReadBytes(f), svm::DiscoveryReason::kSeed);
  if (corpus.empty()) corpus.Add({}, svm::DiscoveryReason::kSeed);

  svm::FuzzOutputs out;
  out.trace_path = trace_path;
  if (session_path.empty()) {
    session_path = (fs::path(trace_path).parent_path() / "session.json").string();
  }
  if (crash_dir.empty()) {
    crash_dir = (fs::path(corpus_dir).lexically_normal().parent_path() / "crashes").string();
  }
  out.session_path = session_path;
  out.crash_dir = crash_dir;
  out.config = cfg.ToJson();

  svm::FuzzSession s = svm::FuzzLoop(p, corpus, cfg.fuzz, cfg.spec, out);
  const svm::FuzzStats& st = s.stats;
  std::cout << "runs: " << st.runs << "  runs/sec: " << static_cast<uint64_t>(st.runs_per_sec())
            << "  corpus: " << st.corpus_size << "  edges: " << st.edges << "  keys: " << st.keys
            << "  records: " << st.records << "  crashes: " << st.crashes << "\n";
  return kExitOk;
}

int CmdAnalyze(const std::vector<std::string>& traces, const svm::SessionConfig& cfg, const std::string& json_out,
               std::string text_out, const std::string& whitelist_out, std::string session_path) {
  std::vector<svm::TraceRecord> records;
  bool partial = false;
  for (const auto& t : traces) {
    svm::TraceReadResult r = svm::ReadTraceFile(t);
    for (const auto& d : r.diagnostics) {
      std::cerr << "svm: TRACE-ERROR: " << t << ":" << d.line << ": " << d.message << "\n";
      partial = true;
    }
    records.insert(records.end(), std::make_move_iterator(r.records.begin()),
                   std::make_move_iterator(r.records.end()));
  }
  if (session_path.empty() && !traces.empty()) {
    fs::path guess = fs::path(traces.front()).parent_path() / "session.json";
    if (fs::exists(guess)) session_path = guess.string();
  }
  svm::BranchCounts counts;
  if (!session_path.empty()) {
    nlohmann::json session = nlohmann::json::parse(ReadText(session_path), nullptr, false);
    std::string err;
    auto parsed = session.is_discarded() ? std::nullopt : svm::BranchCountsFromSession(session, &err);
    if (!parsed) Fail("SESSION-ERROR", session_path + ": " + (err.empty() ? "malformed JSON" : err));
    counts = std::move(*parsed);
  }

  std::vector<svm::AggregatedFinding> findings = svm::Aggregate(records, cfg.criteria.identity);
  svm::Classify(findings, cfg.criteria);
  svm::Whitelist wl = svm::BuildWhitelist(findings, counts, cfg.criteria);
  svm::Report report = svm::RenderReport(findings, counts, &wl, cfg.ToJson());

  if (!json_out.empty()) {
    WriteText(json_out, report.json.dump(2) + "\n");
    if (text_out.empty()) text_out = (fs::path(json_out).replace_extension(".txt")).string();
  }
  if (!text_out.empty()) WriteText(text_out, report.text);
  if (json_out.empty() && text_out.empty()) std::cout << report.text;
  if (!whitelist_out.empty()) WriteText(whitelist_out, svm::FormatWhitelist(wl));
  std::cout << "records: " << records.size() << "  findings: " << findings.size()
            << "  whitelisted branches: " << wl.branches.size() << "\n";
  if (partial) Fail("PARTIAL-INPUT", "some trace lines were malformed and skipped");
  return kExitOk;
}

svm::Whitelist LoadWhitelist(const std::string& path) {
  if (path.empty()) return {};
  svm::WhitelistParse w = svm::ParseWhitelist(ReadText(path));
  if (!w.diagnostics.empty()) {
    Fail("WHITELIST-ERROR", path + ":" + std::to_string(w.diagnostics.front().line) + ": " +
                                w.diagnostics.front().message);
  }
  return w.whitelist;
}

int CmdHarden(const std::string& file, const svm::SessionConfig& cfg, const std::string& whitelist_path,
              const std::string& out) {
  svm::Program p = LoadProgram(file);
  svm::HardenConfig hc;
  hc.mode = cfg.mode;
  hc.whitelist = LoadWhitelist(whitelist_path);
  svm::HardenResult r;
  try {
    r = svm::Harden(p, hc);
  } catch (const svm::HardenError& e) {
    const std::string what = e.what();
    const size_t colon = what.find(':');
    Fail(what.substr(0, colon), colon == std::string::npos ? what : what.substr(colon + 2));
  }
  ordered_json summary{{"mode", std::string(svm::HardenModeName(hc.mode))},
                       {"branches_total", r.summary.branches_total},
                       {"instrumented", r.summary.instrumented},
                       {"whitelisted", r.summary.whitelisted}};
  std::ostringstream text;
  text << "; svm " << svm::kToolVersion << " harden " << summary.dump() << "\n";
  if (!whitelist_path.empty()) text << "; whitelist: " << whitelist_path << "\n";
  text << svm::EmitText(r.program);
  if (out.empty()) {
    std::cout << text.str();
    std::cerr << summary.dump() << "\n";
  } else {
    WriteText(out, text.str());
    std::cout << summary.dump() << "\n";
  }
  return kExitOk;
}

int CmdOracle(const std::string& file, const InputOptions& input, const svm::SessionConfig& cfg) {
  svm::Program p = LoadProgram(file);
  svm::OracleConfig oc;
  oc.max_order = cfg.spec.max_order;
  oc.window = cfg.spec.window;
  oc.stride = cfg.spec.stride;
  oc.identity = cfg.spec.identity;
  try {
    std::cout << svm::FormatOracleResult(p, svm::EnumeratePaths(p, input.Load(), oc));
  } catch (const svm::EnumerationTooLarge& e) {
    Fail("ENUMERATION-TOO-LARGE", e.what());
  }
  return kExitOk;
}

int CmdGadgetsList() {
  for (const auto& g : svm::BuiltinGadgets()) {
    std::cout << g.id << "\t" << g.name << "\t" << g.expected.offending.ToString() << "\t"
              << svm::ViolationKindName(g.expected.kind) << "\torder " << g.expected.min_order << "\n";
  }
  return kExitOk;
}

int CmdGadgetsEmit(int id, const std::string& out) {
  const svm::GadgetFixture* g = nullptr;
  try {
    g = &svm::BuiltinGadget(id);
  } catch (const svm::UnknownGadget& e) {
    Fail("UNKNOWN-GADGET", "no builtin gadget with id " + std::to_string(id));
  }
  if (out.empty()) {
    std::cout << g->source;
  } else {
    WriteText(out, g->source);
  }
  return kExitOk;
}

int CmdVerify(const std::string& file, const svm::SessionConfig& base, const std::string& corpus_dir,
              const InputOptions& input, const std::string& whitelist_path, bool strict) {
  svm::Program p = LoadProgram(file);
  std::vector<Bytes> inputs;
  if (!corpus_dir.empty()) {
    for (const auto& e : svm::Corpus::Load(corpus_dir).entries()) inputs.push_back(e.data);
  }
  if (!input.path.empty() || !input.hex.empty()) inputs.push_back(input.Load());
  if (inputs.empty()) Fail("USAGE", "verify needs --corpus or --input");
  const svm::Whitelist wl = LoadWhitelist(whitelist_path);
  std::set<svm::CodeLocation> branches;
  for (const auto& id : svm::AllBranches(p)) {
    svm::CodeLocation loc = svm::ToLocation(p, id);
    bool listed = false;
    for (const auto& w : wl.branches) listed |= (w.fn == loc.fn && w.block == loc.block);
    if (!listed) branches.insert(loc);
  }
  std::vector<svm::TraceRecord> residual = svm::VerifyHardening(p, inputs, base.spec, branches);
  for (const auto& r : residual) std::cout << DescribeRecord(r) << "\n";
  std::cout << "inputs: " << inputs.size() << "  checked branches: " << branches.size()
            << "  residual violations: " << residual.size() << "\n";
  if (strict && !residual.empty()) {
    Fail("VIOLATIONS-FOUND", std::to_string(residual.size()) + " residual violation(s)", kExitViolations);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SpecVM speculative-execution exposure toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(svm::kToolVersion));

  std::string file, out;
  InputOptions input;
  bool strict = false;

  auto* asm_cmd = app.add_subcommand("asm", "assemble and print the canonical program text");
  asm_cmd->add_option("file", file, "program (.sasm)")->required();
  asm_cmd->add_option("-o,--output", out, "output file");

  Settings run_settings;
  bool print_layout = false;
  std::string run_trace;
  auto* run_cmd = app.add_subcommand("run", "run one input with speculation exposure");
  run_cmd->add_option("file", file, "program (.sasm)");
  input.Attach(run_cmd);
  run_cmd->add_flag("--strict", strict, "exit 3 when violations are found");
  run_cmd->add_flag("--print-layout", print_layout, "print the memory layout");
  run_cmd->add_option("--trace", run_trace, "write violations as JSONL");
  run_settings.Attach(run_cmd, true);

  Settings fuzz_settings;
  std::string corpus_dir = "corpus", trace_path = "trace.jsonl", session_path, crash_dir;
  std::vector<std::string> seed_files;
  auto* fuzz_cmd = app.add_subcommand("fuzz", "coverage-guided fuzzing with exposure");
  fuzz_cmd->add_option("file", file, "program (.sasm)")->required();
  fuzz_settings.Attach(fuzz_cmd, true);
  fuzz_settings.Add(fuzz_cmd, "--runs", "runs", "mutated runs");
  CLI::Option* seed_opt = nullptr;
  fuzz_settings.Add(fuzz_cmd, "--seed", "seed", "rng seed (falls back to SVM_SEED)");
  fuzz_settings.Add(fuzz_cmd, "--max-len", "max_len", "maximum input length");
  fuzz_settings.Add(fuzz_cmd, "--workers", "workers", "worker threads");
  seed_opt = fuzz_cmd->get_option("--seed");
  fuzz_cmd->add_option("--corpus", corpus_dir, "corpus directory");
  fuzz_cmd->add_option("--trace", trace_path, "trace output (JSONL)");
  fuzz_cmd->add_option("--session", session_path, "session summary (default: session.json next to trace)");
  fuzz_cmd->add_option("--crashes", crash_dir, "crash directory (default: crashes/ next to corpus)");
  fuzz_cmd->add_option("--seed-input", seed_files, "extra seed input files");

  Settings analyze_settings;
  std::vector<std::string> traces;
  std::string report_text, whitelist_out, analyze_session;
  auto* analyze_cmd = app.add_subcommand("analyze", "aggregate traces, classify, build a whitelist");
  analyze_cmd->add_option("traces", traces, "trace files")->required();
  analyze_cmd->add_option("-o,--output", out, "report.json path");
  analyze_cmd->add_option("--text", report_text, "report.txt path (default: next to report.json)");
  analyze_cmd->add_option("--whitelist", whitelist_out, "whitelist output");
  analyze_cmd->add_option("--session", analyze_session, "session.json with branch counts");
  analyze_settings.Attach(analyze_cmd, false);
  analyze_settings.Add(analyze_cmd, "--identity", "identity", "violation identity: offset or raw");
  analyze_settings.Add(analyze_cmd, "--min-branch-executions", "min_branch_executions", "whitelist threshold");
  analyze_settings.Add(analyze_cmd, "--min-vuln-triggers", "min_vuln_triggers", "classification threshold");
  analyze_settings.Add(analyze_cmd, "--uncontrolled-is-benign", "uncontrolled_is_benign", "true or false");

  Settings harden_settings;
  std::string whitelist_in;
  auto* harden_cmd = app.add_subcommand("harden", "insert fences or SLH masking");
  harden_cmd->add_option("file", file, "program (.sasm)")->required();
  harden_cmd->add_option("--whitelist", whitelist_in, "branches to leave unhardened");
  harden_cmd->add_option("-o,--output", out, "output program");
  harden_settings.Attach(harden_cmd, false);
  harden_settings.Add(harden_cmd, "--mode", "mode", "fence or slh");

  Settings oracle_settings;
  auto* oracle_cmd = app.add_subcommand("oracle", "enumerate speculative paths by re-execution");
  oracle_cmd->add_option("file", file, "program (.sasm)")->required();
  input.Attach(oracle_cmd);
  oracle_settings.Attach(oracle_cmd, true);

  auto* gadgets_cmd = app.add_subcommand("gadgets", "builtin gadget corpus");
  gadgets_cmd->require_subcommand(1);
  auto* list_cmd = gadgets_cmd->add_subcommand("list", "list builtin gadgets");
  int gadget_id = 0;
  auto* emit_cmd = gadgets_cmd->add_subcommand("emit", "print a gadget's source");
  emit_cmd->add_option("id", gadget_id, "gadget id")->required();
  emit_cmd->add_option("-o,--output", out, "output file");

  Settings verify_settings;
  std::string verify_corpus;
  auto* verify_cmd = app.add_subcommand("verify", "replay inputs and report violations through unwhitelisted branches");
  verify_cmd->add_option("file", file, "program (.sasm)")->required();
  verify_cmd->add_option("--corpus", verify_corpus, "corpus directory to replay");
  input.Attach(verify_cmd);
  verify_cmd->add_option("--whitelist", whitelist_in, "branches excluded from the check");
  verify_cmd->add_flag("--strict", strict, "exit 3 when residual violations are found");
  verify_settings.Attach(verify_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "svm: USAGE: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*asm_cmd) return CmdAsm(file, out);
    if (*run_cmd) return CmdRun(file, input, run_settings.Resolve(), strict, print_layout, run_trace);
    if (*fuzz_cmd) {
      return CmdFuzz(file, fuzz_settings.Resolve(), corpus_dir, trace_path, session_path, crash_dir, seed_files,
                     seed_opt);
    }
    if (*analyze_cmd) {
      return CmdAnalyze(traces, analyze_settings.Resolve(), out, report_text, whitelist_out, analyze_session);
    }
    if (*harden_cmd) return CmdHarden(file, harden_settings.Resolve(), whitelist_in, out);
    if (*oracle_cmd) return CmdOracle(file, input, oracle_settings.Resolve());
    if (*list_cmd) return CmdGadgetsList();
    if (*emit_cmd) return CmdGadgetsEmit(gadget_id, out);
    if (*verify_cmd) {
      return CmdVerify(file, verify_settings.Resolve(), verify_corpus, input, whitelist_in, strict);
    }
  } catch (const CliError& e) {
    // First line is the machine-parsable diagnostic.
    const size_t nl = e.detail.find('\n');
    std::cerr << "svm: " << e.tag << ": " << e.detail.substr(0, nl) << "\n";
    if (nl != std::string::npos) std::cerr << e.detail.substr(nl + 1) << "\n";
    return e.code;
  } catch (const svm::FuzzIoError& e) {
    std::cerr << "svm: " << e.what() << "\n";
    return kExitUsage;
  } catch (const svm::EngineError& e) {
    std::cerr << "svm: ENGINE-ERROR: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
