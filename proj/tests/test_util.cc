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

#include "test_util.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "svm/assembler.h"

namespace svm::testing {
namespace {

uint64_t Pick(std::mt19937_64& rng, uint64_t n) { return rng() % n; }

std::string Reg(std::mt19937_64& rng) { return "r" + std::to_string(3 + Pick(rng, 6)); }

const char* const kAlu[] = {"add", "sub", "and", "or", "xor", "shl", "shr", "mul"};
const char* const kConds[] = {"eq", "ne", "lt", "le", "gt", "ge"};

class Generator {
 public:
  Generator(std::mt19937_64& rng, const RandomProgramOptions& opts) : rng_(rng), opts_(opts) {}

  std::string Build() {
    const bool helper = Pick(rng_, 2) == 0;
    std::ostringstream fn_main;
    fn_main << "fn main:\nb0:\n";
    Emit(fn_main, "alloc r1, " + std::to_string(8 << Pick(rng_, 5)));
    Emit(fn_main, "alloc r2, " + std::to_string(8 << Pick(rng_, 5)));
    Emit(fn_main, "input r3, " + std::to_string(Pick(rng_, opts_.max_input)));
    Emit(fn_main, "input r4, " + std::to_string(Pick(rng_, opts_.max_input)));

    std::string helper_text;
    if (helper) helper_text = Helper();

    const size_t budget = opts_.max_instructions;
    const size_t blocks = 2 + Pick(rng_, 5);
    for (size_t b = 0; b < blocks; ++b) {
      if (b > 0) fn_main << "b" << b << ":\n";
      const size_t body = Pick(rng_, 3);
      for (size_t i = 0; i < body && count_ + 6 < budget; ++i) Body(fn_main, helper);
      if (b + 1 == blocks || count_ + 3 >= budget) {
        Emit(fn_main, "halt");
        // Blocks referenced by earlier terminators must still exist.
        for (size_t rest = b + 1; rest < blocks; ++rest) {
          fn_main << "b" << rest << ":\n";
          Emit(fn_main, "halt");
        }
        break;
      }
      Terminator(fn_main, b, blocks);
    }
    return fn_main.str() + helper_text;
  }

 private:
  void Emit(std::ostringstream& out, const std::string& inst) {
    out << "  " << inst << "\n";
    ++count_;
  }

  std::string Target(size_t from, size_t blocks) { return "b" + std::to_string(from + 1 + Pick(rng_, blocks - from - 1)); }

  void Memory(std::ostringstream& out) {
    static const uint64_t kMasks[] = {7, 15, 31, 63, 127, 255};
    const std::string base = Pick(rng_, 2) == 0 ? "r1" : "r2";
    Emit(out, "and r9, " + Reg(rng_) + ", " + std::to_string(kMasks[Pick(rng_, 6)]));
    Emit(out, "add r9, " + base + ", r9");
    if (Pick(rng_, 3) == 0) {
      Emit(out, "store r9, 0, " + Reg(rng_));
    } else {
      Emit(out, "load " + Reg(rng_) + ", r9, 0");
    }
  }

  void Body(std::ostringstream& out, bool helper) {
    switch (Pick(rng_, helper ? 7 : 6)) {
      case 0:
      case 1:
        Memory(out);
        break;
      case 2: {
        const std::string b = Pick(rng_, 2) == 0 ? Reg(rng_) : std::to_string(Pick(rng_, 64));
        Emit(out, std::string(kAlu[Pick(rng_, 8)]) + " " + Reg(rng_) + ", " + Reg(rng_) + ", " + b);
        break;
      }
      case 3:
        Emit(out, "input " + Reg(rng_) + ", " + std::to_string(Pick(rng_, opts_.max_input)));
        break;
      case 4:
        Emit(out, "const " + Reg(rng_) + ", " + std::to_string(Pick(rng_, 300)));
        break;
      case 5:
        if (Pick(rng_, 4) == 0) {
          Emit(out, "div " + Reg(rng_) + ", " + Reg(rng_) + ", " + Reg(rng_));
        } else {
          Emit(out, "cmp " + Reg(rng_) + ", " + std::to_string(Pick(rng_, 64)));
          Emit(out, "setcc " + Reg(rng_) + ", " + kConds[Pick(rng_, 6)]);
        }
        break;
      default:
        Emit(out, "call helper");
        break;
    }
  }

  void Terminator(std::ostringstream& out, size_t b, size_t blocks) {
    const uint64_t kind = Pick(rng_, 8);
    if (kind < 6) {
      const std::string rhs = Pick(rng_, 2) == 0 ? Reg(rng_) : std::to_string(Pick(rng_, 128));
      Emit(out, "cmp " + Reg(rng_) + ", " + rhs);
      out << "  br " << kConds[Pick(rng_, 6)] << ", " << Target(b, blocks) << ", " << Target(b, blocks) << "\n";
      ++count_;
    } else if (kind == 6) {
      Emit(out, "jmp " + Target(b, blocks));
    } else {
      Emit(out, "and r10, " + Reg(rng_) + ", " + std::to_string(1 + Pick(rng_, 3)));
      Emit(out, "jtab r10, " + Target(b, blocks) + ", " + Target(b, blocks));
    }
  }

  std::string Helper() {
    std::ostringstream out;
    out << "\nfn helper:\nh0:\n";
    Memory(out);
    Emit(out, "cmp " + Reg(rng_) + ", " + std::to_string(Pick(rng_, 128)));
    out << "  br " << kConds[Pick(rng_, 6)] << ", h1, h2\n";
    ++count_;
    out << "h1:\n";
    Memory(out);
    Emit(out, "ret");
    out << "h2:\n";
    Emit(out, "ret");
    return out.str();
  }

  std::mt19937_64& rng_;
  const RandomProgramOptions& opts_;
  size_t count_ = 0;
};

}  // namespace

Program MustParse(std::string_view text) {
  ParseResult r = ParseProgram(text);
  if (!r.ok()) {
    std::fprintf(stderr, "MustParse failed:\n");
    for (const auto& d : r.diagnostics) std::fprintf(stderr, "  %s\n", d.ToString().c_str());
    std::fprintf(stderr, "%.*s\n", static_cast<int>(text.size()), text.data());
    std::abort();
  }
  return std::move(r.program);
}

std::string RandomProgramText(std::mt19937_64& rng, const RandomProgramOptions& opts) {
  while (true) {
    std::string text = Generator(rng, opts).Build();
    if (MustParse(text).InstructionCount() <= opts.max_instructions) return text;
  }
}

std::vector<uint8_t> RandomInput(std::mt19937_64& rng, size_t max_len) {
  std::vector<uint8_t> in(Pick(rng, max_len + 1));
  for (auto& b : in) b = static_cast<uint8_t>(rng());
  return in;
}

std::string WindowProgramText(uint64_t distance, uint64_t block_len) {
  std::ostringstream out;
  out << "fn main:\nstart:\n  alloc r1, 64\n  input r2, 0\n  cmp r2, 0\n  br eq, done, s0\n";
  uint64_t left = distance;
  for (int b = 0;; ++b) {
    out << "s" << b << ":\n";
    if (left <= block_len) {
      for (uint64_t i = 2; i < left; ++i) out << "  add r3, r3, 1\n";
      out << "  load r4, r1, 64\n  halt\n";
      break;
    }
    // Keep at least two instructions for the final block.
    const uint64_t len = std::min(block_len, left - 2);
    for (uint64_t i = 1; i < len; ++i) out << "  add r3, r3, 1\n";
    out << "  jmp s" << b + 1 << "\n";
    left -= len;
  }
  out << "done:\n  halt\n";
  return out.str();
}

std::string SpeculativeOnlyProgramText() {
  return "fn main:\n"
         "start:\n"
         "  input r1, 0\n"
         "  alloc r2, 64\n"
         "  cmp r1, r1\n"
         "  br eq, done, x\n"
         "x:\n"
         "  cmp r1, 5\n"
         "  br lt, x1, x2\n"
         "x1:\n"
         "  load r3, r2, 64\n"
         "  halt\n"
         "x2:\n"
         "  halt\n"
         "done:\n"
         "  halt\n";
}

std::set<ViolationTuple> EngineViolations(const Program& p, std::span<const uint8_t> input, uint32_t max_order,
                                          uint64_t window, uint64_t stride) {
  SpecConfig cfg;
  cfg.max_order = max_order;
  cfg.window = window;
  cfg.stride = stride;
  cfg.prioritized = false;
  Engine engine(p, cfg);
  std::set<ViolationTuple> out;
  for (const auto& v : engine.Run(input, nullptr).trace.violations) {
    out.insert({v.offending, v.branches, v.kind,
                IdentityOf(v.kind, v.access.referent, v.addr, v.code_fault, IdentityMode::kOffset)});
  }
  return out;
}

std::set<ViolationTuple> OracleViolations(const Program& p, std::span<const uint8_t> input, uint32_t max_order,
                                          uint64_t window, uint64_t stride) {
  OracleConfig cfg;
  cfg.max_order = max_order;
  cfg.window = window;
  cfg.stride = stride;
  std::set<ViolationTuple> out;
  for (const auto& v : EnumeratePaths(p, input, cfg).violations) {
    out.insert({v.offending, v.branches, v.kind, v.identity});
  }
  return out;
}

std::string Describe(const Program& p, const std::set<ViolationTuple>& v) {
  std::ostringstream out;
  for (const auto& [at, branches, kind, identity] : v) {
    out << ViolationKindName(kind) << " " << ToLocation(p, at).ToString() << " " << identity << " via";
    for (const auto& b : branches) out << " " << ToLocation(p, b).ToString();
    out << "\n";
  }
  return out.str();
}

}  // namespace svm::testing
