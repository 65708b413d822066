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

#include "svm/assembler.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace svm {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool IsIdentifier(std::string_view s) {
  if (s.empty()) return false;
  const auto first = static_cast<unsigned char>(s.front());
  if (!std::isalpha(first) && first != '_' && first != '.') return false;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (!std::isalnum(u) && c != '_' && c != '.') return false;
  }
  return true;
}

// Strips a `;` comment that is not inside a string literal.
std::string_view StripComment(std::string_view line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == ';') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::vector<std::string_view> SplitOperands(std::string_view s) {
  std::vector<std::string_view> out;
  s = Trim(s);
  if (s.empty()) return out;
  size_t start = 0;
  while (true) {
    const size_t comma = s.find(',', start);
    out.push_back(Trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<uint64_t> ParseImmediate(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value, base);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Parses a data directive string literal body (between the quotes).
std::optional<std::vector<uint8_t>> ParseStringLiteral(std::string_view s) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') return std::nullopt;
  s = s.substr(1, s.size() - 2);
  std::vector<uint8_t> out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      if (s[i] == '"') return std::nullopt;
      out.push_back(static_cast<uint8_t>(s[i]));
      continue;
    }
    if (++i >= s.size()) return std::nullopt;
    switch (s[i]) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case '0': out.push_back(0); break;
      case '\\': out.push_back('\\'); break;
      case '"': out.push_back('"'); break;
      case 'x': {
        if (i + 2 >= s.size()) return std::nullopt;
        uint8_t byte = 0;
        auto [ptr, ec] = std::from_chars(s.data() + i + 1, s.data() + i + 3, byte, 16);
        if (ec != std::errc() || ptr != s.data() + i + 3) return std::nullopt;
        out.push_back(byte);
        i += 2;
        break;
      }
      default:
        return std::nullopt;
    }
  }
  return out;
}

class LineParser {
 public:
  LineParser(int line, std::vector<Diagnostic>& diags) : line_(line), diags_(diags) {}

  bool Fail(const std::string& message) {
    diags_.push_back({line_, message});
    return false;
  }

  bool Reg(std::string_view s, uint8_t& out) {
    if (s.size() < 2 || (s[0] != 'r' && s[0] != 'R')) return Fail("expected register, got '" + std::string(s) + "'");
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      return Fail("expected register, got '" + std::string(s) + "'");
    }
    if (value >= kNumRegisters) return Fail("register out of range '" + std::string(s) + "'");
    out = static_cast<uint8_t>(value);
    return true;
  }

  bool Imm(std::string_view s, uint64_t& out) {
    auto v = ParseImmediate(s);
    if (!v) return Fail("bad immediate '" + std::string(s) + "'");
    out = *v;
    return true;
  }

  // Register or immediate second source.
  bool Source(std::string_view s, Instruction& inst) {
    if (!s.empty() && (s[0] == 'r' || s[0] == 'R')) {
      inst.b_is_imm = false;
      return Reg(s, inst.rb);
    }
    inst.b_is_imm = true;
    return Imm(s, inst.imm);
  }

  bool Label(std::string_view s, Instruction& inst) {
    if (!IsIdentifier(s)) return Fail("bad label '" + std::string(s) + "'");
    inst.labels.emplace_back(s);
    return true;
  }

  bool Arity(const std::vector<std::string_view>& ops, size_t n, std::string_view mnemonic) {
    if (ops.size() == n) return true;
    return Fail("'" + std::string(mnemonic) + "' expects " + std::to_string(n) + " operands, got " +
                std::to_string(ops.size()));
  }

  std::optional<Instruction> Parse(std::string_view text) {
    const size_t space = text.find_first_of(" \t");
    const std::string_view mnemonic = text.substr(0, space);
    const auto ops = SplitOperands(space == std::string_view::npos ? std::string_view() : text.substr(space));
    auto op = OpcodeFromName(mnemonic);
    if (!op) {
      Fail("unknown opcode '" + std::string(mnemonic) + "'");
      return std::nullopt;
    }
    Instruction inst;
    inst.op = *op;
    inst.line = line_;
    bool ok = true;
    switch (*op) {
      case Opcode::kConst:
        ok = Arity(ops, 2, mnemonic) && Reg(ops[0], inst.rd) && Imm(ops[1], inst.imm);
        break;
      case Opcode::kMov:
        ok = Arity(ops, 2, mnemonic) && Reg(ops[0], inst.rd) && Reg(ops[1], inst.ra);
        break;
      case Opcode::kCmp:
        ok = Arity(ops, 2, mnemonic) && Reg(ops[0], inst.ra) && Source(ops[1], inst);
        break;
      case Opcode::kSetcc:
        ok = Arity(ops, 2, mnemonic) && Reg(ops[0], inst.rd) && CondOperand(ops[1], inst);
        break;
      case Opcode::kBr:
        ok = Arity(ops, 3, mnemonic) && CondOperand(ops[0], inst) && Label(ops[1], inst) &&
             Label(ops[2], inst);
        break;
      case Opcode::kJmp:
      case Opcode::kCall:
        ok = Arity(ops, 1, mnemonic) && Label(ops[0], inst);
        break;
      case Opcode::kJtab:
        if (ops.size() < 2) {
          ok = Fail("'jtab' expects a register and at least one label");
          break;
        }
        ok = Reg(ops[0], inst.ra);
        for (size_t i = 1; ok && i < ops.size(); ++i) ok = Label(ops[i], inst);
        break;
      case Opcode::kLoad:
        ok = Arity(ops, 3, mnemonic) && Reg(ops[0], inst.rd) && Reg(ops[1], inst.ra) &&
             Imm(ops[2], inst.imm);
        break;
      case Opcode::kStore:
        ok = Arity(ops, 3, mnemonic) && Reg(ops[0], inst.ra) && Imm(ops[1], inst.imm) &&
             Reg(ops[2], inst.rb);
        break;
      case Opcode::kAlloc:
        ok = Arity(ops, 2, mnemonic) && Reg(ops[0], inst.rd) && Source(ops[1], inst);
        break;
      case Opcode::kInput:
        ok = Arity(ops, 2, mnemonic) && Reg(ops[0], inst.rd) && Imm(ops[1], inst.imm);
        break;
      case Opcode::kInputLen:
        ok = Arity(ops, 1, mnemonic) && Reg(ops[0], inst.rd);
        break;
      case Opcode::kRet:
      case Opcode::kFence:
      case Opcode::kHalt:
        ok = Arity(ops, 0, mnemonic);
        break;
      default:  // binary ALU
        ok = Arity(ops, 3, mnemonic) && Reg(ops[0], inst.rd) && Reg(ops[1], inst.ra) &&
             Source(ops[2], inst);
        break;
    }
    if (!ok) return std::nullopt;
    return inst;
  }

 private:
  bool CondOperand(std::string_view s, Instruction& inst) {
    auto c = CondFromName(s);
    if (!c) return Fail("unknown condition '" + std::string(s) + "'");
    inst.cond = *c;
    return true;
  }

  int line_;
  std::vector<Diagnostic>& diags_;
};

std::string FormatImmediate(uint64_t v) {
  if (v < 0x10000) return std::to_string(v);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string RegName(uint8_t r) { return "r" + std::to_string(r); }

std::string SourceText(const Instruction& inst) {
  return inst.b_is_imm ? FormatImmediate(inst.imm) : RegName(inst.rb);
}

std::string EscapeData(const std::vector<uint8_t>& data) {
  std::string out = "\"";
  for (uint8_t byte : data) {
    if (byte >= 0x20 && byte < 0x7f && byte != '"' && byte != '\\') {
      out.push_back(static_cast<char>(byte));
    } else {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "\\x%02x", byte);
      out += buf;
    }
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string Diagnostic::ToString() const {
  if (line <= 0) return message;
  return "line " + std::to_string(line) + ": " + message;
}

ParseResult ParseProgram(std::string_view text) {
  ParseResult result;
  Program& program = result.program;
  std::optional<std::string> entry;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = Trim(StripComment(raw));
    if (line.empty()) continue;

    LineParser lp(line_no, result.diagnostics);
    if (line.starts_with("fn ") || line.starts_with("fn\t")) {
      std::string_view name = Trim(line.substr(3));
      if (name.empty() || name.back() != ':' || !IsIdentifier(Trim(name.substr(0, name.size() - 1)))) {
        lp.Fail("malformed function header");
        continue;
      }
      program.functions.push_back(Function{std::string(Trim(name.substr(0, name.size() - 1))), {}});
      continue;
    }
    if (line.back() == ':') {
      std::string_view label = Trim(line.substr(0, line.size() - 1));
      if (!IsIdentifier(label)) {
        lp.Fail("bad label '" + std::string(label) + "'");
        continue;
      }
      if (program.functions.empty()) {
        lp.Fail("label '" + std::string(label) + "' outside a function");
        continue;
      }
      Function& fn = program.functions.back();
      if (std::any_of(fn.blocks.begin(), fn.blocks.end(), [&](const BasicBlock& b) { return b.label == label; })) {
        lp.Fail("duplicate label '" + std::string(label) + "'");
        continue;
      }
      fn.blocks.push_back(BasicBlock{std::string(label), {}});
      continue;
    }
    if (line.starts_with("entry ")) {
      std::string_view name = Trim(line.substr(6));
      if (!IsIdentifier(name)) {
        lp.Fail("malformed entry directive");
      } else {
        entry = std::string(name);
      }
      continue;
    }
    if (line.starts_with("data ")) {
      auto bytes = ParseStringLiteral(Trim(line.substr(5)));
      if (!bytes) {
        lp.Fail("malformed data string");
      } else {
        program.data.insert(program.data.end(), bytes->begin(), bytes->end());
      }
      continue;
    }
    auto inst = lp.Parse(line);
    if (!inst) continue;
    if (program.functions.empty() || program.functions.back().blocks.empty()) {
      lp.Fail("instruction outside a block");
      continue;
    }
    program.functions.back().blocks.back().insts.push_back(std::move(*inst));
  }

  if (entry) {
    program.entry = *entry;
  } else if (!program.functions.empty()) {
    program.entry = program.functions.front().name;
  }
  if (!result.diagnostics.empty()) return result;

  Link(program);
  for (const auto& issue : Validate(program).issues) {
    int line = 0;
    if (issue.at) {
      if (const Instruction* inst = InstructionAt(program, *issue.at)) line = inst->line;
    }
    result.diagnostics.push_back({line, issue.message});
  }
  return result;
}

std::string EmitInstruction(const Instruction& inst) {
  std::string out(OpcodeName(inst.op));
  std::vector<std::string> ops;
  switch (inst.op) {
    case Opcode::kConst: ops = {RegName(inst.rd), FormatImmediate(inst.imm)}; break;
    case Opcode::kMov: ops = {RegName(inst.rd), RegName(inst.ra)}; break;
    case Opcode::kCmp: ops = {RegName(inst.ra), SourceText(inst)}; break;
    case Opcode::kSetcc: ops = {RegName(inst.rd), std::string(CondName(inst.cond))}; break;
    case Opcode::kBr: ops = {std::string(CondName(inst.cond))}; break;
    case Opcode::kJmp:
    case Opcode::kCall:
      break;
    case Opcode::kJtab: ops = {RegName(inst.ra)}; break;
    case Opcode::kLoad:
      ops = {RegName(inst.rd), RegName(inst.ra), FormatImmediate(inst.imm)};
      break;
    case Opcode::kStore:
      ops = {RegName(inst.ra), FormatImmediate(inst.imm), RegName(inst.rb)};
      break;
    case Opcode::kAlloc: ops = {RegName(inst.rd), SourceText(inst)}; break;
    case Opcode::kInput: ops = {RegName(inst.rd), FormatImmediate(inst.imm)}; break;
    case Opcode::kInputLen: ops = {RegName(inst.rd)}; break;
    case Opcode::kRet:
    case Opcode::kFence:
    case Opcode::kHalt:
      break;
    default:
      ops = {RegName(inst.rd), RegName(inst.ra), SourceText(inst)};
      break;
  }
  for (const auto& label : inst.labels) ops.push_back(label);
  for (size_t i = 0; i < ops.size(); ++i) {
    out += i == 0 ? " " : ", ";
    out += ops[i];
  }
  return out;
}

std::string EmitText(const Program& p) {
  std::ostringstream out;
  if (!p.functions.empty() && p.entry != p.functions.front().name) {
    out << "entry " << p.entry << "\n";
  }
  if (!p.data.empty()) out << "data " << EscapeData(p.data) << "\n";
  for (size_t fi = 0; fi < p.functions.size(); ++fi) {
    if (fi > 0) out << "\n";
    const Function& f = p.functions[fi];
    out << "fn " << f.name << ":\n";
    for (const auto& block : f.blocks) {
      out << block.label << ":\n";
      for (const auto& inst : block.insts) out << "  " << EmitInstruction(inst) << "\n";
    }
  }
  return out.str();
}

ValidationReport Validate(const Program& p) {
  ValidationReport report;
  auto issue = [&](std::optional<InstructionId> at, std::string message) {
    report.issues.push_back({at, std::move(message)});
  };

  if (!p.FindFunction(p.entry)) issue(std::nullopt, "entry function '" + p.entry + "' not found");
  std::set<std::string> fn_names;
  for (uint32_t fi = 0; fi < p.functions.size(); ++fi) {
    const Function& f = p.functions[fi];
    if (!fn_names.insert(f.name).second) issue(std::nullopt, "duplicate function '" + f.name + "'");
    if (f.blocks.empty()) issue(std::nullopt, "function '" + f.name + "' has no blocks");
    std::set<std::string> labels;
    for (uint32_t bi = 0; bi < f.blocks.size(); ++bi) {
      const BasicBlock& block = f.blocks[bi];
      if (!labels.insert(block.label).second) {
        issue(InstructionId{fi, bi, 0}, "duplicate label '" + block.label + "'");
      }
      if (block.insts.empty()) {
        issue(std::nullopt, "missing terminator in block '" + f.name + ":" + block.label + "'");
        continue;
      }
      const uint32_t n = static_cast<uint32_t>(block.insts.size());
      for (uint32_t ii = 0; ii < n; ++ii) {
        const Instruction& inst = block.insts[ii];
        const InstructionId at{fi, bi, ii};
        const bool last = ii + 1 == n;
        if (IsTerminator(inst.op) && !last) issue(at, "control transfer not at block end");
        if (last && !IsTerminator(inst.op)) {
          issue(at, "missing terminator in block '" + f.name + ":" + block.label + "'");
        }
        if (inst.rd >= kNumRegisters || inst.ra >= kNumRegisters || inst.rb >= kNumRegisters) {
          issue(at, "register out of range");
        }
        size_t want_min = 0, want_max = 0;
        switch (inst.op) {
          case Opcode::kBr: want_min = want_max = 2; break;
          case Opcode::kJmp:
          case Opcode::kCall:
            want_min = want_max = 1;
            break;
          case Opcode::kJtab: want_min = 1; want_max = SIZE_MAX; break;
          default: break;
        }
        if (inst.labels.size() < want_min || inst.labels.size() > want_max) {
          issue(at, "wrong number of labels for '" + std::string(OpcodeName(inst.op)) + "'");
        }
        for (const auto& label : inst.labels) {
          if (inst.op == Opcode::kCall) {
            if (!p.FindFunction(label)) issue(at, "call to unknown function '" + label + "'");
          } else if (!p.FindBlock(fi, label)) {
            issue(at, "unresolved label '" + label + "'");
          }
        }
      }
    }
  }
  return report;
}

}  // namespace svm
