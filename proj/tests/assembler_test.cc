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

#include <gtest/gtest.h>

#include <random>
#include <string>

#include "svm/fixtures.h"
#include "svm/isa.h"
#include "test_util.h"

namespace svm {
namespace {

using ::svm::testing::MustParse;
using ::svm::testing::RandomProgramText;

bool HasDiagnostic(const ParseResult& r, int line, const std::string& needle) {
  for (const auto& d : r.diagnostics) {
    if (d.line == line && d.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

TEST(Assembler, ParsesMinimalProgram) {
  ParseResult r = ParseProgram("fn main:\nentry:\n  const r0, 7\n  halt");
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.program.functions.size(), 1u);
  ASSERT_EQ(r.program.functions[0].blocks.size(), 1u);
  const auto& insts = r.program.functions[0].blocks[0].insts;
  ASSERT_EQ(insts.size(), 2u);
  EXPECT_EQ(insts[0].op, Opcode::kConst);
  EXPECT_EQ(insts[0].rd, 0);
  EXPECT_EQ(insts[0].imm, 7u);
  EXPECT_EQ(insts[1].op, Opcode::kHalt);
  EXPECT_EQ(r.program.entry, "main");
}

TEST(Assembler, EmitsMinimalProgramAsFourLines) {
  Program p = MustParse("fn main:\nentry:\n  const r0, 7\n  halt");
  EXPECT_EQ(EmitText(p), "fn main:\nentry:\n  const r0, 7\n  halt\n");
}

TEST(Assembler, UnresolvedLabel) {
  ParseResult r = ParseProgram(
      "fn main:\n"
      "entry:\n"
      "  cmp r1, r2\n"
      "  br lt, big, small\n"
      "small:\n"
      "  halt\n");
  ASSERT_FALSE(r.ok());
  EXPECT_TRUE(HasDiagnostic(r, 4, "unresolved label 'big'"));
}

TEST(Assembler, DiagnosticsCarryLineNumbers) {
  ParseResult r = ParseProgram(
      "fn main:\n"
      "a:\n"
      "  frob r1\n"
      "  const r16, 1\n"
      "  halt\n");
  EXPECT_TRUE(HasDiagnostic(r, 3, "unknown opcode 'frob'"));
  EXPECT_TRUE(HasDiagnostic(r, 4, "register out of range"));
  r = ParseProgram("fn main:\na:\n  halt\n\na:\n  halt\n");
  EXPECT_TRUE(HasDiagnostic(r, 5, "duplicate label 'a'"));
}

TEST(Assembler, MissingTerminator) {
  ParseResult r = ParseProgram("fn main:\nentry:\n  const r0, 1\n");
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.diagnostics[0].message.find("missing terminator"), std::string::npos);
}

TEST(Assembler, CommentsAndBlankLinesIgnored) {
  Program a = MustParse("; header\n\nfn main:   ; trailing\nentry:\n\n  halt ; done\n");
  Program b = MustParse("fn main:\nentry:\n  halt\n");
  EXPECT_EQ(a, b);
}

TEST(Assembler, ImmediatesDecimalAndHex) {
  Program p = MustParse("fn main:\ne:\n  const r1, 255\n  const r2, 0xff\n  const r3, 0xffffffffffffffff\n  halt\n");
  const auto& insts = p.functions[0].blocks[0].insts;
  EXPECT_EQ(insts[0].imm, 255u);
  EXPECT_EQ(insts[1].imm, 255u);
  EXPECT_EQ(insts[2].imm, ~0ull);
  EXPECT_FALSE(ParseProgram("fn main:\ne:\n  const r1, -1\n  halt\n").ok());
}

TEST(Assembler, DataStringEscapes) {
  Program p = MustParse("data \"A\\x00\\n\\\\\"\nfn main:\ne:\n  halt\n");
  EXPECT_EQ(p.data, (std::vector<uint8_t>{'A', 0, '\n', '\\'}));
  EXPECT_EQ(MustParse(EmitText(p)), p);
}

TEST(Assembler, EveryOpcodeRoundTrips) {
  Program p = MustParse(
      "data \"\\x01\\x02\"\n"
      "fn main:\n"
      "b0:\n"
      "  const r1, 3\n"
      "  mov r2, r1\n"
      "  add r3, r1, r2\n"
      "  sub r3, r3, 1\n"
      "  mul r3, r3, r2\n"
      "  and r4, r3, 0xff\n"
      "  or r4, r4, r1\n"
      "  xor r4, r4, r4\n"
      "  shl r5, r1, 2\n"
      "  shr r5, r5, r1\n"
      "  div r6, r5, r1\n"
      "  cmp r6, 2\n"
      "  setcc r7, ge\n"
      "  alloc r8, 64\n"
      "  store r8, 8, r7\n"
      "  load r9, r8, 8\n"
      "  input r10, 3\n"
      "  inputlen r11\n"
      "  fence\n"
      "  call f\n"
      "  cmp r1, r2\n"
      "  br eq, b1, b2\n"
      "b1:\n"
      "  jtab r1, b2, b3\n"
      "b2:\n"
      "  jmp b3\n"
      "b3:\n"
      "  halt\n"
      "\n"
      "fn f:\n"
      "e:\n"
      "  ret\n");
  EXPECT_TRUE(Validate(p).ok());
  EXPECT_EQ(MustParse(EmitText(p)), p);
}

TEST(Assembler, ValidatesGadgetOne) {
  const GadgetFixture& g = BuiltinGadget(1);
  EXPECT_TRUE(Validate(g.program).ok());
  ParseResult r = ParseProgram(g.source);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.program, g.program);
  EXPECT_EQ(MustParse(EmitText(g.program)), g.program);
}

TEST(Assembler, ValidateFlagsMidBlockJump) {
  Program p = MustParse("fn main:\na:\n  halt\nb:\n  halt\n");
  Instruction jmp;
  jmp.op = Opcode::kJmp;
  jmp.labels = {"b"};
  p.functions[0].blocks[0].insts.insert(p.functions[0].blocks[0].insts.begin(), jmp);
  ASSERT_TRUE(Link(p));
  ValidationReport report = Validate(p);
  ASSERT_EQ(report.issues.size(), 1u);
  EXPECT_EQ(report.issues[0].message, "control transfer not at block end");
  ASSERT_TRUE(report.issues[0].at.has_value());
  EXPECT_EQ(*report.issues[0].at, (InstructionId{0, 0, 0}));
}

TEST(Assembler, ValidateFlagsCallToMissingFunction) {
  ParseResult r = ParseProgram("fn main:\na:\n  call nowhere\n  halt\n");
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].line, 3);
  EXPECT_NE(r.diagnostics[0].message.find("unknown function 'nowhere'"), std::string::npos);
}

TEST(Assembler, ValidateIsDeterministic) {
  Program p = MustParse("fn main:\na:\n  halt\n");
  p.functions[0].blocks[0].insts.clear();
  ValidationReport a = Validate(p);
  ValidationReport b = Validate(p);
  ASSERT_EQ(a.issues.size(), b.issues.size());
  for (size_t i = 0; i < a.issues.size(); ++i) EXPECT_EQ(a.issues[i].message, b.issues[i].message);
}

TEST(Assembler, RandomProgramsRoundTrip) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    const std::string text = RandomProgramText(rng);
    Program p = MustParse(text);
    ASSERT_TRUE(Validate(p).ok()) << text;
    const std::string emitted = EmitText(p);
    ParseResult again = ParseProgram(emitted);
    ASSERT_TRUE(again.ok()) << emitted;
    EXPECT_EQ(again.program, p) << text;
    EXPECT_EQ(EmitText(again.program), emitted);
  }
}

TEST(CodeLocation, ParseAndPrint) {
  auto loc = CodeLocation::Parse("victim:body:2");
  ASSERT_TRUE(loc.has_value());
  EXPECT_EQ(loc->fn, "victim");
  EXPECT_EQ(loc->block, "body");
  EXPECT_EQ(loc->idx, 2u);
  EXPECT_EQ(loc->ToString(), "victim:body:2");
  EXPECT_FALSE(CodeLocation::Parse("victim:body").has_value());
  EXPECT_FALSE(CodeLocation::Parse("victim:body:x").has_value());

  const Program& p = BuiltinGadget(1).program;
  auto id = Resolve(p, *loc);
  ASSERT_TRUE(id.has_value());
  EXPECT_EQ(ToLocation(p, *id), *loc);
  EXPECT_EQ(InstructionAt(p, *id)->op, Opcode::kLoad);
  EXPECT_FALSE(Resolve(p, {"victim", "body", 99}).has_value());
}

}  // namespace
}  // namespace svm
