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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / "svm_cli_tests" / info->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  Outcome Svm(const std::string& args, const std::string& env = "") {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + SVM_BINARY + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, Slurp(out), Slurp(err)};
  }

  void Write(const std::string& name, const std::string& text) { std::ofstream(dir_ / name) << text; }

  fs::path dir_;
};

TEST_F(CliTest, GadgetsListAndEmit) {
  Outcome list = Svm("gadgets list");
  EXPECT_EQ(list.code, 0);
  EXPECT_NE(list.out.find("1\tbasic\tvictim:body:2\tDATA-OOB\torder 1"), std::string::npos);
  EXPECT_EQ(Svm("gadgets emit 1 -o g1.sasm").code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "g1.sasm"));
  Outcome unknown = Svm("gadgets emit 99");
  EXPECT_EQ(unknown.code, 1);
  EXPECT_EQ(unknown.err.rfind("svm: UNKNOWN-GADGET:", 0), 0u);
}

TEST_F(CliTest, AsmErrorsAreSingleLineDiagnostics) {
  Write("bad.sasm", "fn main:\nentry:\n  br lt, big, small\nsmall:\n  halt\n");
  Outcome r = Svm("asm bad.sasm");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("svm: ASM-ERROR: bad.sasm:3: unresolved label 'big'", 0), 0u) << r.err;
  Write("good.sasm", "fn main:\nentry:\n  const r0, 7\n  halt\n");
  Outcome ok = Svm("asm good.sasm");
  EXPECT_EQ(ok.code, 0);
  EXPECT_EQ(ok.out, "fn main:\nentry:\n  const r0, 7\n  halt\n");
}

TEST_F(CliTest, RunStrictReportsViolation) {
  ASSERT_EQ(Svm("gadgets emit 1 -o g1.sasm").code, 0);
  Outcome r = Svm("run g1.sasm --input-hex 10 --strict");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("DATA-OOB victim:body:2"), std::string::npos);
  EXPECT_NE(r.out.find("violations: 1 "), std::string::npos);
  EXPECT_EQ(r.err.rfind("svm: VIOLATIONS-FOUND:", 0), 0u);
  EXPECT_EQ(Svm("run g1.sasm --input-hex 03 --strict").code, 0);
  EXPECT_EQ(Svm("run g1.sasm --input-hex 10").code, 0);
}

TEST_F(CliTest, RunReportsArchitecturalCrash) {
  Write("crash.sasm", "fn main:\ne:\n  alloc r1, 8\n  load r2, r1, 8\n  halt\n");
  Outcome r = Svm("run crash.sasm");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("svm: ARCH-CRASH: OOB-ACCESS at main:e:1", 0), 0u) << r.err;
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  ASSERT_EQ(Svm("gadgets emit 17 -o g17.sasm").code, 0);
  Write("order1.cfg", "max_order=1\n");
  EXPECT_EQ(Svm("run g17.sasm --input-hex 10 --strict --config order1.cfg").code, 0);
  EXPECT_EQ(Svm("run g17.sasm --input-hex 10 --strict --config order1.cfg --max-order 2").code, 3);
  Write("broken.cfg", "window=lots\n");
  Outcome bad = Svm("run g17.sasm --input-hex 10 --config broken.cfg");
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(bad.err.rfind("svm: CONFIG-ERROR:", 0), 0u);
  EXPECT_EQ(Svm("run g17.sasm --input-hex 10 --strict --no-spec").code, 0);
}

TEST_F(CliTest, OracleMatchesRun) {
  ASSERT_EQ(Svm("gadgets emit 1 -o g1.sasm").code, 0);
  Outcome r = Svm("oracle g1.sasm --input-hex 10 --max-order 2");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "DATA-OOB victim:body:2 obj1/128+128 order=1 via victim:check:3\n");
}

TEST_F(CliTest, FullPipeline) {
  ASSERT_EQ(Svm("gadgets emit 1 -o g1.sasm").code, 0);
  Outcome fuzz = Svm("fuzz g1.sasm --runs 1000 --seed 7 --corpus c --trace t.jsonl");
  ASSERT_EQ(fuzz.code, 0) << fuzz.err;
  EXPECT_GT(fs::file_size(dir_ / "t.jsonl"), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "session.json"));
  auto session = nlohmann::json::parse(Slurp(dir_ / "session.json"));
  EXPECT_EQ(session["version"], "0.3.1");
  EXPECT_EQ(session["config"]["seed"], 7);
  const std::string header = Slurp(dir_ / "t.jsonl").substr(0, Slurp(dir_ / "t.jsonl").find('\n'));
  EXPECT_EQ(nlohmann::json::parse(header)["svm_header"]["config"]["runs"], 1000);

  Outcome analyze = Svm("analyze t.jsonl -o report.json --whitelist wl.txt");
  ASSERT_EQ(analyze.code, 0) << analyze.err;
  auto report = nlohmann::json::parse(Slurp(dir_ / "report.json"));
  ASSERT_FALSE(report["findings"].empty());
  EXPECT_EQ(report["findings"][0]["offending"], "victim:body:2");
  EXPECT_TRUE(fs::exists(dir_ / "report.txt"));
  EXPECT_EQ(Slurp(dir_ / "wl.txt").rfind("# svm whitelist\n# version: 0.3.1\n", 0), 0u);

  Outcome harden = Svm("harden g1.sasm --mode fence --whitelist wl.txt -o g1h.sasm");
  ASSERT_EQ(harden.code, 0) << harden.err;
  Outcome verify = Svm("verify g1h.sasm --corpus c --whitelist wl.txt --strict");
  EXPECT_EQ(verify.code, 0) << verify.out << verify.err;
  EXPECT_NE(verify.out.find("residual violations: 0"), std::string::npos);
  Outcome unhardened = Svm("verify g1.sasm --corpus c --strict");
  EXPECT_EQ(unhardened.code, 3);
}

TEST_F(CliTest, FuzzSeedFromEnvironment) {
  ASSERT_EQ(Svm("gadgets emit 1 -o g1.sasm").code, 0);
  ASSERT_EQ(Svm("fuzz g1.sasm --runs 300 --corpus a/c --trace a/t.jsonl", "SVM_SEED=11").code, 0);
  ASSERT_EQ(Svm("fuzz g1.sasm --runs 300 --seed 11 --corpus b/c --trace b/t.jsonl").code, 0);
  EXPECT_EQ(Slurp(dir_ / "a" / "t.jsonl"), Slurp(dir_ / "b" / "t.jsonl"));
}

TEST_F(CliTest, AnalyzeFlagsPartialInput) {
  Write("t.jsonl", "{not json\n");
  Outcome r = Svm("analyze t.jsonl -o report.json");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("svm: TRACE-ERROR: t.jsonl:1:"), std::string::npos);
  EXPECT_NE(r.err.find("svm: PARTIAL-INPUT:"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "report.json"));
}

TEST_F(CliTest, HardenRejectsReservedRegister) {
  Write("p.sasm", "fn main:\ne:\n  const r15, 1\n  halt\n");
  Outcome r = Svm("harden p.sasm --mode slh");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("svm: MASK-REGISTER-IN-USE:", 0), 0u) << r.err;
}

TEST_F(CliTest, PrintLayout) {
  Outcome r = Svm("run --print-layout");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("0x100000"), std::string::npos) << r.out;
}

}  // namespace
