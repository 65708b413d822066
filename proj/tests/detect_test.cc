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

#include "svm/detect.h"

#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "svm/engine.h"
#include "svm/fixtures.h"

namespace svm {
namespace {

TEST(Detect, SpeculativeAccessPolicy) {
  EXPECT_EQ(OnSpeculativeAccess({AccessKind::kValid, std::nullopt}), SpecAction::kProceed);
  EXPECT_EQ(OnSpeculativeAccess({AccessKind::kScratch, std::nullopt}), SpecAction::kProceed);
  EXPECT_EQ(OnSpeculativeAccess({AccessKind::kRedzone, Referent{0, 0x100000, 128, 128}}),
            SpecAction::kProceedAfterRecord);
  EXPECT_EQ(OnSpeculativeAccess({AccessKind::kUnmapped, std::nullopt}), SpecAction::kRollbackAfterRecord);
}

TEST(Detect, SpeculativeFaultPolicy) {
  EXPECT_EQ(OnSpeculativeFault(FaultKind::kDivZero), SpecAction::kRollback);
  EXPECT_EQ(OnSpeculativeFault(FaultKind::kStackOverflow), SpecAction::kRollback);
  EXPECT_EQ(OnSpeculativeFault(FaultKind::kHeapExhausted), SpecAction::kRollback);
  EXPECT_EQ(OnSpeculativeFault(FaultKind::kBadRet), SpecAction::kRollbackAfterRecord);
  EXPECT_EQ(OnSpeculativeFault(FaultKind::kBadJtabIndex), SpecAction::kRollbackAfterRecord);
}

TEST(Detect, Names) {
  EXPECT_EQ(ViolationKindName(ViolationKind::kDataOob), "DATA-OOB");
  EXPECT_EQ(ViolationKindName(ViolationKind::kCodePtr), "CODE-PTR");
  EXPECT_EQ(ViolationKindFromName("CODE-PTR"), ViolationKind::kCodePtr);
  EXPECT_FALSE(ViolationKindFromName("data-oob").has_value());
  EXPECT_EQ(IdentityModeFromName("raw"), IdentityMode::kRaw);
  EXPECT_EQ(IdentityModeName(IdentityMode::kOffset), "offset");
}

TEST(Detect, IdentityStrings) {
  const Referent ref{2, 0x120010, 128, 136};
  EXPECT_EQ(IdentityOf(ViolationKind::kDataOob, ref, 0x120098, FaultKind::kNone, IdentityMode::kOffset),
            "obj2/128+136");
  EXPECT_EQ(IdentityOf(ViolationKind::kDataOob, ref, 0x120098, FaultKind::kNone, IdentityMode::kRaw), "0x120098");
  EXPECT_EQ(IdentityOf(ViolationKind::kDataOob, std::nullopt, 0xdead0000, FaultKind::kNone, IdentityMode::kOffset),
            "0xdead0000");
  EXPECT_EQ(IdentityOf(ViolationKind::kCodePtr, std::nullopt, 4, FaultKind::kBadJtabIndex, IdentityMode::kOffset),
            "BAD-JTAB-INDEX@0x4");
}

ViolationRecord Record(uint64_t base, int64_t offset) {
  ViolationRecord v;
  v.offending = {1, 1, 2};
  v.addr = base + offset;
  v.access = {AccessKind::kRedzone, Referent{1, base, 128, offset}};
  return v;
}

TEST(Detect, OffsetModeIgnoresAbsoluteBase) {
  ViolationRecord a = Record(0x120010, 128);
  ViolationRecord b = Record(0x220010, 128);
  EXPECT_EQ(MakeDedupKey(a, IdentityMode::kOffset), MakeDedupKey(b, IdentityMode::kOffset));
  EXPECT_NE(MakeDedupKey(a, IdentityMode::kRaw), MakeDedupKey(b, IdentityMode::kRaw));
}

TEST(Detect, CodeAndDataKeysDiffer) {
  ViolationRecord data = Record(0x120010, 128);
  ViolationRecord code = data;
  code.kind = ViolationKind::kCodePtr;
  code.code_fault = FaultKind::kBadRet;
  EXPECT_NE(MakeDedupKey(data, IdentityMode::kOffset), MakeDedupKey(code, IdentityMode::kOffset));
}

TEST(Detect, GadgetOneDistinctOffsetsGiveDistinctKeys) {
  const GadgetFixture& g = BuiltinGadget(1);
  SpecConfig cfg;
  cfg.prioritized = false;
  cfg.max_order = 1;
  Engine engine(g.program, cfg);
  std::set<DedupKey> keys;
  for (uint8_t x : {16, 17}) {
    std::vector<uint8_t> in{x};
    for (const auto& v : engine.Run(in, nullptr).trace.violations) {
      if (v.offending == InstructionId{1, 1, 2}) keys.insert(MakeDedupKey(v, IdentityMode::kOffset));
    }
  }
  ASSERT_EQ(keys.size(), 2u);
  EXPECT_EQ(keys.begin()->identity, "obj1/128+128");
  EXPECT_EQ(std::next(keys.begin())->identity, "obj1/128+136");
}

}  // namespace
}  // namespace svm
