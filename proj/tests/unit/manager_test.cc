// Copyright 2026 The taemu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "../common/test_util.h"
#include "taemu/error.h"
#include "taemu/gp.h"
#include "taemu/manager.h"

namespace taemu {
namespace {

using testing::FixtureManager;

std::vector<uint8_t> Str(const std::string& s) { return {s.begin(), s.end()}; }

TEST(Manager, IdentityInvoke) {
  auto m = FixtureManager("identity");
  auto s = m->OpenSession();
  ASSERT_TRUE(s.session.has_value());
  auto r = m->InvokeCommand(*s.session, 0, {});
  EXPECT_EQ(r.return_code, gp::kSuccess);
  EXPECT_EQ(r.origin, gp::Origin::kTrustedApp);
  EXPECT_FALSE(r.crashed());
}

TEST(Manager, OpenFailureReturnsCode) {
  auto m = FixtureManager("badopen");
  auto s = m->OpenSession();
  EXPECT_FALSE(s.session.has_value());
  EXPECT_EQ(s.result.return_code, 0xFFFF000Au);
}

TEST(Manager, CipherGoodTypes) {
  auto m = FixtureManager("cipher");
  auto s = *m->OpenSession().session;
  GpParamSet p;
  p.param_types = 0x0065;
  p.params[0] = ParamSlot::Memref(Str("attack at dawn!!xyz"));
  p.params[1] = ParamSlot::Memref(std::vector<uint8_t>(32, 0));
  auto r = m->InvokeCommand(s, 0, p);
  ASSERT_EQ(r.return_code, 0u);
  const std::string key = "0123456789abcdef";
  std::string in = "attack at dawn!!xyz";
  ASSERT_EQ(r.out_params[1].size_field(), in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(r.out_params[1].bytes[i], static_cast<uint8_t>(in[i] ^ key[i % 16]));
  }
}

TEST(Manager, CipherBadTypes) {
  auto m = FixtureManager("cipher");
  auto s = *m->OpenSession().session;
  GpParamSet p;
  p.param_types = 0x0011;
  p.params[0] = ParamSlot::Value(1, 2);
  p.params[1] = ParamSlot::Value(3, 4);
  auto r = m->InvokeCommand(s, 0, p);
  EXPECT_EQ(r.return_code, gp::kErrorBadParameters);
  ASSERT_FALSE(r.log_lines.empty());
  EXPECT_EQ(r.log_lines[0], "bad parameter types!");
}

TEST(Manager, TypeConfusionCrashesTarget) {
  auto m = FixtureManager("confusion");
  auto s = *m->OpenSession().session;
  GpParamSet p;
  p.param_types = 0x0001;
  p.params[0] = ParamSlot::Value(0xDEAD0000, 0x10);
  auto r = m->InvokeCommand(s, 0, p);
  EXPECT_TRUE(r.crashed());
  EXPECT_EQ(r.return_code, gp::kErrorTargetDead);
  EXPECT_EQ(r.origin, gp::Origin::kTee);
  // The crashed session is dead from now on.
  auto again = m->InvokeCommand(s, 0, p);
  EXPECT_EQ(again.return_code, gp::kErrorTargetDead);
}

TEST(Manager, NeverRejectsParamTypes) {
  auto m = FixtureManager("echo");
  auto s = *m->OpenSession().session;
  for (uint32_t t : {0x0000u, 0x0065u, 0xFFFFu, 0x8888u, 0x1234u}) {
    GpParamSet p;
    p.param_types = static_cast<uint16_t>(t);
    auto r = m->InvokeCommand(s, 0, p);
    EXPECT_FALSE(r.crashed());
    EXPECT_EQ(r.return_code, t);
  }
}

TEST(Manager, EchoMemrefCopy) {
  auto m = FixtureManager("echo");
  auto s = *m->OpenSession().session;
  GpParamSet p;
  p.param_types = 0x0065;
  p.params[0] = ParamSlot::Memref({1, 2, 3, 4});
  p.params[1] = ParamSlot::Memref(std::vector<uint8_t>(4, 0));
  auto r = m->InvokeCommand(s, 1, p);
  EXPECT_EQ(r.return_code, 0u);
  EXPECT_EQ(r.out_params[1].bytes, (std::vector<uint8_t>{1, 2, 3, 4}));
}

TEST(Manager, SessionContextAndClose) {
  auto m = FixtureManager("demo");
  auto s = m->OpenSession();
  ASSERT_TRUE(s.session);
  EXPECT_EQ(m->Sessions().size(), 1u);
  m->CloseSession(*s.session);
  EXPECT_FALSE(m->HasSession(*s.session));
  EXPECT_THROW(m->CloseSession(*s.session), Error);
  auto d = m->Destroy();
  EXPECT_FALSE(d.crashed());
}

TEST(Manager, MissingApiCrash) {
  auto m = FixtureManager("missing");
  auto s = *m->OpenSession().session;
  GpParamSet p;
  p.param_types = 1;
  auto r = m->InvokeCommand(s, 0, p);
  ASSERT_TRUE(r.crashed());
  EXPECT_EQ(r.outcome.crash_class, CrashClass::kMissingApi);

  ManagerOptions o;
  o.policy = MissingApiPolicy::kReturnZero;
  auto stubbed = FixtureManager("missing", o);
  auto s2 = *stubbed->OpenSession().session;
  EXPECT_FALSE(stubbed->InvokeCommand(s2, 0, p).crashed());
}

TEST(Manager, SnapshotRestoreRepeatsExecution) {
  auto m = FixtureManager("oob");
  auto s = *m->OpenSession().session;
  auto snap = m->TakeSnapshot();
  GpParamSet p;
  p.param_types = 5;
  p.params[0] = ParamSlot::Memref(Str("OB12345678"));
  auto r1 = m->InvokeCommand(s, 0, p);
  m->RestoreSnapshot(snap);
  auto r2 = m->InvokeCommand(s, 0, p);
  EXPECT_EQ(r1.outcome, r2.outcome);
  EXPECT_TRUE(r1.crashed());
  EXPECT_EQ(r1.outcome.detail, "oob-write");
}

TEST(Manager, BudgetExhausted) {
  ManagerOptions o;
  o.instruction_budget = 10'000;
  auto m = FixtureManager("loop", o);
  auto s = *m->OpenSession().session;
  auto r = m->InvokeCommand(s, 0, {});
  EXPECT_EQ(r.outcome.kind, OutcomeKind::kBudgetExhausted);
}

}  // namespace
}  // namespace taemu
