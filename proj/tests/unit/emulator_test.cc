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

#include <random>

#include <fmt/format.h>

#include "../common/test_util.h"
#include "taemu/assembler.h"
#include "taemu/emulator.h"
#include "taemu/isa.h"
#include "taemu/layout.h"
#include "taemu/vtee.h"

namespace taemu {
namespace {

constexpr uint32_t kCode = 0x10000;

// Guest with one rx page of raw instructions at kCode and a stack.
void RawGuest(GuestState& g, const std::vector<isa::Instr>& prog) {
  g.memory.Map(kCode, kPageSize, kPermRX);
  uint32_t at = kCode;
  for (const auto& in : prog) {
    auto b = isa::Encode(in);
    g.memory.Poke(at, b);
    at += 8;
  }
  g.memory.Map(layout::kStackBase, layout::kStackSize, kPermRW);
  g.regs[isa::kSp] = layout::kStackTop;
  g.regs[isa::kPc] = kCode;
}

TEST(Step, MoviAdvancesPc) {
  GuestState g;
  RawGuest(g, {{isa::Opcode::kMovi, 0, 0, 0, 7}});
  HookTable hooks;
  EXPECT_FALSE(Step(g, hooks).has_value());
  EXPECT_EQ(g.regs[0], 7u);
  EXPECT_EQ(g.pc(), kCode + 8);
}

TEST(Step, StoreToUnmappedIsInvalidMemAccess) {
  GuestState g;
  RawGuest(g, {{isa::Opcode::kMovi, 1, 0, 0, static_cast<int32_t>(0xDEAD0000)},
                           {isa::Opcode::kStw, 0, 1, 0, 0}});
  HookTable hooks;
  ASSERT_FALSE(Step(g, hooks).has_value());
  auto o = Step(g, hooks);
  ASSERT_TRUE(o.has_value());
  EXPECT_EQ(o->kind, OutcomeKind::kCrash);
  EXPECT_EQ(o->crash_class, CrashClass::kInvalidMemAccess);
  EXPECT_EQ(o->fault_addr, 0xDEAD0000u);
  EXPECT_EQ(o->fault_pc, kCode + 8);
}

TEST(Step, UndefinedOpcodeAndHalt) {
  GuestState g;
  RawGuest(g, {{isa::Opcode::kHalt, 0, 0, 0, 0}});
  HookTable hooks;
  auto o = Step(g, hooks);
  ASSERT_TRUE(o);
  EXPECT_EQ(o->crash_class, CrashClass::kHalt);

  GuestState g2;
  RawGuest(g2, {});
  uint8_t bad[8] = {0x7E, 0, 0, 0, 0, 0, 0, 0};
  g2.memory.Poke(kCode, bad);
  o = Step(g2, hooks);
  ASSERT_TRUE(o);
  EXPECT_EQ(o->crash_class, CrashClass::kInvalidInstruction);
}

TEST(Step, SentinelDispatchRunsHandlerAndReturnsToLr) {
  auto r = AssembleWithSymbols(
      ".import TEE_Free\n.import TEE_Malloc\n.text\n"
      ".entry TA_InvokeCommandEntryPoint\n  RET\n");
  GuestState g;
  TaImage img = Load(r.file, nullptr, g);
  VirtualTee tee;
  HookTable hooks;
  tee.Bind(img, hooks);
  ASSERT_EQ(img.import_bindings[1], "TEE_Malloc");
  g.regs[0] = 16;
  g.regs[1] = 0;
  g.regs[isa::kLr] = 0x10008;
  g.regs[isa::kPc] = layout::SentinelFor(1);
  EXPECT_EQ(g.pc(), 0xF0000010u);
  EXPECT_FALSE(Step(g, hooks).has_value());
  EXPECT_EQ(g.pc(), 0x10008u);
  uint32_t p = g.regs[0];
  ASSERT_NE(p, 0u);
  std::vector<uint8_t> bytes(16, 0xFF);
  ASSERT_TRUE(g.memory.Peek(p, bytes));
  EXPECT_EQ(bytes, std::vector<uint8_t>(16, 0));
}

TEST(Step, UnboundSentinelIsNeverExecuted) {
  GuestState g;
  RawGuest(g, {});
  g.regs[isa::kPc] = layout::SentinelFor(5);
  HookTable hooks;
  auto o = Step(g, hooks);
  ASSERT_TRUE(o);
  EXPECT_EQ(o->kind, OutcomeKind::kCrash);
}

TEST(Run, IdentityAndBudgetAndBreakpoint) {
  auto ident = testing::Fixture("identity").file;
  GuestState g;
  Load(ident, nullptr, g);
  g.memory.Map(layout::kStackBase, layout::kStackSize, kPermRW);
  HookTable hooks;
  uint32_t entry = *ident.entry("TA_InvokeCommandEntryPoint");
  g.regs[0] = 0x1234;
  auto o = RunUntilReturn(g, hooks, entry, {});
  EXPECT_EQ(o.kind, OutcomeKind::kReturned);
  EXPECT_EQ(g.regs[0], 0u);

  hooks.AddBreakpoint(entry);
  o = RunUntilReturn(g, hooks, entry, {});
  EXPECT_EQ(o.kind, OutcomeKind::kBreakpoint);
  EXPECT_EQ(o.code, entry);
  o = Continue(g, hooks, true);
  EXPECT_EQ(o.kind, OutcomeKind::kReturned);

  auto loop = testing::Fixture("loop").file;
  GuestState g2;
  Load(loop, nullptr, g2);
  g2.memory.Map(layout::kStackBase, layout::kStackSize, kPermRW);
  g2.budget_per_call = 10'000;
  o = RunUntilReturn(g2, HookTable{}, *loop.entry("TA_InvokeCommandEntryPoint"), {0, 0, 0, 0});
  EXPECT_EQ(o.kind, OutcomeKind::kBudgetExhausted);
}

TEST(Run, BreakpointInHookRegionRejected) {
  HookTable hooks;
  EXPECT_THROW(hooks.AddBreakpoint(0xF0000000), std::exception);
}

TEST(Snapshot, RestoreIsIdentity) {
  GuestState g;
  RawGuest(g, {{isa::Opcode::kMovi, 0, 0, 0, 1}});
  g.regs[0] = 42;
  g.memory.Poke32(layout::kStackBase, 0xAAAA5555);
  auto snap = Snapshot(g);
  g.regs[0] = 7;
  g.flag_z = true;
  g.memory.Poke32(layout::kStackBase, 1);
  Restore(g, snap);
  EXPECT_EQ(g.regs[0], 42u);
  EXPECT_FALSE(g.flag_z);
  EXPECT_EQ(g.memory.Peek32(layout::kStackBase), 0xAAAA5555u);
}

TEST(Coverage, SameInputSameMap) {
  auto echo = testing::Fixture("echo").file;
  GuestState g;
  Load(echo, nullptr, g);
  g.memory.Map(layout::kStackBase, layout::kStackSize, kPermRW);
  HookTable hooks;
  uint32_t entry = *echo.entry("TA_InvokeCommandEntryPoint");
  auto snap = Snapshot(g);
  std::vector<std::vector<uint8_t>> maps;
  for (int i = 0; i < 2; ++i) {
    Restore(g, snap);
    g.ResetCoverage();
    RunUntilReturn(g, hooks, entry, {0, 7, 0, 0});
    maps.push_back(g.coverage_map);
  }
  EXPECT_EQ(maps[0], maps[1]);
  EXPECT_GT(std::count_if(maps[0].begin(), maps[0].end(), [](uint8_t c) { return c; }), 0);
}

// Register results of straight-line arithmetic equal a direct evaluation.
TEST(IsaOracle, StraightLinePrograms) {
  std::mt19937_64 rng(3);
  const char* ops[] = {"ADD", "SUB", "AND", "OR", "XOR", "SHL", "SHR"};
  for (int trial = 0; trial < 300; ++trial) {
    std::array<uint32_t, 8> oracle{};
    std::string src = ".text\n.entry TA_InvokeCommandEntryPoint\n";
    for (int r = 0; r < 8; ++r) {
      oracle[r] = static_cast<uint32_t>(rng());
      src += fmt::format("  MOVI r{}, {:#x}\n", r, oracle[r]);
    }
    int n = 1 + static_cast<int>(rng() % 16);
    for (int i = 0; i < n; ++i) {
      int op = static_cast<int>(rng() % 7);
      int rd = static_cast<int>(rng() % 8), ra = static_cast<int>(rng() % 8);
      bool imm = rng() % 2;
      int rb = static_cast<int>(rng() % 8);
      int32_t k = static_cast<int32_t>(rng() % 200) - 100;
      uint32_t a = oracle[ra];
      uint32_t b = imm ? static_cast<uint32_t>(k) : oracle[rb];
      uint64_t wide;
      switch (op) {
        case 0: wide = uint64_t{a} + b; break;
        case 1: wide = uint64_t{a} + (~uint64_t{b} & 0xFFFFFFFF) + 1; break;
        case 2: wide = a & b; break;
        case 3: wide = a | b; break;
        case 4: wide = a ^ b; break;
        case 5: wide = uint64_t{a} << (b % 32); break;
        default: wide = a >> (b % 32); break;
      }
      oracle[rd] = static_cast<uint32_t>(wide & 0xFFFFFFFF);
      src += fmt::format("  {} r{}, r{}, {}\n", ops[op], rd, ra,
                         imm ? std::to_string(k) : fmt::format("r{}", rb));
    }
    src += "  RET\n";
    auto file = Assemble(src);
    GuestState g;
    Load(ParseTaElf(file), nullptr, g);
    g.memory.Map(layout::kStackBase, layout::kStackSize, kPermRW);
    auto o = RunUntilReturn(g, HookTable{}, 0x10000, {});
    ASSERT_EQ(o.kind, OutcomeKind::kReturned);
    for (int r = 0; r < 8; ++r) ASSERT_EQ(g.regs[r], oracle[r]) << src;
  }
}

}  // namespace
}  // namespace taemu
