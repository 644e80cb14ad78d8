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
#include "taemu/isa.h"
#include "taemu/layout.h"
#include "taemu/vtee.h"

namespace taemu {
namespace {

// A TA built around a single call to `api` with r0..r3 preloaded by the
// test through the entrypoint arguments.
struct CallHarness {
  TaElfFile file;
  GuestState guest;
  HookTable hooks;
  VirtualTee tee;
  TaImage image;

  explicit CallHarness(const std::string& api) {
    file = AssembleWithSymbols(".import " + api +
                               "\n.text\n.entry TA_InvokeCommandEntryPoint\n"
                               "  PUSH lr\n  CALL @" + api + "\n  POP lr\n  RET\n")
               .file;
    image = Load(file, nullptr, guest);
    guest.memory.Map(layout::kStackBase, layout::kStackSize, kPermRW);
    tee.Bind(image, hooks);
  }
  ExecOutcome Call(std::array<uint32_t, 4> args) {
    guest.regs[isa::kSp] = layout::kStackTop;
    return RunUntilReturn(guest, hooks, *file.entry("TA_InvokeCommandEntryPoint"), args);
  }
};

TEST(Vtee, MallocZeroFills) {
  CallHarness h("TEE_Malloc");
  auto o = h.Call({16, 0, 0, 0});
  ASSERT_EQ(o.kind, OutcomeKind::kReturned);
  uint32_t p = h.guest.regs[0];
  ASSERT_NE(p, 0u);
  std::vector<uint8_t> bytes(16, 1);
  h.guest.memory.Peek(p, bytes);
  EXPECT_EQ(bytes, std::vector<uint8_t>(16, 0));
  h.Call({0, 0, 0, 0});
  uint32_t q = h.guest.regs[0];
  EXPECT_NE(q, 0u);
  EXPECT_NE(q, p);
}

TEST(Vtee, MemMoveOverflowIsAsanViolation) {
  CallHarness h("TEE_MemMove");
  uint32_t dst = h.tee.state().heap.Alloc(h.guest.memory, 4, true);
  uint32_t src = h.tee.state().heap.Alloc(h.guest.memory, 8, true);
  auto o = h.Call({dst, src, 8, 0});
  ASSERT_EQ(o.kind, OutcomeKind::kCrash);
  EXPECT_EQ(o.crash_class, CrashClass::kAsanViolation);
  EXPECT_EQ(o.detail, "oob-write");
  EXPECT_EQ(o.offset, 4);
}

TEST(Vtee, MemMoveReadsSharedBackingAtCallTime) {
  CallHarness h("TEE_MemMove");
  auto backing = MakeBufferBacking(4);
  h.guest.memory.Map(0x70000000, kPageSize, kPermRW);
  h.tee.state().shm_bindings.push_back({0x70000000, 4, backing, ShmDirection::kIn});
  uint32_t dst = h.tee.state().heap.Alloc(h.guest.memory, 4, true);
  backing->bytes()[0] = 0x99;
  ASSERT_EQ(h.Call({dst, 0x70000000, 4, 0}).kind, OutcomeKind::kReturned);
  EXPECT_EQ(h.guest.memory.Peek32(dst), 0x99u);
  backing->bytes()[0] = 0x42;
  h.Call({dst, 0x70000000, 4, 0});
  EXPECT_EQ(h.guest.memory.Peek32(dst), 0x42u);
}

TEST(Vtee, StrlenOnUnterminatedChunk) {
  CallHarness h("strlen");
  uint32_t p = h.tee.state().heap.Alloc(h.guest.memory, 4, false);
  h.guest.memory.Fill(p, 4, 'a');
  auto o = h.Call({p, 0, 0, 0});
  ASSERT_EQ(o.kind, OutcomeKind::kCrash);
  EXPECT_EQ(o.detail, "oob-read");
  EXPECT_EQ(o.fault_addr, p + 4);
}

TEST(Vtee, DoubleFreeThroughApi) {
  CallHarness h("TEE_Free");
  uint32_t p = h.tee.state().heap.Alloc(h.guest.memory, 8, false);
  ASSERT_EQ(h.Call({p, 0, 0, 0}).kind, OutcomeKind::kReturned);
  auto o = h.Call({p, 0, 0, 0});
  EXPECT_EQ(o.crash_class, CrashClass::kAsanViolation);
  EXPECT_EQ(o.detail, "double-free");
}

TEST(Vtee, CheckMemoryAccessRights) {
  VirtualTee tee;
  GuestState g;
  g.memory.Map(0x10000, kPageSize, kPermR);
  EXPECT_EQ(tee.CheckMemoryAccessRights(g, gp::kMemoryAccessRead, 0x10000, 16), gp::kSuccess);
  EXPECT_EQ(tee.CheckMemoryAccessRights(g, gp::kMemoryAccessWrite, 0x10000, 16),
            gp::kErrorAccessDenied);
  EXPECT_EQ(tee.CheckMemoryAccessRights(g, gp::kMemoryAccessRead, 0x50000, 4),
            gp::kErrorAccessDenied);
}

TEST(Vtee, PersistentObjectShortRead) {
  VirtualTee tee;
  std::vector<uint8_t> data{1, 2, 3};
  tee.CreateObject("obj", data);
  uint32_t h = tee.OpenObject("obj");
  EXPECT_EQ(tee.ReadObject(h, 10), data);
  EXPECT_EQ(tee.state().open_objects.at(h).cursor, 3u);
  EXPECT_TRUE(tee.ReadObject(h, 10).empty());
  tee.CloseObject(h);
  EXPECT_THROW(tee.ReadObject(h, 1), Error);
  tee.DeleteObject("obj");
  EXPECT_THROW(tee.OpenObject("obj"), Error);
}

TEST(Vtee, StoreSerializationRoundTrip) {
  VirtualTee a;
  a.CreateObject("k1", std::vector<uint8_t>{9, 8});
  a.CreateObject("k2", std::vector<uint8_t>{});
  VirtualTee b;
  b.LoadStore(a.SerializeStore());
  EXPECT_EQ(b.state().objects, a.state().objects);
}

TEST(Vtee, CipherShortBufferAndKey) {
  VirtualTee tee;
  uint32_t op = tee.AllocateOperation(0x10000010, 0);
  std::vector<uint8_t> in{1, 2};
  EXPECT_THROW(tee.CipherDoFinal(op, in, 2), Error);  // no key yet
  tee.SetOperationKey(op, std::vector<uint8_t>{0xF0});
  try {
    tee.CipherDoFinal(op, in, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShortBuffer);
  }
  EXPECT_EQ(tee.CipherDoFinal(op, in, 2), (std::vector<uint8_t>{0xF1, 0xF2}));
  EXPECT_THROW(tee.CipherDoFinal(op + 100, in, 2), Error);
}

TEST(Vtee, MissingApiPolicy) {
  CallHarness h("tee_get_key");
  auto o = h.Call({0, 0, 0, 0});
  ASSERT_EQ(o.kind, OutcomeKind::kCrash);
  EXPECT_EQ(o.crash_class, CrashClass::kMissingApi);
  EXPECT_EQ(o.detail, "tee_get_key");

  CallHarness s("tee_get_key");
  s.tee.registry().policy = MissingApiPolicy::kReturnZero;
  s.guest.regs[0] = 5;
  EXPECT_EQ(s.Call({5, 0, 0, 0}).kind, OutcomeKind::kReturned);
  EXPECT_EQ(s.guest.regs[0], 0u);
}

TEST(Vtee, RegisteredTeeSpecificHandlerLogs) {
  CallHarness h("vendor_log");
  h.tee.registry().RegisterTeeSpecific("vendor_log", [](ApiContext& c) {
    c.tee.log().push_back("vendor");
    return 0u;
  });
  EXPECT_EQ(h.Call({0, 0, 0, 0}).kind, OutcomeKind::kReturned);
  EXPECT_EQ(h.tee.log(), std::vector<std::string>{"vendor"});
  try {
    h.tee.registry().RegisterTeeSpecific("vendor_log", [](ApiContext&) { return 0u; });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateRegistration);
  }
}

TEST(Vtee, ObserverSeesBeforeAndAfter) {
  CallHarness h("TEE_Malloc");
  std::vector<std::pair<std::string, HookPhase>> seen;
  h.tee.set_observer([&](std::string_view api, HookPhase ph) { seen.emplace_back(api, ph); });
  h.Call({4, 0, 0, 0});
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0].second, HookPhase::kBefore);
  EXPECT_EQ(seen[1].second, HookPhase::kAfter);
}

TEST(Vtee, PanicOutcome) {
  CallHarness h("TEE_Panic");
  auto o = h.Call({0xBEEF, 0, 0, 0});
  EXPECT_EQ(o.crash_class, CrashClass::kPanic);
  EXPECT_EQ(o.code, 0xBEEFu);
}

}  // namespace
}  // namespace taemu
