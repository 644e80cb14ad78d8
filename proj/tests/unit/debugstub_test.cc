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

#include <fmt/format.h>

#include "../common/test_util.h"
#include "taemu/bytes.h"
#include "taemu/debugstub.h"
#include "taemu/isa.h"

namespace taemu::rsp {
namespace {

TEST(Rsp, Framing) {
  EXPECT_EQ(Frame("g"), "$g#67");
  EXPECT_EQ(Frame("OK"), "$OK#9a");
  EXPECT_EQ(Checksum(""), 0);
}

TEST(Rsp, DecoderEvents) {
  PacketDecoder d;
  std::vector<PacketDecoder::Event> events;
  for (char c : std::string("+$g#67-$g#00\x03")) {
    if (auto e = d.Push(c)) events.push_back(*e);
  }
  ASSERT_EQ(events.size(), 5u);
  EXPECT_EQ(events[0].kind, PacketDecoder::Event::Kind::kAck);
  EXPECT_EQ(events[1].kind, PacketDecoder::Event::Kind::kPacket);
  EXPECT_EQ(events[1].payload, "g");
  EXPECT_EQ(events[2].kind, PacketDecoder::Event::Kind::kNak);
  EXPECT_EQ(events[3].kind, PacketDecoder::Event::Kind::kBadChecksum);
  EXPECT_EQ(events[4].kind, PacketDecoder::Event::Kind::kInterrupt);
}

class RspTest : public ::testing::Test {
 protected:
  void SetUp() override {
    asm_ = testing::Fixture("gotwin");
    manager_ = std::make_unique<TaManager>(asm_.file);
    session_ = *manager_->OpenSession().session;
    manager_->BeginInvoke(session_, 0, {});
    rsp_ = std::make_unique<RspSession>(*manager_);
  }
  uint32_t entry() const { return *asm_.file.entry("TA_InvokeCommandEntryPoint"); }
  uint32_t PcFromG(const std::string& g) {
    auto b = HexDecode(g.substr(8 * isa::kPc, 8));
    return LoadLe32(b->data());
  }

  AssemblyResult asm_;
  std::unique_ptr<TaManager> manager_;
  uint32_t session_ = 0;
  std::unique_ptr<RspSession> rsp_;
};

TEST_F(RspTest, FeedAcksAndFrames) {
  EXPECT_EQ(rsp_->Feed("$?#3f"), "+$S05#b8");
  EXPECT_EQ(rsp_->Feed("$?#00"), "-");
  EXPECT_EQ(rsp_->Feed("-"), "$S05#b8");
  EXPECT_EQ(rsp_->Feed("$vMustReplyEmpty#3a"), "+$#00");
}

TEST_F(RspTest, RegistersAndMemory) {
  std::string g = rsp_->Handle("g");
  ASSERT_EQ(g.size(), 128u);
  EXPECT_EQ(PcFromG(g), entry());
  std::string g2 = g;
  g2.replace(8 * 5, 8, "78563412");
  EXPECT_EQ(rsp_->Handle("G" + g2), "OK");
  EXPECT_EQ(manager_->guest().regs[5], 0x12345678u);
  EXPECT_EQ(rsp_->Handle("G00"), "E01");

  uint32_t slot = manager_->image().SlotOf("puts");
  EXPECT_EQ(rsp_->Handle(fmt::format("m{:x},4", slot)), "000000f0");
  EXPECT_EQ(rsp_->Handle(fmt::format("M{:x},4:01020304", slot)), "OK");
  EXPECT_EQ(manager_->guest().memory.Peek32(slot), 0x04030201u);
  EXPECT_EQ(rsp_->Handle("m10,4"), "E01");
  EXPECT_EQ(rsp_->Handle("qSupported:xmlRegisters=i386"), "PacketSize=4000");
}

TEST_F(RspTest, BreakpointStepContinue) {
  EXPECT_EQ(rsp_->Handle(fmt::format("Z0,{:x},4", entry())), "OK");
  EXPECT_EQ(rsp_->Handle("c"), "S05");
  EXPECT_EQ(PcFromG(rsp_->Handle("g")), entry());
  EXPECT_EQ(rsp_->Handle("s"), "S05");
  EXPECT_EQ(PcFromG(rsp_->Handle("g")), entry() + 8);
  EXPECT_EQ(rsp_->Handle(fmt::format("z0,{:x},4", entry())), "OK");
  EXPECT_EQ(rsp_->Handle("c"), "W00");
  ASSERT_TRUE(rsp_->result().has_value());
  EXPECT_EQ(rsp_->Handle("D"), "OK");
  EXPECT_TRUE(rsp_->detached());
}

TEST_F(RspTest, GotOverwriteDivertsControl) {
  uint32_t slot = manager_->image().SlotOf("puts");
  uint32_t win = asm_.labels.at("win");
  uint8_t b[4];
  StoreLe32(b, win);
  EXPECT_EQ(rsp_->Handle(fmt::format("M{:x},4:{}", slot, HexEncode(b))), "OK");
  EXPECT_EQ(rsp_->Handle("c"), "W37");
  EXPECT_EQ(rsp_->result()->return_code, 0x1337u);
}

TEST_F(RspTest, RunToCompletionAfterDetach) {
  rsp_->Handle(fmt::format("Z0,{:x},4", entry()));
  rsp_->Handle("D");
  auto r = rsp_->RunToCompletion();
  EXPECT_FALSE(r.crashed());
}

TEST(RspCrash, CrashStopsWithSegv) {
  auto m = testing::FixtureManager("confusion");
  auto s = *m->OpenSession().session;
  GpParamSet p;
  p.params[0] = ParamSlot::Value(0xDEAD0000, 4);
  m->BeginInvoke(s, 0, p);
  RspSession rsp(*m);
  EXPECT_EQ(rsp.Handle("c"), "S0B");
  EXPECT_TRUE(rsp.result()->crashed());
}

}  // namespace
}  // namespace taemu::rsp
