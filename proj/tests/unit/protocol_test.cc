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

#include <fstream>
#include <thread>

#include "../common/test_util.h"
#include "taemu/bytes.h"
#include "taemu/error.h"
#include "taemu/protocol.h"

namespace taemu::proto {
namespace {

using testing::FixtureManager;
using testing::TempDir;

TEST(Wire, RequestRoundTrip) {
  Request r;
  r.opcode = Opcode::kInvoke;
  r.session = 3;
  r.cmd_id = 9;
  r.param_types = 0x0651;
  r.slots[0].kind = SlotKind::kValue;
  r.slots[0].a = 1;
  r.slots[0].b = 2;
  r.slots[1].kind = SlotKind::kMemref;
  r.slots[1].bytes = {1, 2, 3};
  r.slots[1].declared = 3;
  r.slots[2].kind = SlotKind::kMemrefSized;
  r.slots[2].bytes = {4};
  r.slots[2].declared = 64;
  EXPECT_EQ(DecodeRequest(EncodeRequest(r)), r);
}

TEST(Wire, ResponseRoundTrip) {
  Response r;
  r.status = 0xFFFF0006;
  r.origin = 4;
  r.payloads[1] = {7, 7};
  EXPECT_EQ(DecodeResponse(EncodeResponse(r)), r);
}

TEST(Wire, MalformedFramesThrow) {
  Request r;
  auto bytes = EncodeRequest(r);
  bytes[0] ^= 0xFF;
  EXPECT_THROW(DecodeRequest(bytes), Error);
  auto ok = EncodeRequest(r);
  ok.pop_back();
  EXPECT_THROW(DecodeRequest(ok), Error);
  auto bad_op = EncodeRequest(r);
  bad_op[4] = 0x7F;
  EXPECT_THROW(DecodeRequest(bad_op), Error);
}

TEST(Wire, ErrorResponseIsBadFormat) {
  auto e = ErrorResponse();
  EXPECT_EQ(e.status, 0xFFFF0005u);
  EXPECT_EQ(e.origin, 2);
}

class Loopback : public ::testing::Test {
 protected:
  void Start(const std::string& ta, ServerOptions options = {}) {
    manager_ = FixtureManager(ta);
    server_ = std::make_unique<Server>(*manager_, options);
    socket_ = dir_.str("sock");
    server_->Listen(socket_);
    thread_ = std::thread([this] { server_->Run(); });
  }
  void TearDown() override {
    if (server_) server_->Stop();
    if (thread_.joinable()) thread_.join();
  }

  TempDir dir_{"proto"};
  std::string socket_;
  std::unique_ptr<TaManager> manager_;
  std::unique_ptr<Server> server_;
  std::thread thread_;
};

TEST_F(Loopback, InvokeWithMemref) {
  Start("echo");
  Client c(socket_);
  auto s = c.Open();
  ASSERT_TRUE(s.has_value());
  std::array<WireSlot, 4> slots;
  slots[0].kind = SlotKind::kMemref;
  slots[0].bytes = {0xDE, 0xAD, 0xBE, 0xEF};
  slots[1].kind = SlotKind::kMemref;
  slots[1].bytes = {0, 0, 0, 0};
  auto r = c.Invoke(*s, 1, 0x0065, slots);
  EXPECT_EQ(r.status, 0u);
  EXPECT_EQ(r.origin, 4);
  EXPECT_EQ(r.payloads[1], (std::vector<uint8_t>{0xDE, 0xAD, 0xBE, 0xEF}));
  EXPECT_EQ(c.Close(*s).status, 0u);
}

TEST_F(Loopback, MalformedFrameGetsErrorAndConnectionSurvives) {
  Start("identity");
  Client c(socket_);
  std::vector<uint8_t> junk{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  c.SendRaw(junk);
  auto r = c.ReadResponse();
  EXPECT_EQ(r.status, 0xFFFF0005u);
  auto s = c.Open();
  EXPECT_TRUE(s.has_value());
}

TEST_F(Loopback, UnknownSessionIsBadParameters) {
  Start("identity");
  Client c(socket_);
  auto r = c.Invoke(999, 0, 0, {});
  EXPECT_NE(r.status, 0u);
}

TEST_F(Loopback, PauseAfterHookAllowsSharedMutation) {
  ServerOptions o;
  o.pause_api = "TEE_MemMove";
  o.pause_nth = 1;
  Start("tocttou", o);
  std::string shm = dir_.str("shm");
  auto write_len = [&](uint32_t v) {
    std::fstream f(shm, std::ios::in | std::ios::out | std::ios::binary);
    uint8_t b[4];
    StoreLe32(b, v);
    f.write(reinterpret_cast<char*>(b), 4);
  };
  { std::ofstream(shm, std::ios::binary) << std::string(16, '\0'); }
  write_len(4);
  Client c(socket_);
  auto s = c.Open();
  ASSERT_TRUE(s);
  std::array<WireSlot, 4> slots;
  slots[0].kind = SlotKind::kShmPath;
  slots[0].path = shm;
  std::vector<std::string> pauses;
  auto r = c.Invoke(*s, 0, 0x0005, slots, [&](const std::string& api) {
    pauses.push_back(api);
    write_len(100);
  });
  EXPECT_EQ(pauses, std::vector<std::string>{"TEE_MemMove"});
  EXPECT_EQ(r.status, 0xDEAD0001u);
}

}  // namespace
}  // namespace taemu::proto
