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
#include "taemu/harness.h"

namespace taemu {
namespace {

TEST(Harness, CipherHarnessBuildsExpectedParams) {
  auto spec = ParseHarness(testing::ReadData("harness/cipher.txt"));
  std::vector<uint8_t> input{0x07, 0xAA};
  auto built = BuildParamSet(spec, input);
  ASSERT_TRUE(built.has_value());
  EXPECT_EQ(built->cmd_id, 2u);  // 7 % 5
  EXPECT_EQ(built->params.param_types, 0x0065);
  EXPECT_EQ(built->params.params[0].kind, ParamSlot::Kind::kMemref);
  EXPECT_EQ(built->params.params[0].bytes, std::vector<uint8_t>{0xAA});
  EXPECT_EQ(built->params.params[1].kind, ParamSlot::Kind::kMemref);
  EXPECT_EQ(built->params.params[1].size_field(), 0x608u);
}

TEST(Harness, ShortInputBuildsNothing) {
  auto spec = ParseHarness(testing::ReadData("harness/cipher.txt"));
  std::vector<uint8_t> one{0x07};
  EXPECT_FALSE(BuildParamSet(spec, one).has_value());
}

TEST(Harness, FormatParseRoundTrip) {
  for (const char* f : {"cipher", "oob", "identity", "missing", "loop"}) {
    auto spec = ParseHarness(testing::ReadData(std::string("harness/") + f + ".txt"));
    EXPECT_EQ(ParseHarness(FormatHarness(spec)), spec) << f;
  }
}

TEST(Harness, ValueInputReadsLittleEndianWithPadding) {
  auto spec = ParseHarness("cmd = fixed:3\nparam_types = 0x0001\nslot0 = value_in:1\n");
  EXPECT_EQ(spec.min_input_len, 9u);
  std::vector<uint8_t> in{0, 1, 0, 0, 0, 2, 0, 0, 0};
  auto b = BuildParamSet(spec, in);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->cmd_id, 3u);
  EXPECT_EQ(b->params.params[0].a, 1u);
  EXPECT_EQ(b->params.params[0].b, 2u);
}

TEST(Harness, InitCalls) {
  auto spec = ParseHarness(
      "cmd = fixed:0\nparam_types = 0\n"
      "init = cmd=4 types=0x0065 slot0=memref_in_fixed:abcd slot1=memref_out:8\n");
  ASSERT_EQ(spec.init.size(), 1u);
  auto call = BuildInitCall(spec.init[0]);
  EXPECT_EQ(call.cmd_id, 4u);
  EXPECT_EQ(call.params.params[0].bytes, (std::vector<uint8_t>{0xAB, 0xCD}));
  EXPECT_EQ(call.params.params[1].size_field(), 8u);
}

TEST(Harness, ErrorsCarryLine) {
  auto expect_line = [](const std::string& text, int line) {
    try {
      ParseHarness(text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kHarnessError);
      EXPECT_EQ(e.line(), line) << text;
    }
  };
  expect_line("cmd = fixed:0\nbogus = 1\n", 2);
  expect_line("cmd = fixed:0\ncmd = fixed:1\n", 2);
  expect_line("cmd = byte:0%0\n", 1);
  expect_line("cmd = fixed:0\nparam_types = 0x0005\nslot0 = value:1,2\n", 2);
  expect_line("cmd = fixed:0\nparam_types = 0\ninit = cmd=1 slot0=value_in:0\n", 3);
}

}  // namespace
}  // namespace taemu
