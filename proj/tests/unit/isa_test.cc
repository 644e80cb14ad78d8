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

#include "taemu/isa.h"

namespace taemu::isa {
namespace {

TEST(Isa, EncodeLayoutIsLittleEndian) {
  Instr in{Opcode::kMovi, 3, 0, 0, -2};
  auto b = Encode(in);
  EXPECT_EQ(b[0], 0x01);
  EXPECT_EQ(b[1], 3);
  EXPECT_EQ(b[4], 0xFE);
  EXPECT_EQ(b[7], 0xFF);
}

TEST(Isa, RandomRoundTrip) {
  std::mt19937 rng(5);
  const Opcode ops[] = {Opcode::kMovi, Opcode::kAdd, Opcode::kLdw, Opcode::kBeq,
                        Opcode::kCall, Opcode::kPop, Opcode::kHalt};
  for (int i = 0; i < 1000; ++i) {
    Instr in{ops[rng() % 7], static_cast<uint8_t>(rng() % 16),
             static_cast<uint8_t>(rng() % 16),
             static_cast<uint8_t>(rng() % 16),
             static_cast<int32_t>(rng())};
    // The immediate marker is only legal on ALU and CMP operands.
    if (in.op == Opcode::kAdd && rng() % 2) in.rs2 = kImmOperand;
    auto bytes = Encode(in);
    auto back = Decode(bytes);
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, in);
  }
}

TEST(Isa, RejectsUndefinedOpcodeAndBadRegister) {
  std::array<uint8_t, 8> b{0x7F, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_FALSE(Decode(b).has_value());
  b = {0x01, 16, 0, 0, 0, 0, 0, 0};
  EXPECT_FALSE(Decode(b).has_value());
}

TEST(Isa, MnemonicLookup) {
  for (auto op : {Opcode::kMovi, Opcode::kCallr, Opcode::kHalt, Opcode::kBge}) {
    EXPECT_EQ(OpcodeFromMnemonic(Mnemonic(op)), op);
  }
  EXPECT_FALSE(OpcodeFromMnemonic("FROB").has_value());
  EXPECT_TRUE(IsControlTransfer(Opcode::kRet));
  EXPECT_FALSE(IsControlTransfer(Opcode::kAdd));
}

TEST(Isa, AluTwosComplement) {
  EXPECT_EQ(EvalAlu(Opcode::kSub, 0, 1), 0xFFFFFFFFu);
  EXPECT_EQ(EvalAlu(Opcode::kAdd, 0xFFFFFFFFu, 2), 1u);
  EXPECT_EQ(EvalAlu(Opcode::kShl, 1, 31), 0x80000000u);
  EXPECT_EQ(EvalAlu(Opcode::kShr, 0x80000000u, 31), 1u);
}

}  // namespace
}  // namespace taemu::isa
