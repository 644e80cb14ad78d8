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

#ifndef TAEMU_ISA_H_
#define TAEMU_ISA_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

// TIR-32: the reference guest instruction set. Every instruction is 8 bytes,
// little-endian: [opcode u8 | rd u8 | rs1 u8 | rs2 u8 | imm i32].
// See docs/isa.md for the full semantics.
namespace taemu::isa {

inline constexpr uint32_t kInstrSize = 8;
inline constexpr int kNumRegs = 16;
inline constexpr int kSp = 13;
inline constexpr int kLr = 14;
inline constexpr int kPc = 15;
// r12 is the scratch register used by import call stubs.
inline constexpr int kIp = 12;

// ALU and CMP instructions take their second operand from `imm` when rs2
// holds this marker.
inline constexpr uint8_t kImmOperand = 0xFF;

enum class Opcode : uint8_t {
  kMovi = 0x01,
  kMov = 0x02,
  kAdd = 0x03,
  kSub = 0x04,
  kAnd = 0x05,
  kOr = 0x06,
  kXor = 0x07,
  kShl = 0x08,
  kShr = 0x09,
  kLdw = 0x0A,
  kStw = 0x0B,
  kLdb = 0x0C,
  kStb = 0x0D,
  kCmp = 0x0E,
  kBeq = 0x10,
  kBne = 0x11,
  kBlt = 0x12,
  kBge = 0x13,
  kJmp = 0x14,
  kCall = 0x15,
  kCallr = 0x16,
  kRet = 0x17,
  kPush = 0x18,
  kPop = 0x19,
  kHalt = 0x1A,
};

struct Instr {
  Opcode op = Opcode::kHalt;
  uint8_t rd = 0;
  uint8_t rs1 = 0;
  uint8_t rs2 = 0;
  int32_t imm = 0;

  friend bool operator==(const Instr&, const Instr&) = default;
};

std::array<uint8_t, kInstrSize> Encode(const Instr& instr);
// Returns nullopt for undefined opcodes or out-of-range register fields.
std::optional<Instr> Decode(std::span<const uint8_t, kInstrSize> bytes);

std::string_view Mnemonic(Opcode op);
std::optional<Opcode> OpcodeFromMnemonic(std::string_view mnemonic);

bool IsControlTransfer(Opcode op);
bool IsAluOp(Opcode op);

// Two's-complement 32-bit ALU semantics shared by the interpreter.
uint32_t EvalAlu(Opcode op, uint32_t a, uint32_t b);

std::string Disassemble(const Instr& instr);

}  // namespace taemu::isa

#endif  // TAEMU_ISA_H_
