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

#include "taemu/isa.h"

#include <fmt/format.h>

namespace taemu::isa {

namespace {

struct OpInfo {
  Opcode op;
  std::string_view name;
};

constexpr OpInfo kOps[] = {
    {Opcode::kMovi, "MOVI"}, {Opcode::kMov, "MOV"},     {Opcode::kAdd, "ADD"},
    {Opcode::kSub, "SUB"},   {Opcode::kAnd, "AND"},     {Opcode::kOr, "OR"},
    {Opcode::kXor, "XOR"},   {Opcode::kShl, "SHL"},     {Opcode::kShr, "SHR"},
    {Opcode::kLdw, "LDW"},   {Opcode::kStw, "STW"},     {Opcode::kLdb, "LDB"},
    {Opcode::kStb, "STB"},   {Opcode::kCmp, "CMP"},     {Opcode::kBeq, "BEQ"},
    {Opcode::kBne, "BNE"},   {Opcode::kBlt, "BLT"},     {Opcode::kBge, "BGE"},
    {Opcode::kJmp, "JMP"},   {Opcode::kCall, "CALL"},   {Opcode::kCallr, "CALLR"},
    {Opcode::kRet, "RET"},   {Opcode::kPush, "PUSH"},   {Opcode::kPop, "POP"},
    {Opcode::kHalt, "HALT"},
};

bool IsDefined(uint8_t raw) {
  for (const auto& info : kOps) {
    if (static_cast<uint8_t>(info.op) == raw) return true;
  }
  return false;
}

}  // namespace

std::array<uint8_t, kInstrSize> Encode(const Instr& instr) {
  auto imm = static_cast<uint32_t>(instr.imm);
  return {static_cast<uint8_t>(instr.op),
          instr.rd,
          instr.rs1,
          instr.rs2,
          static_cast<uint8_t>(imm),
          static_cast<uint8_t>(imm >> 8),
          static_cast<uint8_t>(imm >> 16),
          static_cast<uint8_t>(imm >> 24)};
}

std::optional<Instr> Decode(std::span<const uint8_t, kInstrSize> bytes) {
  if (!IsDefined(bytes[0])) return std::nullopt;
  Instr instr;
  instr.op = static_cast<Opcode>(bytes[0]);
  instr.rd = bytes[1];
  instr.rs1 = bytes[2];
  instr.rs2 = bytes[3];
  instr.imm = static_cast<int32_t>(
      static_cast<uint32_t>(bytes[4]) | (static_cast<uint32_t>(bytes[5]) << 8) |
      (static_cast<uint32_t>(bytes[6]) << 16) |
      (static_cast<uint32_t>(bytes[7]) << 24));
  bool imm_form = instr.rs2 == kImmOperand &&
                  (IsAluOp(instr.op) || instr.op == Opcode::kCmp);
  if (instr.rd >= kNumRegs || instr.rs1 >= kNumRegs ||
      (instr.rs2 >= kNumRegs && !imm_form)) {
    return std::nullopt;
  }
  return instr;
}

std::string_view Mnemonic(Opcode op) {
  for (const auto& info : kOps) {
    if (info.op == op) return info.name;
  }
  return "???";
}

std::optional<Opcode> OpcodeFromMnemonic(std::string_view mnemonic) {
  for (const auto& info : kOps) {
    if (info.name == mnemonic) return info.op;
  }
  return std::nullopt;
}

bool IsControlTransfer(Opcode op) {
  switch (op) {
    case Opcode::kBeq:
    case Opcode::kBne:
    case Opcode::kBlt:
    case Opcode::kBge:
    case Opcode::kJmp:
    case Opcode::kCall:
    case Opcode::kCallr:
    case Opcode::kRet:
    case Opcode::kHalt:
      return true;
    default:
      return false;
  }
}

bool IsAluOp(Opcode op) {
  switch (op) {
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kAnd:
    case Opcode::kOr:
    case Opcode::kXor:
    case Opcode::kShl:
    case Opcode::kShr:
      return true;
    default:
      return false;
  }
}

uint32_t EvalAlu(Opcode op, uint32_t a, uint32_t b) {
  switch (op) {
    case Opcode::kAdd: return a + b;
    case Opcode::kSub: return a - b;
    case Opcode::kAnd: return a & b;
    case Opcode::kOr: return a | b;
    case Opcode::kXor: return a ^ b;
    case Opcode::kShl: return a << (b & 31);
    case Opcode::kShr: return a >> (b & 31);
    default: return 0;
  }
}

std::string Disassemble(const Instr& instr) {
  auto name = Mnemonic(instr.op);
  auto operand2 = [&]() -> std::string {
    if (instr.rs2 == kImmOperand) return fmt::format("{}", instr.imm);
    return fmt::format("r{}", instr.rs2);
  };
  switch (instr.op) {
    case Opcode::kMovi:
      return fmt::format("{} r{}, {}", name, instr.rd, instr.imm);
    case Opcode::kMov:
      return fmt::format("{} r{}, r{}", name, instr.rd, instr.rs1);
    case Opcode::kCmp:
      return fmt::format("{} r{}, {}", name, instr.rs1, operand2());
    case Opcode::kLdw:
    case Opcode::kLdb:
    case Opcode::kStw:
    case Opcode::kStb:
      return fmt::format("{} r{}, r{}, {}", name, instr.rd, instr.rs1,
                         instr.imm);
    case Opcode::kBeq:
    case Opcode::kBne:
    case Opcode::kBlt:
    case Opcode::kBge:
    case Opcode::kJmp:
      return fmt::format("{} {:+}", name, instr.imm);
    case Opcode::kCall:
      return fmt::format("{} 0x{:x}", name, static_cast<uint32_t>(instr.imm));
    case Opcode::kCallr:
      return fmt::format("{} r{}", name, instr.rs1);
    case Opcode::kPush:
    case Opcode::kPop:
      return fmt::format("{} r{}", name, instr.rd);
    case Opcode::kRet:
    case Opcode::kHalt:
      return std::string(name);
    default:
      return fmt::format("{} r{}, r{}, {}", name, instr.rd, instr.rs1,
                         operand2());
  }
}

}  // namespace taemu::isa
