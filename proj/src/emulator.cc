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

#include "taemu/emulator.h"

#include <algorithm>
#include <span>

#include <fmt/format.h>

#include "taemu/error.h"
#include "taemu/isa.h"
#include "taemu/layout.h"

namespace taemu {

using isa::Opcode;

const char* CrashClassName(CrashClass c) {
  switch (c) {
    case CrashClass::kInvalidMemAccess: return "InvalidMemAccess";
    case CrashClass::kInvalidInstruction: return "InvalidInstruction";
    case CrashClass::kHalt: return "Halt";
    case CrashClass::kAsanViolation: return "AsanViolation";
    case CrashClass::kMissingApi: return "MissingApi";
    case CrashClass::kPanic: return "Panic";
  }
  return "Unknown";
}

const char* OutcomeKindName(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::kReturned: return "ReturnedFromEntrypoint";
    case OutcomeKind::kCrash: return "Crash";
    case OutcomeKind::kBreakpoint: return "BreakpointHit";
    case OutcomeKind::kBudgetExhausted: return "BudgetExhausted";
  }
  return "Unknown";
}

ExecOutcome ExecOutcome::Returned() { return ExecOutcome{}; }

ExecOutcome ExecOutcome::Breakpoint(uint32_t vaddr) {
  ExecOutcome o;
  o.kind = OutcomeKind::kBreakpoint;
  o.fault_pc = vaddr;
  o.code = vaddr;
  return o;
}

ExecOutcome ExecOutcome::BudgetExhausted(uint32_t pc) {
  ExecOutcome o;
  o.kind = OutcomeKind::kBudgetExhausted;
  o.fault_pc = pc;
  return o;
}

ExecOutcome ExecOutcome::Crash(CrashClass c, uint32_t pc, uint32_t addr) {
  ExecOutcome o;
  o.kind = OutcomeKind::kCrash;
  o.crash_class = c;
  o.fault_pc = pc;
  o.fault_addr = addr;
  return o;
}

ExecOutcome ExecOutcome::MissingApi(const std::string& api, uint32_t pc) {
  ExecOutcome o = Crash(CrashClass::kMissingApi, pc, 0);
  o.detail = api;
  return o;
}

ExecOutcome ExecOutcome::Panic(uint32_t code, uint32_t pc) {
  ExecOutcome o = Crash(CrashClass::kPanic, pc, 0);
  o.code = code;
  return o;
}

std::string ExecOutcome::Describe() const {
  switch (kind) {
    case OutcomeKind::kReturned:
      return "ReturnedFromEntrypoint";
    case OutcomeKind::kBreakpoint:
      return fmt::format("BreakpointHit(0x{:08x})", code);
    case OutcomeKind::kBudgetExhausted:
      return fmt::format("BudgetExhausted(pc=0x{:08x})", fault_pc);
    case OutcomeKind::kCrash:
      break;
  }
  switch (crash_class) {
    case CrashClass::kAsanViolation:
      if (chunk_base) {
        return fmt::format(
            "Crash(AsanViolation({}), pc=0x{:08x}, addr=0x{:08x}, "
            "chunk=0x{:08x}, offset={})",
            detail, fault_pc, fault_addr, *chunk_base, offset);
      }
      return fmt::format("Crash(AsanViolation({}), pc=0x{:08x}, addr=0x{:08x})",
                         detail, fault_pc, fault_addr);
    case CrashClass::kMissingApi:
      return fmt::format("Crash(MissingApi({}), pc=0x{:08x})", detail,
                         fault_pc);
    case CrashClass::kPanic:
      return fmt::format("Crash(Panic(0x{:08x}), pc=0x{:08x})", code, fault_pc);
    default:
      return fmt::format("Crash({}, pc=0x{:08x}, addr=0x{:08x})",
                         CrashClassName(crash_class), fault_pc, fault_addr);
  }
}

uint32_t HookTable::AddHandler(HookHandler handler) {
  handlers.push_back(std::move(handler));
  return static_cast<uint32_t>(handlers.size() - 1);
}

void HookTable::AddInlineHook(uint32_t vaddr, uint32_t handler_id) {
  if (layout::InHookRegion(vaddr)) {
    throw Error(ErrorCode::kOverlapWithHookRegion,
                fmt::format("inline hook at 0x{:08x}", vaddr));
  }
  inline_hooks[vaddr] = handler_id;
}

void HookTable::AddBreakpoint(uint32_t vaddr) {
  if (layout::InHookRegion(vaddr)) {
    throw Error(ErrorCode::kOverlapWithHookRegion,
                fmt::format("breakpoint at 0x{:08x}", vaddr));
  }
  breakpoints.insert(vaddr);
}

void HookTable::RemoveBreakpoint(uint32_t vaddr) { breakpoints.erase(vaddr); }

GuestState::GuestState() : coverage_map(kCoverageMapSize, 0) {}

void GuestState::ResetCoverage() {
  std::fill(coverage_map.begin(), coverage_map.end(), 0);
  prev_block = 0;
  block_hits.clear();
}

void GuestState::SetLeaders(std::vector<uint32_t> l) {
  std::sort(l.begin(), l.end());
  l.erase(std::unique(l.begin(), l.end()), l.end());
  leaders = std::move(l);
}

namespace {

uint32_t BlockHash(uint32_t addr) {
  uint32_t x = addr >> 3;
  x *= 0x9E3779B1u;
  return x >> 16;
}

void EnterBlock(GuestState& g, uint32_t block) {
  uint8_t& cell = g.coverage_map[CoverageIndex(g.prev_block, block)];
  if (cell != 0xFF) ++cell;
  g.prev_block = block;
  if (g.track_blocks) ++g.block_hits[block];
}

std::optional<ExecOutcome> Dispatch(GuestState& g, const HookTable& hooks,
                                    uint32_t handler_id) {
  auto outcome = hooks.handlers[handler_id](g);
  if (outcome) return outcome;
  g.regs[isa::kPc] = g.regs[isa::kLr];
  g.at_block_start = true;
  return std::nullopt;
}

}  // namespace

uint32_t CoverageIndex(uint32_t prev_block, uint32_t cur_block) {
  return (BlockHash(prev_block) ^ BlockHash(cur_block)) &
         (kCoverageMapSize - 1);
}

std::optional<ExecOutcome> Step(GuestState& g, const HookTable& hooks,
                                bool ignore_breakpoint) {
  auto& r = g.regs;
  const uint32_t pc = r[isa::kPc];

  if (pc == layout::kReturnTrampoline) return ExecOutcome::Returned();
  if (!ignore_breakpoint && !hooks.breakpoints.empty() &&
      hooks.breakpoints.contains(pc)) {
    return ExecOutcome::Breakpoint(pc);
  }
  if (g.instruction_budget == 0) return ExecOutcome::BudgetExhausted(pc);
  --g.instruction_budget;
  ++g.instructions_retired;

  if (layout::InHookRegion(pc)) {
    uint32_t rel = pc - layout::kHookRegionBase;
    if (rel % layout::kHookStride == 0) {
      auto it = hooks.sentinel_hooks.find(rel / layout::kHookStride);
      if (it != hooks.sentinel_hooks.end()) {
        return Dispatch(g, hooks, it->second);
      }
    }
    return ExecOutcome::Crash(CrashClass::kInvalidInstruction, pc, pc);
  }

  if (!g.at_block_start && !g.leaders.empty() &&
      std::binary_search(g.leaders.begin(), g.leaders.end(), pc)) {
    g.at_block_start = true;
  }
  if (g.at_block_start) {
    EnterBlock(g, pc);
    g.at_block_start = false;
  }

  if (!hooks.inline_hooks.empty()) {
    auto it = hooks.inline_hooks.find(pc);
    if (it != hooks.inline_hooks.end()) return Dispatch(g, hooks, it->second);
  }

  if (pc % isa::kInstrSize != 0) {
    return ExecOutcome::Crash(CrashClass::kInvalidInstruction, pc, pc);
  }
  const uint8_t* raw = g.memory.FetchPointer(pc);
  if (raw == nullptr) {
    return ExecOutcome::Crash(CrashClass::kInvalidMemAccess, pc, pc);
  }
  auto decoded = isa::Decode(std::span<const uint8_t, isa::kInstrSize>(
      raw, isa::kInstrSize));
  if (!decoded) {
    return ExecOutcome::Crash(CrashClass::kInvalidInstruction, pc, pc);
  }
  const isa::Instr& in = *decoded;

  uint32_t next = pc + isa::kInstrSize;
  bool transfer = false;
  uint32_t fault = 0;
  auto operand2 = [&]() -> uint32_t {
    return in.rs2 == isa::kImmOperand ? static_cast<uint32_t>(in.imm)
                                      : r[in.rs2];
  };
  auto write_reg = [&](uint8_t reg, uint32_t value) {
    if (reg == isa::kPc) {
      next = value;
      transfer = true;
    } else {
      r[reg] = value;
    }
  };
  auto branch = [&](bool taken) {
    if (taken) next = pc + static_cast<uint32_t>(in.imm);
    transfer = true;
  };

  switch (in.op) {
    case Opcode::kMovi:
      write_reg(in.rd, static_cast<uint32_t>(in.imm));
      break;
    case Opcode::kMov:
      write_reg(in.rd, r[in.rs1]);
      break;
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kAnd:
    case Opcode::kOr:
    case Opcode::kXor:
    case Opcode::kShl:
    case Opcode::kShr:
      write_reg(in.rd, isa::EvalAlu(in.op, r[in.rs1], operand2()));
      break;
    case Opcode::kLdw: {
      uint8_t buf[4];
      uint32_t addr = r[in.rs1] + static_cast<uint32_t>(in.imm);
      if (!g.memory.Read(addr, buf, &fault)) {
        return ExecOutcome::Crash(CrashClass::kInvalidMemAccess, pc, fault);
      }
      write_reg(in.rd, static_cast<uint32_t>(buf[0]) |
                           (static_cast<uint32_t>(buf[1]) << 8) |
                           (static_cast<uint32_t>(buf[2]) << 16) |
                           (static_cast<uint32_t>(buf[3]) << 24));
      break;
    }
    case Opcode::kLdb: {
      uint8_t b;
      uint32_t addr = r[in.rs1] + static_cast<uint32_t>(in.imm);
      if (!g.memory.Read(addr, std::span<uint8_t>(&b, 1), &fault)) {
        return ExecOutcome::Crash(CrashClass::kInvalidMemAccess, pc, fault);
      }
      write_reg(in.rd, b);
      break;
    }
    case Opcode::kStw: {
      uint32_t v = r[in.rd];
      const uint8_t buf[4] = {
          static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
          static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
      uint32_t addr = r[in.rs1] + static_cast<uint32_t>(in.imm);
      if (!g.memory.Write(addr, buf, &fault)) {
        return ExecOutcome::Crash(CrashClass::kInvalidMemAccess, pc, fault);
      }
      break;
    }
    case Opcode::kStb: {
      const uint8_t b = static_cast<uint8_t>(r[in.rd]);
      uint32_t addr = r[in.rs1] + static_cast<uint32_t>(in.imm);
      if (!g.memory.Write(addr, std::span<const uint8_t>(&b, 1), &fault)) {
        return ExecOutcome::Crash(CrashClass::kInvalidMemAccess, pc, fault);
      }
      break;
    }
    case Opcode::kCmp: {
      uint32_t a = r[in.rs1];
      uint32_t b = operand2();
      g.flag_z = a == b;
      g.flag_n = static_cast<int32_t>(a) < static_cast<int32_t>(b);
      break;
    }
    case Opcode::kBeq: branch(g.flag_z); break;
    case Opcode::kBne: branch(!g.flag_z); break;
    case Opcode::kBlt: branch(g.flag_n); break;
    case Opcode::kBge: branch(!g.flag_n); break;
    case Opcode::kJmp: branch(true); break;
    case Opcode::kCall:
      r[isa::kLr] = pc + isa::kInstrSize;
      next = static_cast<uint32_t>(in.imm);
      transfer = true;
      break;
    case Opcode::kCallr: {
      uint32_t target = r[in.rs1];
      r[isa::kLr] = pc + isa::kInstrSize;
      next = target;
      transfer = true;
      break;
    }
    case Opcode::kRet:
      next = r[isa::kLr];
      transfer = true;
      break;
    case Opcode::kPush: {
      uint32_t sp = r[isa::kSp] - 4;
      uint32_t v = r[in.rd];
      const uint8_t buf[4] = {
          static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
          static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
      if (!g.memory.Write(sp, buf, &fault)) {
        return ExecOutcome::Crash(CrashClass::kInvalidMemAccess, pc, fault);
      }
      r[isa::kSp] = sp;
      break;
    }
    case Opcode::kPop: {
      uint8_t buf[4];
      uint32_t sp = r[isa::kSp];
      if (!g.memory.Read(sp, buf, &fault)) {
        return ExecOutcome::Crash(CrashClass::kInvalidMemAccess, pc, fault);
      }
      r[isa::kSp] = sp + 4;
      write_reg(in.rd, static_cast<uint32_t>(buf[0]) |
                           (static_cast<uint32_t>(buf[1]) << 8) |
                           (static_cast<uint32_t>(buf[2]) << 16) |
                           (static_cast<uint32_t>(buf[3]) << 24));
      break;
    }
    case Opcode::kHalt:
      return ExecOutcome::Crash(CrashClass::kHalt, pc, pc);
  }

  r[isa::kPc] = next;
  if (transfer) g.at_block_start = true;
  return std::nullopt;
}

ExecOutcome Continue(GuestState& guest, const HookTable& hooks,
                     bool resume_from_breakpoint) {
  bool skip = resume_from_breakpoint;
  for (;;) {
    auto outcome = Step(guest, hooks, skip);
    skip = false;
    if (outcome) return *outcome;
  }
}

void PrepareCall(GuestState& guest, uint32_t entry_vaddr,
                 const std::array<uint32_t, 4>& args) {
  for (int i = 0; i < 4; ++i) guest.regs[i] = args[i];
  guest.regs[isa::kLr] = layout::kReturnTrampoline;
  guest.regs[isa::kPc] = entry_vaddr;
  guest.instruction_budget = guest.budget_per_call;
  guest.at_block_start = true;
}

ExecOutcome RunUntilReturn(GuestState& guest, const HookTable& hooks,
                           uint32_t entry_vaddr,
                           const std::array<uint32_t, 4>& args) {
  PrepareCall(guest, entry_vaddr, args);
  return Continue(guest, hooks);
}

GuestSnapshot Snapshot(GuestState& guest) {
  GuestSnapshot s;
  s.regs = guest.regs;
  s.flag_z = guest.flag_z;
  s.flag_n = guest.flag_n;
  s.prev_block = guest.prev_block;
  s.at_block_start = guest.at_block_start;
  s.instruction_budget = guest.instruction_budget;
  s.memory = guest.memory.Snapshot();
  return s;
}

void Restore(GuestState& guest, const GuestSnapshot& s) {
  guest.regs = s.regs;
  guest.flag_z = s.flag_z;
  guest.flag_n = s.flag_n;
  guest.prev_block = s.prev_block;
  guest.at_block_start = s.at_block_start;
  guest.instruction_budget = s.instruction_budget;
  guest.memory.Restore(s.memory);
}

}  // namespace taemu
