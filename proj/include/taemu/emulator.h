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

#ifndef TAEMU_EMULATOR_H_
#define TAEMU_EMULATOR_H_

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "taemu/memory.h"

namespace taemu {

inline constexpr size_t kCoverageMapSize = 65536;
inline constexpr uint64_t kDefaultInstructionBudget = 1'000'000;

enum class OutcomeKind : uint8_t {
  kReturned,
  kCrash,
  kBreakpoint,
  kBudgetExhausted,
};

enum class CrashClass : uint8_t {
  kInvalidMemAccess,
  kInvalidInstruction,
  kHalt,
  kAsanViolation,
  kMissingApi,
  kPanic,
};

const char* CrashClassName(CrashClass c);
const char* OutcomeKindName(OutcomeKind k);

struct ExecOutcome {
  OutcomeKind kind = OutcomeKind::kReturned;
  CrashClass crash_class = CrashClass::kInvalidMemAccess;
  uint32_t fault_pc = 0;
  uint32_t fault_addr = 0;
  // Violation kind for kAsanViolation ("oob-write", ...), API name for
  // kMissingApi.
  std::string detail;
  // kAsanViolation only: chunk the access was attributed to, and the offset
  // of the first bad byte relative to it (or to the access base when there
  // is no chunk).
  std::optional<uint32_t> chunk_base;
  int64_t offset = 0;
  // kPanic: panic code. kBreakpoint: breakpoint address.
  uint32_t code = 0;

  static ExecOutcome Returned();
  static ExecOutcome Breakpoint(uint32_t vaddr);
  static ExecOutcome BudgetExhausted(uint32_t pc);
  static ExecOutcome Crash(CrashClass c, uint32_t pc, uint32_t addr);
  static ExecOutcome MissingApi(const std::string& api, uint32_t pc);
  static ExecOutcome Panic(uint32_t code, uint32_t pc);

  bool is_crash() const { return kind == OutcomeKind::kCrash; }
  std::string Describe() const;

  friend bool operator==(const ExecOutcome&, const ExecOutcome&) = default;
};

struct GuestState;

// Handlers either return nothing (execution resumes at lr) or an outcome
// that terminates the run.
using HookHandler = std::function<std::optional<ExecOutcome>(GuestState&)>;

struct HookTable {
  std::vector<HookHandler> handlers;
  // import index -> handler id
  std::unordered_map<uint32_t, uint32_t> sentinel_hooks;
  // vaddr -> handler id (statically linked TAs)
  std::unordered_map<uint32_t, uint32_t> inline_hooks;
  std::set<uint32_t> breakpoints;

  uint32_t AddHandler(HookHandler handler);
  // Breakpoints and inline hooks inside the hook region are rejected.
  void AddInlineHook(uint32_t vaddr, uint32_t handler_id);
  void AddBreakpoint(uint32_t vaddr);
  void RemoveBreakpoint(uint32_t vaddr);
};

struct GuestState {
  GuestState();

  std::array<uint32_t, 16> regs{};
  bool flag_z = false;
  bool flag_n = false;
  Memory memory;

  std::vector<uint8_t> coverage_map;
  uint32_t prev_block = 0;
  bool at_block_start = true;
  // Sorted static block leaders; a block also starts after every control
  // transfer.
  std::vector<uint32_t> leaders;
  bool track_blocks = false;
  std::unordered_map<uint32_t, uint64_t> block_hits;

  uint64_t budget_per_call = kDefaultInstructionBudget;
  uint64_t instruction_budget = kDefaultInstructionBudget;
  uint64_t instructions_retired = 0;

  uint32_t pc() const { return regs[15]; }
  uint32_t sp() const { return regs[13]; }
  uint32_t lr() const { return regs[14]; }

  void ResetCoverage();
  void SetLeaders(std::vector<uint32_t> leaders);
};

struct GuestSnapshot {
  std::array<uint32_t, 16> regs{};
  bool flag_z = false;
  bool flag_n = false;
  uint32_t prev_block = 0;
  bool at_block_start = true;
  uint64_t instruction_budget = 0;
  MemorySnapshot memory;
};

// Executes one instruction or dispatches one hook. Returns an outcome when
// execution must stop. Guest faults are reported as crash outcomes.
std::optional<ExecOutcome> Step(GuestState& guest, const HookTable& hooks,
                                bool ignore_breakpoint = false);

// Steps until an outcome is produced. A breakpoint at the current pc is
// skipped once so that a stopped guest can be resumed.
ExecOutcome Continue(GuestState& guest, const HookTable& hooks,
                     bool resume_from_breakpoint = false);

// Runs an entrypoint with lr preset to the return trampoline and a fresh
// instruction budget.
ExecOutcome RunUntilReturn(GuestState& guest, const HookTable& hooks,
                           uint32_t entry_vaddr,
                           const std::array<uint32_t, 4>& args);

// Positions the guest at an entrypoint without running it.
void PrepareCall(GuestState& guest, uint32_t entry_vaddr,
                 const std::array<uint32_t, 4>& args);

// Coverage and block-hit accumulators are not part of a snapshot.
GuestSnapshot Snapshot(GuestState& guest);
void Restore(GuestState& guest, const GuestSnapshot& snapshot);

uint32_t CoverageIndex(uint32_t prev_block, uint32_t cur_block);

}  // namespace taemu

#endif  // TAEMU_EMULATOR_H_
