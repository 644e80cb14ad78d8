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

#ifndef TAEMU_MANAGER_H_
#define TAEMU_MANAGER_H_

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "taemu/emulator.h"
#include "taemu/gp.h"
#include "taemu/shm.h"
#include "taemu/taelf.h"
#include "taemu/vtee.h"

namespace taemu {

// One client-side parameter. What gets marshalled is decided by the content
// the client supplied, never by the param_types nibble, so a mismatch
// between the two reaches the TA unchanged.
struct ParamSlot {
  enum class Kind : uint8_t { kNone, kValue, kMemref, kShm };

  Kind kind = Kind::kNone;
  uint32_t a = 0;
  uint32_t b = 0;
  // kMemref: buffer contents. The guest buffer is exactly this long.
  std::vector<uint8_t> bytes;
  // Size written into the TEE_Param record; defaults to bytes.size().
  std::optional<uint32_t> declared_size;
  // kShm: externally mutable backing exposed as a SharedRegion.
  std::shared_ptr<ShmBacking> shm;

  static ParamSlot Value(uint32_t a, uint32_t b);
  static ParamSlot Memref(std::vector<uint8_t> bytes,
                          std::optional<uint32_t> declared = std::nullopt);
  static ParamSlot Shm(std::shared_ptr<ShmBacking> backing);

  uint32_t size_field() const;
};

struct GpParamSet {
  uint16_t param_types = 0;
  std::array<ParamSlot, 4> params;
};

struct InvocationResult {
  uint32_t return_code = 0;
  gp::Origin origin = gp::Origin::kTrustedApp;
  // Values and memref contents read back from the guest after the call.
  std::array<ParamSlot, 4> out_params;
  std::vector<std::string> log_lines;
  ExecOutcome outcome;

  bool crashed() const { return outcome.kind != OutcomeKind::kReturned; }
};

struct ManagerOptions {
  MissingApiPolicy policy = MissingApiPolicy::kCrash;
  bool example_apis = true;
  uint64_t instruction_budget = kDefaultInstructionBudget;
};

struct SessionOpenResult {
  std::optional<uint32_t> session;
  InvocationResult result;
};

class TaManager;

struct ManagerSnapshot {
  GuestSnapshot guest;
  std::shared_ptr<const TeeState> tee;
  std::map<uint32_t, uint32_t> sessions;
  std::map<uint32_t, ExecOutcome> dead;
  uint32_t next_session = 1;
  bool created = false;
};

// Loads one TA and drives its GP entrypoints.
class TaManager {
 public:
  explicit TaManager(const TaElfFile& file,
                     const StaticAnnotationConfig* config = nullptr,
                     ManagerOptions options = {});

  // Runs TA_CreateEntryPoint (first session only) and
  // TA_OpenSessionEntryPoint. Absent entrypoints succeed trivially.
  SessionOpenResult OpenSession(const GpParamSet& params = {});
  InvocationResult InvokeCommand(uint32_t session, uint32_t cmd_id,
                                 const GpParamSet& params);
  // Throws kBadHandle for unknown sessions. The session is removed even when
  // the close entrypoint crashes.
  InvocationResult CloseSession(uint32_t session);
  // Runs TA_DestroyEntryPoint when the instance was created.
  InvocationResult Destroy();

  // Split form of InvokeCommand for the debugger: marshal and position the
  // guest, run with the manager's hooks, then collect the result.
  void BeginInvoke(uint32_t session, uint32_t cmd_id, const GpParamSet& params);
  ExecOutcome Resume(bool from_breakpoint = false);
  InvocationResult FinishInvoke(const ExecOutcome& outcome);

  ManagerSnapshot TakeSnapshot();
  void RestoreSnapshot(const ManagerSnapshot& snapshot);

  bool HasSession(uint32_t session) const { return sessions_.contains(session); }
  std::vector<uint32_t> Sessions() const;

  GuestState& guest() { return guest_; }
  HookTable& hooks() { return hooks_; }
  VirtualTee& tee() { return tee_; }
  const TaImage& image() const { return image_; }

 private:
  struct Pending {
    uint32_t session = 0;
    std::array<uint32_t, 4> buffers{};
    std::array<uint32_t, 4> buffer_len{};
    std::array<ParamSlot::Kind, 4> kinds{};
  };

  void Marshal(const GpParamSet& params, Pending& pending);
  void Prepare(uint32_t entry, const std::array<uint32_t, 4>& args);
  InvocationResult RunEntry(std::string_view name,
                            const std::array<uint32_t, 4>& args,
                            const Pending* pending);
  InvocationResult Collect(const ExecOutcome& outcome, const Pending* pending);
  void SyncOutShared();

  GuestState guest_;
  HookTable hooks_;
  VirtualTee tee_;
  TaImage image_;
  ManagerOptions options_;
  // session id -> TA session context
  std::map<uint32_t, uint32_t> sessions_;
  // Sessions whose TA crashed, with the crash.
  std::map<uint32_t, ExecOutcome> dead_;
  uint32_t next_session_ = 1;
  bool created_ = false;
  Pending pending_;
};

// Builds a manager from TAELF bytes.
std::unique_ptr<TaManager> LoadTa(std::span<const uint8_t> bytes,
                                  const StaticAnnotationConfig* config = nullptr,
                                  ManagerOptions options = {});

}  // namespace taemu

#endif  // TAEMU_MANAGER_H_
