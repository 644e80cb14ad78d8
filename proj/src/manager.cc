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

#include "taemu/manager.h"

#include <algorithm>

#include <fmt/format.h>

#include "taemu/error.h"
#include "taemu/isa.h"
#include "taemu/layout.h"

namespace taemu {

namespace {

constexpr uint32_t kArenaEnd = layout::kParamBase + layout::kParamSize;

uint32_t AlignUp8(uint64_t v) { return static_cast<uint32_t>((v + 7) & ~uint64_t{7}); }

InvocationResult TrivialSuccess() { return InvocationResult{}; }

InvocationResult DeadResult(const ExecOutcome& crash) {
  InvocationResult r;
  r.return_code = gp::kErrorTargetDead;
  r.origin = gp::Origin::kTee;
  r.outcome = crash;
  return r;
}

}  // namespace

ParamSlot ParamSlot::Value(uint32_t a, uint32_t b) {
  ParamSlot s;
  s.kind = Kind::kValue;
  s.a = a;
  s.b = b;
  return s;
}

ParamSlot ParamSlot::Memref(std::vector<uint8_t> bytes,
                            std::optional<uint32_t> declared) {
  ParamSlot s;
  s.kind = Kind::kMemref;
  s.bytes = std::move(bytes);
  s.declared_size = declared;
  return s;
}

ParamSlot ParamSlot::Shm(std::shared_ptr<ShmBacking> backing) {
  ParamSlot s;
  s.kind = Kind::kShm;
  s.shm = std::move(backing);
  return s;
}

uint32_t ParamSlot::size_field() const {
  if (declared_size) return *declared_size;
  if (kind == Kind::kShm && shm) return static_cast<uint32_t>(shm->size());
  return static_cast<uint32_t>(bytes.size());
}

TaManager::TaManager(const TaElfFile& file,
                     const StaticAnnotationConfig* config,
                     ManagerOptions options)
    : options_(options) {
  image_ = Load(file, config, guest_);
  guest_.memory.Map(layout::kParamBase, layout::kParamSize, kPermRW);
  guest_.memory.Map(layout::kStackBase, layout::kStackSize, kPermRW);
  guest_.budget_per_call = options.instruction_budget;
  tee_.registry().policy = options.policy;
  if (options.example_apis) RegisterExampleTeeApis(tee_);
  tee_.Bind(image_, hooks_);
}

std::unique_ptr<TaManager> LoadTa(std::span<const uint8_t> bytes,
                                  const StaticAnnotationConfig* config,
                                  ManagerOptions options) {
  return std::make_unique<TaManager>(ParseTaElf(bytes), config, options);
}

std::vector<uint32_t> TaManager::Sessions() const {
  std::vector<uint32_t> out;
  for (const auto& [id, ctx] : sessions_) out.push_back(id);
  return out;
}

void TaManager::Marshal(const GpParamSet& params, Pending& pending) {
  pending = Pending{};
  uint32_t cursor = layout::kMemrefArena;
  TeeState& state = tee_.state();
  for (int i = 0; i < 4; ++i) {
    const ParamSlot& slot = params.params[i];
    pending.kinds[i] = slot.kind;
    uint32_t a = 0;
    uint32_t b = 0;
    switch (slot.kind) {
      case ParamSlot::Kind::kNone:
        break;
      case ParamSlot::Kind::kValue:
        a = slot.a;
        b = slot.b;
        break;
      case ParamSlot::Kind::kMemref:
      case ParamSlot::Kind::kShm: {
        size_t len = slot.kind == ParamSlot::Kind::kShm
                         ? (slot.shm ? slot.shm->size() : 0)
                         : slot.bytes.size();
        if (static_cast<uint64_t>(cursor) + len > kArenaEnd) {
          throw Error(ErrorCode::kProtocolError,
                      fmt::format("memref {} of {} bytes does not fit the "
                                  "parameter arena", i, len));
        }
        if (slot.kind == ParamSlot::Kind::kShm) {
          auto data = slot.shm->bytes();
          guest_.memory.Poke(cursor, data);
          state.shm_bindings.push_back(SharedRegion{
              cursor, static_cast<uint32_t>(len), slot.shm, ShmDirection::kInOut});
          ++state.epoch;
        } else {
          guest_.memory.Poke(cursor, slot.bytes);
        }
        pending.buffers[i] = cursor;
        pending.buffer_len[i] = static_cast<uint32_t>(len);
        a = cursor;
        b = slot.size_field();
        cursor = AlignUp8(static_cast<uint64_t>(cursor) + len);
        break;
      }
    }
    guest_.memory.Poke32(layout::kParamArray + 8 * i, a);
    guest_.memory.Poke32(layout::kParamArray + 8 * i + 4, b);
  }
}

void TaManager::Prepare(uint32_t entry, const std::array<uint32_t, 4>& args) {
  guest_.regs.fill(0);
  guest_.flag_z = false;
  guest_.flag_n = false;
  guest_.regs[isa::kSp] = layout::kStackTop;
  PrepareCall(guest_, entry, args);
}

void TaManager::SyncOutShared() {
  TeeState& state = tee_.state();
  if (state.shm_bindings.empty()) return;
  for (const auto& r : state.shm_bindings) {
    auto data = r.backing->bytes();
    size_t n = std::min<size_t>(r.length, data.size());
    guest_.memory.Peek(r.guest_vaddr, data.subspan(0, n));
  }
  state.shm_bindings.clear();
  ++state.epoch;
}

InvocationResult TaManager::Collect(const ExecOutcome& outcome,
                                    const Pending* pending) {
  InvocationResult r;
  r.outcome = outcome;
  if (outcome.kind == OutcomeKind::kReturned) {
    r.return_code = guest_.regs[0];
    r.origin = gp::Origin::kTrustedApp;
  } else {
    r.return_code = gp::kErrorTargetDead;
    r.origin = gp::Origin::kTee;
  }
  r.log_lines = std::move(tee_.log());
  tee_.log().clear();
  if (pending != nullptr) {
    SyncOutShared();
    for (int i = 0; i < 4; ++i) {
      uint32_t a = guest_.memory.Peek32(layout::kParamArray + 8 * i).value_or(0);
      uint32_t b = guest_.memory.Peek32(layout::kParamArray + 8 * i + 4).value_or(0);
      ParamSlot& out = r.out_params[i];
      out.a = a;
      out.b = b;
      switch (pending->kinds[i]) {
        case ParamSlot::Kind::kNone:
          break;
        case ParamSlot::Kind::kValue:
          out.kind = ParamSlot::Kind::kValue;
          break;
        case ParamSlot::Kind::kMemref:
        case ParamSlot::Kind::kShm: {
          out.kind = ParamSlot::Kind::kMemref;
          uint32_t n = std::min(b, pending->buffer_len[i]);
          out.bytes.resize(n);
          guest_.memory.Peek(pending->buffers[i], out.bytes);
          out.declared_size = b;
          break;
        }
      }
    }
  }
  return r;
}

InvocationResult TaManager::RunEntry(std::string_view name,
                                     const std::array<uint32_t, 4>& args,
                                     const Pending* pending) {
  auto it = image_.entrypoints.find(std::string(name));
  if (it == image_.entrypoints.end()) {
    if (pending != nullptr) SyncOutShared();
    return TrivialSuccess();
  }
  tee_.log().clear();
  Prepare(it->second, args);
  ExecOutcome outcome = Continue(guest_, hooks_);
  return Collect(outcome, pending);
}

SessionOpenResult TaManager::OpenSession(const GpParamSet& params) {
  SessionOpenResult out;
  if (!created_) {
    out.result = RunEntry(gp::kCreateEntryPoint, {0, 0, 0, 0}, nullptr);
    if (out.result.crashed() || out.result.return_code != gp::kSuccess) {
      return out;
    }
    created_ = true;
  }
  guest_.memory.Poke32(layout::kSessionContextSlot, 0);
  Marshal(params, pending_);
  out.result = RunEntry(gp::kOpenSessionEntryPoint,
                        {params.param_types, layout::kParamArray,
                         layout::kSessionContextSlot, 0},
                        &pending_);
  if (out.result.crashed() || out.result.return_code != gp::kSuccess) {
    return out;
  }
  uint32_t id = next_session_++;
  sessions_[id] = guest_.memory.Peek32(layout::kSessionContextSlot).value_or(0);
  out.session = id;
  return out;
}

void TaManager::BeginInvoke(uint32_t session, uint32_t cmd_id,
                            const GpParamSet& params) {
  auto it = sessions_.find(session);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::kBadHandle, fmt::format("no session {}", session));
  }
  Marshal(params, pending_);
  pending_.session = session;
  tee_.log().clear();
  Prepare(*image_.file.entry(gp::kInvokeCommandEntryPoint),
          {it->second, cmd_id, params.param_types, layout::kParamArray});
}

ExecOutcome TaManager::Resume(bool from_breakpoint) {
  return Continue(guest_, hooks_, from_breakpoint);
}

InvocationResult TaManager::FinishInvoke(const ExecOutcome& outcome) {
  InvocationResult r = Collect(outcome, &pending_);
  if (r.crashed()) dead_[pending_.session] = outcome;
  return r;
}

InvocationResult TaManager::InvokeCommand(uint32_t session, uint32_t cmd_id,
                                          const GpParamSet& params) {
  if (!sessions_.contains(session)) {
    throw Error(ErrorCode::kBadHandle, fmt::format("no session {}", session));
  }
  if (auto it = dead_.find(session); it != dead_.end()) {
    return DeadResult(it->second);
  }
  BeginInvoke(session, cmd_id, params);
  return FinishInvoke(Resume());
}

InvocationResult TaManager::CloseSession(uint32_t session) {
  auto it = sessions_.find(session);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::kBadHandle, fmt::format("no session {}", session));
  }
  uint32_t ctx = it->second;
  sessions_.erase(it);
  if (auto d = dead_.find(session); d != dead_.end()) {
    InvocationResult r = DeadResult(d->second);
    dead_.erase(d);
    return r;
  }
  return RunEntry(gp::kCloseSessionEntryPoint, {ctx, 0, 0, 0}, nullptr);
}

InvocationResult TaManager::Destroy() {
  if (!created_) return TrivialSuccess();
  created_ = false;
  return RunEntry(gp::kDestroyEntryPoint, {0, 0, 0, 0}, nullptr);
}

ManagerSnapshot TaManager::TakeSnapshot() {
  ManagerSnapshot s;
  s.guest = Snapshot(guest_);
  s.tee = std::make_shared<const TeeState>(tee_.state());
  s.sessions = sessions_;
  s.dead = dead_;
  s.next_session = next_session_;
  s.created = created_;
  return s;
}

void TaManager::RestoreSnapshot(const ManagerSnapshot& s) {
  Restore(guest_, s.guest);
  if (tee_.state().epoch != s.tee->epoch) tee_.state() = *s.tee;
  sessions_ = s.sessions;
  dead_ = s.dead;
  next_session_ = s.next_session;
  created_ = s.created;
}

}  // namespace taemu
