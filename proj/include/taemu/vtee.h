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

#ifndef TAEMU_VTEE_H_
#define TAEMU_VTEE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taemu/asan.h"
#include "taemu/emulator.h"
#include "taemu/shm.h"
#include "taemu/taelf.h"

namespace taemu {

inline constexpr uint32_t kObjectCap = 1u << 20;
inline constexpr uint64_t kDefaultRngSeed = 0x7A3E5EEDull;

enum class ShmDirection : uint8_t { kIn, kOut, kInOut };

struct SharedRegion {
  uint32_t guest_vaddr = 0;
  uint32_t length = 0;
  std::shared_ptr<ShmBacking> backing;
  ShmDirection direction = ShmDirection::kInOut;

  friend bool operator==(const SharedRegion&, const SharedRegion&) = default;
};

struct OpenObject {
  std::string name;
  uint32_t cursor = 0;

  friend bool operator==(const OpenObject&, const OpenObject&) = default;
};

// Placeholder cipher state. The "cipher" is a repeating-key XOR, not real
// cryptography.
struct CryptoOp {
  uint32_t algorithm = 0;
  uint32_t mode = 0;
  std::vector<uint8_t> key;
  bool key_set = false;

  friend bool operator==(const CryptoOp&, const CryptoOp&) = default;
};

struct TeeState {
  TeeState();

  asan::AsanHeap heap;
  std::map<std::string, std::vector<uint8_t>> objects;
  std::map<uint32_t, OpenObject> open_objects;
  std::map<uint32_t, CryptoOp> crypto_ops;
  std::map<std::string, std::string> properties;
  std::vector<SharedRegion> shm_bindings;
  std::optional<uint32_t> panic_code;
  uint32_t next_handle = 1;
  uint64_t rng_state = kDefaultRngSeed;
  // Bumped on every mutation; snapshots skip the copy when it is unchanged.
  uint64_t epoch = 0;

  uint32_t NewHandle() { return next_handle++; }

  friend bool operator==(const TeeState&, const TeeState&) = default;
};

enum class ApiCategory : uint8_t { kGp, kLibc, kTeeSpecific };
const char* ApiCategoryName(ApiCategory c);

enum class MissingApiPolicy : uint8_t { kCrash, kReturnZero };

class VirtualTee;

// Argument access and checked guest-memory helpers for one hooked call.
// Failures abort the call with a crash outcome attributed to the call site.
class ApiContext {
 public:
  ApiContext(VirtualTee& tee, GuestState& guest, std::string_view api);

  // Argument i: r0-r3, then the stack at sp + 4*(i-4).
  uint32_t Arg(int i);
  uint32_t call_pc() const { return call_pc_; }
  std::string_view api() const { return api_; }

  [[noreturn]] void Abort(ExecOutcome outcome);
  // ASAN-validates [base, base+size) for the access direction.
  void Check(uint32_t base, uint64_t size, bool is_write);
  std::vector<uint8_t> Read(uint32_t addr, uint32_t size);
  void Write(uint32_t addr, std::span<const uint8_t> bytes);
  uint32_t Read32(uint32_t addr);
  void Write32(uint32_t addr, uint32_t value);
  // NUL-terminated string, each byte validated.
  std::string ReadCString(uint32_t addr);

  void SyncIn(uint32_t addr, uint32_t size);
  void SyncOut(uint32_t addr, uint32_t size);

  // Minimal printf: %s %d %u %x %p %c and %%; anything else is copied
  // through literally. Variadic arguments start at argument `first_arg`.
  std::string Format(uint32_t fmt_addr, int first_arg);

  VirtualTee& tee;
  GuestState& guest;
  TeeState& state;

 private:
  std::string_view api_;
  uint32_t call_pc_;
};

// Returns the value placed in r0.
using ApiHandler = std::function<uint32_t(ApiContext&)>;

struct ApiEntry {
  ApiCategory category = ApiCategory::kTeeSpecific;
  ApiHandler handler;
  bool implemented = false;
};

class ApiRegistry {
 public:
  // Built-in registration; replaces any existing entry.
  void Register(const std::string& name, ApiCategory category,
                ApiHandler handler);
  // Analyst extension point. Throws kDuplicateRegistration when the name is
  // already implemented.
  void RegisterTeeSpecific(const std::string& name, ApiHandler handler);
  const ApiEntry* Find(std::string_view name) const;
  // Unknown names are added as unimplemented TEE-specific entries.
  ApiEntry& Resolve(const std::string& name);
  const std::map<std::string, ApiEntry, std::less<>>& entries() const {
    return entries_;
  }

  MissingApiPolicy policy = MissingApiPolicy::kCrash;

 private:
  std::map<std::string, ApiEntry, std::less<>> entries_;
};

enum class HookPhase : uint8_t { kBefore, kAfter };
using HookObserver = std::function<void(std::string_view api, HookPhase)>;

// The virtual TEE: API registry, TEE state, and the glue that binds a loaded
// TA's imports to handlers.
class VirtualTee {
 public:
  // Registers the GP Internal Core and libc subsets.
  VirtualTee();

  ApiRegistry& registry() { return registry_; }
  TeeState& state() { return state_; }
  const TeeState& state() const { return state_; }

  // Installs one hook handler per import slot and per static annotation.
  void Bind(const TaImage& image, HookTable& hooks);

  // Log channel of the TA (printf, tee_log, ...).
  std::vector<std::string>& log() { return log_; }
  void set_observer(HookObserver observer) { observer_ = std::move(observer); }

  // Runs one hooked call: dispatch or missing-API policy, ASAN aborts
  // converted into outcomes.
  std::optional<ExecOutcome> Call(const std::string& api, GuestState& guest);

  // Host-level persistent storage.
  void CreateObject(const std::string& name, std::span<const uint8_t> data);
  uint32_t OpenObject(const std::string& name);
  std::vector<uint8_t> ReadObject(uint32_t handle, uint32_t len);
  void WriteObject(uint32_t handle, std::span<const uint8_t> data);
  void CloseObject(uint32_t handle);
  void DeleteObject(const std::string& name);

  // Host-level placeholder crypto.
  uint32_t AllocateOperation(uint32_t algorithm, uint32_t mode);
  void SetOperationKey(uint32_t handle, std::span<const uint8_t> key);
  // Throws kBadHandle, kKeyNotSet, or kShortBuffer when out_cap < in.size().
  std::vector<uint8_t> CipherDoFinal(uint32_t handle,
                                     std::span<const uint8_t> in,
                                     uint32_t out_cap);
  void FreeOperation(uint32_t handle);

  // Guest-level helpers shared by handlers.
  uint32_t CheckMemoryAccessRights(const GuestState& guest, uint32_t flags,
                                   uint32_t base, uint32_t size) const;
  void FillRandom(std::span<uint8_t> out);

  // Persistent-object store file: name_len u16 | name | data_len u32 | data.
  std::vector<uint8_t> SerializeStore() const;
  void LoadStore(std::span<const uint8_t> bytes);

 private:
  void Touch() { ++state_.epoch; }

  ApiRegistry registry_;
  TeeState state_;
  std::vector<std::string> log_;
  HookObserver observer_;
};

// Example TEE-specific handlers: a shared-memory permission check, a random
// source, and vendor log functions.
void RegisterExampleTeeApis(VirtualTee& tee);

}  // namespace taemu

#endif  // TAEMU_VTEE_H_
