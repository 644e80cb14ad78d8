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

#include "taemu/vtee.h"

#include <algorithm>
#include <cstring>

#include <fmt/format.h>

#include "taemu/bytes.h"
#include "taemu/error.h"
#include "taemu/gp.h"
#include "taemu/isa.h"

namespace taemu {

namespace {

// Unwinds out of a handler; caught by VirtualTee::Call.
struct ApiAbort {
  ExecOutcome outcome;
};

constexpr uint32_t kMaxCString = 1u << 16;

}  // namespace

const char* ApiCategoryName(ApiCategory c) {
  switch (c) {
    case ApiCategory::kGp: return "GP";
    case ApiCategory::kLibc: return "LIBC";
    case ApiCategory::kTeeSpecific: return "TEE_SPECIFIC";
  }
  return "?";
}

TeeState::TeeState() {
  properties = {
      {"gpd.tee.apiversion", "1.1"},
      {"gpd.tee.description", "taemu virtual TEE"},
      {"gpd.tee.deviceID", "7aee0000-0000-4000-8000-000000000001"},
      {"gpd.tee.systemTime.protectionLevel", "100"},
      {"gpd.tee.trustedStorage.antiRollback.protectionLevel", "0"},
      {"gpd.tee.firmware.manufacturer", "taemu"},
      {"gpd.tee.firmware.implementation.version", "1.0.0"},
      {"gpd.client.identity", "00000000-0000-0000-0000-000000000000"},
      {"gpd.ta.appID", "7aee0000-0000-4000-8000-00000000ta01"},
      {"gpd.ta.dataSize", "32768"},
      {"gpd.ta.stackSize", "1048576"},
      {"ro.serialno", "TAEMU0001"},
  };
}

// ---------------------------------------------------------------------------
// ApiContext

ApiContext::ApiContext(VirtualTee& t, GuestState& g, std::string_view api)
    : tee(t),
      guest(g),
      state(t.state()),
      api_(api),
      call_pc_(g.lr() - isa::kInstrSize) {}

uint32_t ApiContext::Arg(int i) {
  if (i < 4) return guest.regs[i];
  uint32_t addr = guest.sp() + 4 * static_cast<uint32_t>(i - 4);
  uint8_t buf[4];
  uint32_t fault = 0;
  if (!guest.memory.Read(addr, buf, &fault)) {
    Abort(ExecOutcome::Crash(CrashClass::kInvalidMemAccess, call_pc_, fault));
  }
  return LoadLe32(buf);
}

void ApiContext::Abort(ExecOutcome outcome) { throw ApiAbort{std::move(outcome)}; }

void ApiContext::Check(uint32_t base, uint64_t size, bool is_write) {
  auto verdict = state.heap.IsAccessValid(guest.memory, base, size, is_write);
  if (verdict.ok()) return;
  const asan::Violation& v = *verdict.violation;
  if (v.kind == asan::ViolationKind::kWildAccess &&
      !state.heap.InHeap(v.address)) {
    // Outside the heap the sanitizer has no extra knowledge; this is the
    // fault the hardware would have raised.
    Abort(ExecOutcome::Crash(CrashClass::kInvalidMemAccess, call_pc_,
                             v.address));
  }
  Abort(asan::ToOutcome(v, call_pc_));
}

std::vector<uint8_t> ApiContext::Read(uint32_t addr, uint32_t size) {
  Check(addr, size, false);
  std::vector<uint8_t> out(size);
  guest.memory.Peek(addr, out);
  return out;
}

void ApiContext::Write(uint32_t addr, std::span<const uint8_t> bytes) {
  Check(addr, bytes.size(), true);
  guest.memory.Poke(addr, bytes);
}

uint32_t ApiContext::Read32(uint32_t addr) { return LoadLe32(Read(addr, 4).data()); }

void ApiContext::Write32(uint32_t addr, uint32_t value) {
  uint8_t b[4];
  StoreLe32(b, value);
  Write(addr, b);
}

std::string ApiContext::ReadCString(uint32_t addr) {
  std::string out;
  for (uint32_t i = 0; i < kMaxCString; ++i) {
    Check(addr + i, 1, false);
    uint8_t c = 0;
    guest.memory.Peek(addr + i, std::span<uint8_t>(&c, 1));
    if (c == 0) break;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

void ApiContext::SyncIn(uint32_t addr, uint32_t size) {
  const uint64_t end = static_cast<uint64_t>(addr) + size;
  for (const auto& r : state.shm_bindings) {
    if (r.direction == ShmDirection::kOut) continue;
    auto data = r.backing->bytes();
    uint64_t r_end = static_cast<uint64_t>(r.guest_vaddr) +
                     std::min<uint64_t>(r.length, data.size());
    uint64_t lo = std::max<uint64_t>(addr, r.guest_vaddr);
    uint64_t hi = std::min(end, r_end);
    if (lo >= hi) continue;
    std::vector<uint8_t> tmp(hi - lo);
    std::memcpy(tmp.data(), data.data() + (lo - r.guest_vaddr), tmp.size());
    guest.memory.Poke(static_cast<uint32_t>(lo), tmp);
  }
}

void ApiContext::SyncOut(uint32_t addr, uint32_t size) {
  const uint64_t end = static_cast<uint64_t>(addr) + size;
  for (const auto& r : state.shm_bindings) {
    if (r.direction == ShmDirection::kIn) continue;
    auto data = r.backing->bytes();
    uint64_t r_end = static_cast<uint64_t>(r.guest_vaddr) +
                     std::min<uint64_t>(r.length, data.size());
    uint64_t lo = std::max<uint64_t>(addr, r.guest_vaddr);
    uint64_t hi = std::min(end, r_end);
    if (lo >= hi) continue;
    std::vector<uint8_t> tmp(hi - lo);
    guest.memory.Peek(static_cast<uint32_t>(lo), tmp);
    std::memcpy(data.data() + (lo - r.guest_vaddr), tmp.data(), tmp.size());
  }
}

std::string ApiContext::Format(uint32_t fmt_addr, int first_arg) {
  std::string f = ReadCString(fmt_addr);
  std::string out;
  int next = first_arg;
  for (size_t i = 0; i < f.size(); ++i) {
    if (f[i] != '%' || i + 1 == f.size()) {
      out.push_back(f[i]);
      continue;
    }
    char d = f[++i];
    switch (d) {
      case 's': out += ReadCString(Arg(next++)); break;
      case 'd': out += fmt::format("{}", static_cast<int32_t>(Arg(next++))); break;
      case 'u': out += fmt::format("{}", Arg(next++)); break;
      case 'x': out += fmt::format("{:x}", Arg(next++)); break;
      case 'p': out += fmt::format("0x{:08x}", Arg(next++)); break;
      case 'c': out.push_back(static_cast<char>(Arg(next++))); break;
      case '%': out.push_back('%'); break;
      default:
        out.push_back('%');
        out.push_back(d);
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ApiRegistry

void ApiRegistry::Register(const std::string& name, ApiCategory category,
                           ApiHandler handler) {
  entries_[name] = ApiEntry{category, std::move(handler), true};
}

void ApiRegistry::RegisterTeeSpecific(const std::string& name,
                                      ApiHandler handler) {
  auto it = entries_.find(name);
  if (it != entries_.end() && it->second.implemented) {
    throw Error(ErrorCode::kDuplicateRegistration,
                fmt::format("{} is already implemented", name));
  }
  entries_[name] = ApiEntry{ApiCategory::kTeeSpecific, std::move(handler), true};
}

const ApiEntry* ApiRegistry::Find(std::string_view name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

ApiEntry& ApiRegistry::Resolve(const std::string& name) {
  auto it = entries_.find(name);
  if (it != entries_.end()) return it->second;
  return entries_.emplace(name, ApiEntry{}).first->second;
}

// ---------------------------------------------------------------------------
// Handlers

namespace {

void AddLogLines(VirtualTee& tee, std::string text) {
  while (!text.empty() && text.back() == '\n') text.pop_back();
  tee.log().push_back(std::move(text));
}

// TEE_MemMove / memmove / memcpy. The order of checks and synchronisation
// points is observable through shared memory and must not change.
uint32_t MemMove(ApiContext& c) {
  uint32_t dest = c.Arg(0);
  uint32_t src = c.Arg(1);
  uint32_t size = c.Arg(2);
  c.Check(dest, size, true);
  c.Check(src, size, false);
  c.SyncIn(src, size);
  std::vector<uint8_t> tmp(size);
  c.guest.memory.Peek(src, tmp);
  c.guest.memory.Poke(dest, tmp);
  c.SyncOut(dest, size);
  return dest;
}

uint32_t MemFill(ApiContext& c) {
  uint32_t dest = c.Arg(0);
  uint32_t value = c.Arg(1);
  uint32_t size = c.Arg(2);
  c.Check(dest, size, true);
  c.guest.memory.Fill(dest, size, static_cast<uint8_t>(value));
  c.SyncOut(dest, size);
  return dest;
}

uint32_t MemCompare(ApiContext& c) {
  uint32_t a = c.Arg(0);
  uint32_t b = c.Arg(1);
  uint32_t size = c.Arg(2);
  c.Check(a, size, false);
  c.Check(b, size, false);
  c.SyncIn(a, size);
  c.SyncIn(b, size);
  std::vector<uint8_t> x(size), y(size);
  c.guest.memory.Peek(a, x);
  c.guest.memory.Peek(b, y);
  int r = size == 0 ? 0 : std::memcmp(x.data(), y.data(), size);
  return static_cast<uint32_t>(r < 0 ? -1 : (r > 0 ? 1 : 0));
}

uint32_t FreeChunk(ApiContext& c, uint32_t ptr) {
  if (auto v = c.state.heap.Free(c.guest.memory, ptr, c.call_pc())) {
    c.Abort(asan::ToOutcome(*v, c.call_pc()));
  }
  return 0;
}

uint32_t Realloc(ApiContext& c, uint32_t ptr, uint32_t size) {
  auto& heap = c.state.heap;
  if (ptr == 0) return heap.Alloc(c.guest.memory, size, false, c.call_pc());
  auto it = heap.chunks().find(ptr);
  if (it == heap.chunks().end() || it->second.state != asan::ChunkState::kAllocated) {
    FreeChunk(c, ptr);  // reports invalid or double free
  }
  uint32_t old_size = heap.chunks().at(ptr).user_size;
  uint32_t fresh = heap.Alloc(c.guest.memory, size, false, c.call_pc());
  if (fresh == 0) return 0;
  std::vector<uint8_t> tmp(std::min(old_size, size));
  c.guest.memory.Peek(ptr, tmp);
  c.guest.memory.Poke(fresh, tmp);
  FreeChunk(c, ptr);
  return fresh;
}

// Invalid handles are programming errors; GP implementations panic.
[[noreturn]] void PanicBadHandle(ApiContext& c) {
  c.state.panic_code = gp::kErrorBadParameters;
  c.Abort(ExecOutcome::Panic(gp::kErrorBadParameters, c.call_pc()));
}

template <typename F>
uint32_t WithHandle(ApiContext& c, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kBadHandle) PanicBadHandle(c);
    throw;
  }
}

void RegisterGp(VirtualTee& tee) {
  auto& r = tee.registry();
  const auto kGp = ApiCategory::kGp;

  r.Register("TEE_Malloc", kGp, [](ApiContext& c) {
    return c.state.heap.Alloc(c.guest.memory, c.Arg(0), c.Arg(1) == 0,
                              c.call_pc());
  });
  r.Register("TEE_Realloc", kGp,
             [](ApiContext& c) { return Realloc(c, c.Arg(0), c.Arg(1)); });
  r.Register("TEE_Free", kGp, [](ApiContext& c) { return FreeChunk(c, c.Arg(0)); });
  r.Register("TEE_MemMove", kGp, MemMove);
  r.Register("TEE_MemFill", kGp, MemFill);
  r.Register("TEE_MemCompare", kGp, MemCompare);
  r.Register("TEE_CheckMemoryAccessRights", kGp, [](ApiContext& c) {
    return c.tee.CheckMemoryAccessRights(c.guest, c.Arg(0), c.Arg(1), c.Arg(2));
  });
  r.Register("TEE_Panic", kGp, [](ApiContext& c) -> uint32_t {
    uint32_t code = c.Arg(0);
    c.state.panic_code = code;
    c.Abort(ExecOutcome::Panic(code, c.call_pc()));
  });
  r.Register("TEE_GetPropertyAsString", kGp, [](ApiContext& c) {
    std::string name = c.ReadCString(c.Arg(1));
    auto it = c.state.properties.find(name);
    if (it == c.state.properties.end()) return gp::kErrorItemNotFound;
    uint32_t buf = c.Arg(2);
    uint32_t len_ptr = c.Arg(3);
    uint32_t cap = c.Read32(len_ptr);
    uint32_t need = static_cast<uint32_t>(it->second.size() + 1);
    c.Write32(len_ptr, need);
    if (cap < need) return gp::kErrorShortBuffer;
    std::vector<uint8_t> bytes(it->second.begin(), it->second.end());
    bytes.push_back(0);
    c.Write(buf, bytes);
    return gp::kSuccess;
  });
  r.Register("TEE_GetPropertyAsU32", kGp, [](ApiContext& c) {
    std::string name = c.ReadCString(c.Arg(1));
    auto it = c.state.properties.find(name);
    if (it == c.state.properties.end()) return gp::kErrorItemNotFound;
    uint32_t value = 0;
    const std::string& s = it->second;
    if (s.empty() || !std::all_of(s.begin(), s.end(), ::isdigit)) {
      return gp::kErrorBadFormat;
    }
    value = static_cast<uint32_t>(std::stoul(s));
    c.Write32(c.Arg(2), value);
    return gp::kSuccess;
  });
  r.Register("TEE_GenerateRandom", kGp, [](ApiContext& c) {
    uint32_t buf = c.Arg(0);
    uint32_t len = c.Arg(1);
    c.Check(buf, len, true);
    std::vector<uint8_t> bytes(len);
    c.tee.FillRandom(bytes);
    c.guest.memory.Poke(buf, bytes);
    c.SyncOut(buf, len);
    return 0u;
  });

  // Persistent objects. Handles are opaque non-zero integers.
  r.Register("TEE_CreatePersistentObject", kGp, [](ApiContext& c) {
    std::vector<uint8_t> id = c.Read(c.Arg(1), c.Arg(2));
    std::string name(id.begin(), id.end());
    uint32_t flags = c.Arg(3);
    uint32_t init = c.Arg(5);
    uint32_t init_len = c.Arg(6);
    uint32_t out = c.Arg(7);
    if (c.state.objects.contains(name) && !(flags & gp::kDataFlagOverwrite)) {
      if (out != 0) c.Write32(out, 0);
      return gp::kErrorAccessConflict;
    }
    if (init_len > kObjectCap) return gp::kErrorStorageNoSpace;
    std::vector<uint8_t> data;
    if (init_len > 0) data = c.Read(init, init_len);
    c.tee.CreateObject(name, data);
    uint32_t handle = c.tee.OpenObject(name);
    if (out != 0) c.Write32(out, handle);
    return gp::kSuccess;
  });
  r.Register("TEE_OpenPersistentObject", kGp, [](ApiContext& c) {
    std::vector<uint8_t> id = c.Read(c.Arg(1), c.Arg(2));
    std::string name(id.begin(), id.end());
    uint32_t out = c.Arg(4);
    if (!c.state.objects.contains(name)) {
      if (out != 0) c.Write32(out, 0);
      return gp::kErrorItemNotFound;
    }
    uint32_t handle = c.tee.OpenObject(name);
    c.Write32(out, handle);
    return gp::kSuccess;
  });
  r.Register("TEE_ReadObjectData", kGp, [](ApiContext& c) {
    return WithHandle(c, [&] {
      uint32_t handle = c.Arg(0);
      uint32_t buf = c.Arg(1);
      uint32_t size = c.Arg(2);
      uint32_t count = c.Arg(3);
      c.Check(buf, size, true);
      std::vector<uint8_t> data = c.tee.ReadObject(handle, size);
      c.Write(buf, data);
      c.SyncOut(buf, static_cast<uint32_t>(data.size()));
      c.Write32(count, static_cast<uint32_t>(data.size()));
      return gp::kSuccess;
    });
  });
  r.Register("TEE_WriteObjectData", kGp, [](ApiContext& c) {
    return WithHandle(c, [&] {
      uint32_t handle = c.Arg(0);
      uint32_t buf = c.Arg(1);
      uint32_t size = c.Arg(2);
      c.SyncIn(buf, size);
      std::vector<uint8_t> data = c.Read(buf, size);
      try {
        c.tee.WriteObject(handle, data);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kStorageFull) return gp::kErrorStorageNoSpace;
        throw;
      }
      return gp::kSuccess;
    });
  });
  r.Register("TEE_CloseObject", kGp, [](ApiContext& c) {
    return WithHandle(c, [&] {
      if (uint32_t handle = c.Arg(0); handle != 0) c.tee.CloseObject(handle);
      return 0u;
    });
  });
  auto close_and_delete = [](ApiContext& c) {
    return WithHandle(c, [&] {
      uint32_t handle = c.Arg(0);
      if (handle == 0) return gp::kSuccess;
      auto it = c.state.open_objects.find(handle);
      if (it == c.state.open_objects.end()) PanicBadHandle(c);
      std::string name = it->second.name;
      c.tee.CloseObject(handle);
      if (c.state.objects.contains(name)) c.tee.DeleteObject(name);
      return gp::kSuccess;
    });
  };
  r.Register("TEE_CloseAndDeletePersistentObject", kGp, close_and_delete);
  r.Register("TEE_CloseAndDeletePersistentObject1", kGp, close_and_delete);

  // Placeholder crypto. TEE_SetOperationKey takes (op, key, key_len) instead
  // of a key object.
  r.Register("TEE_AllocateOperation", kGp, [](ApiContext& c) {
    uint32_t out = c.Arg(0);
    uint32_t handle = c.tee.AllocateOperation(c.Arg(1), c.Arg(2));
    c.Write32(out, handle);
    return gp::kSuccess;
  });
  r.Register("TEE_SetOperationKey", kGp, [](ApiContext& c) {
    return WithHandle(c, [&] {
      uint32_t handle = c.Arg(0);
      std::vector<uint8_t> key = c.Read(c.Arg(1), c.Arg(2));
      c.tee.SetOperationKey(handle, key);
      return gp::kSuccess;
    });
  });
  r.Register("TEE_CipherInit", kGp, [](ApiContext& c) {
    if (!c.state.crypto_ops.contains(c.Arg(0))) PanicBadHandle(c);
    return 0u;
  });
  r.Register("TEE_CipherDoFinal", kGp, [](ApiContext& c) {
    return WithHandle(c, [&]() -> uint32_t {
      uint32_t handle = c.Arg(0);
      uint32_t src = c.Arg(1);
      uint32_t src_len = c.Arg(2);
      uint32_t dst = c.Arg(3);
      uint32_t dst_len_ptr = c.Arg(4);
      uint32_t cap = c.Read32(dst_len_ptr);
      c.SyncIn(src, src_len);
      std::vector<uint8_t> in = c.Read(src, src_len);
      std::vector<uint8_t> out;
      try {
        out = c.tee.CipherDoFinal(handle, in, cap);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kShortBuffer) {
          c.Write32(dst_len_ptr, src_len);
          return gp::kErrorShortBuffer;
        }
        if (e.code() == ErrorCode::kKeyNotSet) return gp::kErrorBadState;
        throw;
      }
      c.Write(dst, out);
      c.SyncOut(dst, static_cast<uint32_t>(out.size()));
      c.Write32(dst_len_ptr, static_cast<uint32_t>(out.size()));
      return gp::kSuccess;
    });
  });
  r.Register("TEE_FreeOperation", kGp, [](ApiContext& c) {
    return WithHandle(c, [&] {
      if (uint32_t handle = c.Arg(0); handle != 0) c.tee.FreeOperation(handle);
      return 0u;
    });
  });
}

void RegisterLibc(VirtualTee& tee) {
  auto& r = tee.registry();
  const auto kLibc = ApiCategory::kLibc;

  r.Register("memcpy", kLibc, MemMove);
  r.Register("memmove", kLibc, MemMove);
  r.Register("memset", kLibc, MemFill);
  r.Register("memcmp", kLibc, MemCompare);
  r.Register("strlen", kLibc, [](ApiContext& c) {
    return static_cast<uint32_t>(c.ReadCString(c.Arg(0)).size());
  });
  r.Register("strcmp", kLibc, [](ApiContext& c) {
    std::string a = c.ReadCString(c.Arg(0));
    std::string b = c.ReadCString(c.Arg(1));
    int v = a.compare(b);
    return static_cast<uint32_t>(v < 0 ? -1 : (v > 0 ? 1 : 0));
  });
  r.Register("strcpy", kLibc, [](ApiContext& c) {
    uint32_t dst = c.Arg(0);
    std::string s = c.ReadCString(c.Arg(1));
    std::vector<uint8_t> bytes(s.begin(), s.end());
    bytes.push_back(0);
    c.Write(dst, bytes);
    return dst;
  });
  r.Register("malloc", kLibc, [](ApiContext& c) {
    return c.state.heap.Alloc(c.guest.memory, c.Arg(0), false, c.call_pc());
  });
  r.Register("calloc", kLibc, [](ApiContext& c) {
    uint64_t total = static_cast<uint64_t>(c.Arg(0)) * c.Arg(1);
    if (total > UINT32_MAX) return 0u;
    return c.state.heap.Alloc(c.guest.memory, static_cast<uint32_t>(total),
                              true, c.call_pc());
  });
  r.Register("realloc", kLibc,
             [](ApiContext& c) { return Realloc(c, c.Arg(0), c.Arg(1)); });
  r.Register("free", kLibc, [](ApiContext& c) { return FreeChunk(c, c.Arg(0)); });
  r.Register("printf", kLibc, [](ApiContext& c) {
    std::string s = c.Format(c.Arg(0), 1);
    auto n = static_cast<uint32_t>(s.size());
    AddLogLines(c.tee, std::move(s));
    return n;
  });
  r.Register("puts", kLibc, [](ApiContext& c) {
    AddLogLines(c.tee, c.ReadCString(c.Arg(0)));
    return 0u;
  });
}

}  // namespace

void RegisterExampleTeeApis(VirtualTee& tee) {
  auto& r = tee.registry();
  r.RegisterTeeSpecific("TEES_IsREESharedMemory", [](ApiContext& c) {
    return c.tee.CheckMemoryAccessRights(
        c.guest, gp::kMemoryAccessRead | gp::kMemoryAccessAnyOwner, c.Arg(0),
        c.Arg(1));
  });
  r.RegisterTeeSpecific("ut_pf_cp_rd_random", [](ApiContext& c) {
    uint32_t buf = c.Arg(0);
    uint32_t len = c.Arg(1);
    c.Check(buf, len, true);
    std::vector<uint8_t> bytes(len);
    c.tee.FillRandom(bytes);
    c.guest.memory.Poke(buf, bytes);
    return 0u;
  });
  auto log = [](ApiContext& c) {
    AddLogLines(c.tee, c.Format(c.Arg(0), 1));
    return 0u;
  };
  r.RegisterTeeSpecific("msee_ta_printf_va", log);
  r.RegisterTeeSpecific("tee_log", log);
}

// ---------------------------------------------------------------------------
// VirtualTee

VirtualTee::VirtualTee() {
  RegisterGp(*this);
  RegisterLibc(*this);
}

void VirtualTee::Bind(const TaImage& image, HookTable& hooks) {
  auto make = [this](const std::string& name) {
    registry_.Resolve(name);
    return [this, name](GuestState& g) { return Call(name, g); };
  };
  for (size_t i = 0; i < image.import_bindings.size(); ++i) {
    uint32_t id = hooks.AddHandler(make(image.import_bindings[i]));
    hooks.sentinel_hooks[static_cast<uint32_t>(i)] = id;
  }
  for (const auto& [vaddr, name] : image.inline_bindings) {
    hooks.AddInlineHook(vaddr, hooks.AddHandler(make(name)));
  }
}

std::optional<ExecOutcome> VirtualTee::Call(const std::string& api,
                                            GuestState& guest) {
  ApiEntry& entry = registry_.Resolve(api);
  Touch();
  if (observer_) observer_(api, HookPhase::kBefore);
  if (!entry.implemented) {
    if (registry_.policy == MissingApiPolicy::kCrash) {
      return ExecOutcome::MissingApi(api, guest.lr() - isa::kInstrSize);
    }
    guest.regs[0] = 0;
  } else {
    ApiContext ctx(*this, guest, api);
    try {
      guest.regs[0] = entry.handler(ctx);
    } catch (ApiAbort& abort) {
      return std::move(abort.outcome);
    }
  }
  if (observer_) observer_(api, HookPhase::kAfter);
  return std::nullopt;
}

void VirtualTee::CreateObject(const std::string& name,
                              std::span<const uint8_t> data) {
  if (data.size() > kObjectCap) {
    throw Error(ErrorCode::kStorageFull, fmt::format("object {} too large", name));
  }
  Touch();
  state_.objects[name].assign(data.begin(), data.end());
  for (auto& [h, o] : state_.open_objects) {
    if (o.name == name) o.cursor = 0;
  }
}

uint32_t VirtualTee::OpenObject(const std::string& name) {
  if (!state_.objects.contains(name)) {
    throw Error(ErrorCode::kItemNotFound, fmt::format("no object {}", name));
  }
  Touch();
  uint32_t handle = state_.NewHandle();
  state_.open_objects[handle] = taemu::OpenObject{name, 0};
  return handle;
}

std::vector<uint8_t> VirtualTee::ReadObject(uint32_t handle, uint32_t len) {
  auto it = state_.open_objects.find(handle);
  if (it == state_.open_objects.end()) {
    throw Error(ErrorCode::kBadHandle, fmt::format("object handle {}", handle));
  }
  auto obj = state_.objects.find(it->second.name);
  if (obj == state_.objects.end()) {
    throw Error(ErrorCode::kBadHandle, "object was deleted");
  }
  Touch();
  const auto& data = obj->second;
  uint32_t cursor = std::min<uint32_t>(it->second.cursor,
                                       static_cast<uint32_t>(data.size()));
  uint32_t n = std::min<uint32_t>(len, static_cast<uint32_t>(data.size()) - cursor);
  it->second.cursor = cursor + n;
  return {data.begin() + cursor, data.begin() + cursor + n};
}

void VirtualTee::WriteObject(uint32_t handle, std::span<const uint8_t> data) {
  auto it = state_.open_objects.find(handle);
  if (it == state_.open_objects.end()) {
    throw Error(ErrorCode::kBadHandle, fmt::format("object handle {}", handle));
  }
  auto obj = state_.objects.find(it->second.name);
  if (obj == state_.objects.end()) {
    throw Error(ErrorCode::kBadHandle, "object was deleted");
  }
  uint64_t end = static_cast<uint64_t>(it->second.cursor) + data.size();
  if (end > kObjectCap) {
    throw Error(ErrorCode::kStorageFull,
                fmt::format("object {} would exceed {} bytes", it->first, kObjectCap));
  }
  Touch();
  auto& bytes = obj->second;
  if (bytes.size() < end) bytes.resize(end, 0);
  std::copy(data.begin(), data.end(), bytes.begin() + it->second.cursor);
  it->second.cursor = static_cast<uint32_t>(end);
}

void VirtualTee::CloseObject(uint32_t handle) {
  if (state_.open_objects.erase(handle) == 0) {
    throw Error(ErrorCode::kBadHandle, fmt::format("object handle {}", handle));
  }
  Touch();
}

void VirtualTee::DeleteObject(const std::string& name) {
  if (state_.objects.erase(name) == 0) {
    throw Error(ErrorCode::kItemNotFound, fmt::format("no object {}", name));
  }
  Touch();
  std::erase_if(state_.open_objects,
                [&](const auto& kv) { return kv.second.name == name; });
}

uint32_t VirtualTee::AllocateOperation(uint32_t algorithm, uint32_t mode) {
  Touch();
  uint32_t handle = state_.NewHandle();
  state_.crypto_ops[handle] = CryptoOp{algorithm, mode, {}, false};
  return handle;
}

void VirtualTee::SetOperationKey(uint32_t handle, std::span<const uint8_t> key) {
  auto it = state_.crypto_ops.find(handle);
  if (it == state_.crypto_ops.end()) {
    throw Error(ErrorCode::kBadHandle, fmt::format("operation handle {}", handle));
  }
  Touch();
  it->second.key.assign(key.begin(), key.end());
  it->second.key_set = !key.empty();
}

std::vector<uint8_t> VirtualTee::CipherDoFinal(uint32_t handle,
                                               std::span<const uint8_t> in,
                                               uint32_t out_cap) {
  auto it = state_.crypto_ops.find(handle);
  if (it == state_.crypto_ops.end()) {
    throw Error(ErrorCode::kBadHandle, fmt::format("operation handle {}", handle));
  }
  const CryptoOp& op = it->second;
  if (!op.key_set) throw Error(ErrorCode::kKeyNotSet, "no key set");
  if (out_cap < in.size()) {
    throw Error(ErrorCode::kShortBuffer,
                fmt::format("need {} bytes, have {}", in.size(), out_cap));
  }
  std::vector<uint8_t> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] ^ op.key[i % op.key.size()];
  return out;
}

void VirtualTee::FreeOperation(uint32_t handle) {
  if (state_.crypto_ops.erase(handle) == 0) {
    throw Error(ErrorCode::kBadHandle, fmt::format("operation handle {}", handle));
  }
  Touch();
}

uint32_t VirtualTee::CheckMemoryAccessRights(const GuestState& guest,
                                             uint32_t flags, uint32_t base,
                                             uint32_t size) const {
  if (size == 0) return gp::kSuccess;
  uint8_t perms = 0;
  if (flags & gp::kMemoryAccessRead) perms |= kPermR;
  if (flags & gp::kMemoryAccessWrite) perms |= kPermW;
  return guest.memory.IsAccessible(base, size, perms) ? gp::kSuccess
                                                       : gp::kErrorAccessDenied;
}

void VirtualTee::FillRandom(std::span<uint8_t> out) {
  Touch();
  uint64_t& s = state_.rng_state;
  for (auto& b : out) {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    b = static_cast<uint8_t>(s >> 32);
  }
}

std::vector<uint8_t> VirtualTee::SerializeStore() const {
  ByteWriter w;
  for (const auto& [name, data] : state_.objects) {
    w.U16(static_cast<uint16_t>(name.size()));
    w.Str(name);
    w.U32(static_cast<uint32_t>(data.size()));
    w.Bytes(data);
  }
  return w.Take();
}

void VirtualTee::LoadStore(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  std::map<std::string, std::vector<uint8_t>> objects;
  while (r.remaining() > 0) {
    auto name_len = r.U16();
    auto name = name_len ? r.Str(*name_len) : std::nullopt;
    auto data_len = name ? r.U32() : std::nullopt;
    auto data = data_len ? r.Bytes(*data_len) : std::nullopt;
    if (!data) throw Error(ErrorCode::kParseError, "truncated object store");
    objects[*name].assign(data->begin(), data->end());
  }
  Touch();
  state_.objects = std::move(objects);
  state_.open_objects.clear();
}

}  // namespace taemu
