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

#ifndef TAEMU_ASAN_H_
#define TAEMU_ASAN_H_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>

#include "taemu/emulator.h"
#include "taemu/layout.h"
#include "taemu/memory.h"

namespace taemu::asan {

inline constexpr uint32_t kRedzoneSize = 16;
inline constexpr uint8_t kPoisonByte = 0xA5;
inline constexpr size_t kQuarantineCapacity = 64;

enum class ViolationKind : uint8_t {
  kOobRead,
  kOobWrite,
  kUseAfterFree,
  kWildAccess,
  kDoubleFree,
  kInvalidFree,
};

// "oob-read", "oob-write", "use-after-free", "wild-access", "double-free",
// "invalid-free".
const char* ViolationName(ViolationKind kind);

struct Violation {
  ViolationKind kind = ViolationKind::kWildAccess;
  std::optional<uint32_t> chunk_base;
  // First bad byte relative to chunk_base, or to the access base when the
  // violation is not attributed to a chunk.
  int64_t offset = 0;
  uint32_t address = 0;
  // Guest pc of the allocation / free of the chunk involved, when known.
  std::optional<uint32_t> alloc_pc;
  std::optional<uint32_t> free_pc;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct AccessVerdict {
  std::optional<Violation> violation;
  bool ok() const { return !violation.has_value(); }
};

enum class ChunkState : uint8_t { kAllocated, kFreed };

struct Chunk {
  uint32_t user_size = 0;
  // Bytes between the left and right redzones: user_size rounded up to 8.
  uint32_t capacity = 0;
  ChunkState state = ChunkState::kAllocated;
  uint32_t alloc_pc = 0;
  uint32_t free_pc = 0;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

// Redzone-based allocator over the guest heap range. Layout of a chunk:
//   [left redzone 16][user bytes][slack up to 8-alignment][right redzone 16]
// Redzones and freed user bytes are filled with 0xA5. Freed chunks stay
// classified as freed until they are recycled, and a chunk is only recycled
// after leaving the 64-entry quarantine.
class AsanHeap {
 public:
  explicit AsanHeap(uint32_t base = layout::kHeapBase,
                    uint32_t cap = layout::kHeapCap);

  // Returns 0 when the heap cannot satisfy the request.
  uint32_t Alloc(Memory& memory, uint32_t size, bool zero, uint32_t pc = 0);
  std::optional<Violation> Free(Memory& memory, uint32_t ptr, uint32_t pc = 0);
  AccessVerdict IsAccessValid(const Memory& memory, uint32_t base,
                              uint64_t size, bool is_write) const;

  // Chunk whose redzone-inclusive span contains addr.
  const Chunk* ChunkAt(uint32_t addr, uint32_t* chunk_base = nullptr) const;
  const std::map<uint32_t, Chunk>& chunks() const { return chunks_; }
  const std::deque<uint32_t>& quarantine() const { return quarantine_; }
  uint32_t base() const { return base_; }
  uint32_t cap() const { return cap_; }
  bool InHeap(uint32_t addr) const {
    return addr >= base_ && static_cast<uint64_t>(addr) < static_cast<uint64_t>(base_) + cap_;
  }

  friend bool operator==(const AsanHeap&, const AsanHeap&) = default;

 private:
  uint32_t base_;
  uint32_t cap_;
  uint32_t cursor_ = 0;  // bytes handed out from the bump region
  std::map<uint32_t, Chunk> chunks_;  // keyed by user pointer
  std::deque<uint32_t> quarantine_;
  // Chunks evicted from quarantine, by capacity.
  std::multimap<uint32_t, uint32_t> recyclable_;
};

// Converts a violation into the crash outcome reported to the TA manager.
ExecOutcome ToOutcome(const Violation& v, uint32_t pc);

}  // namespace taemu::asan

#endif  // TAEMU_ASAN_H_
