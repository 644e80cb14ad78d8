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

#include "taemu/asan.h"

#include <algorithm>

namespace taemu::asan {

const char* ViolationName(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kOobRead: return "oob-read";
    case ViolationKind::kOobWrite: return "oob-write";
    case ViolationKind::kUseAfterFree: return "use-after-free";
    case ViolationKind::kWildAccess: return "wild-access";
    case ViolationKind::kDoubleFree: return "double-free";
    case ViolationKind::kInvalidFree: return "invalid-free";
  }
  return "unknown";
}

AsanHeap::AsanHeap(uint32_t base, uint32_t cap) : base_(base), cap_(cap) {}

uint32_t AsanHeap::Alloc(Memory& memory, uint32_t size, bool zero,
                         uint32_t pc) {
  const uint64_t capacity = (static_cast<uint64_t>(size) + 7) & ~uint64_t{7};
  uint32_t ptr = 0;
  if (auto it = recyclable_.find(static_cast<uint32_t>(capacity));
      capacity <= cap_ && it != recyclable_.end()) {
    ptr = it->second;
    recyclable_.erase(it);
  } else {
    const uint64_t total = kRedzoneSize + capacity + kRedzoneSize;
    if (static_cast<uint64_t>(cursor_) + total > cap_) return 0;
    uint32_t start = base_ + cursor_;
    memory.EnsureMapped(start, static_cast<uint32_t>(total), kPermRW);
    ptr = start + kRedzoneSize;
    cursor_ += static_cast<uint32_t>(total);
  }
  const auto cap32 = static_cast<uint32_t>(capacity);
  memory.Fill(ptr - kRedzoneSize, kRedzoneSize, kPoisonByte);
  memory.Fill(ptr + size, cap32 - size + kRedzoneSize, kPoisonByte);
  if (zero) memory.Fill(ptr, size, 0);
  chunks_[ptr] = Chunk{size, cap32, ChunkState::kAllocated, pc, 0};
  return ptr;
}

std::optional<Violation> AsanHeap::Free(Memory& memory, uint32_t ptr,
                                        uint32_t pc) {
  if (ptr == 0) return std::nullopt;
  auto it = chunks_.find(ptr);
  if (it == chunks_.end()) {
    Violation v;
    v.kind = ViolationKind::kInvalidFree;
    v.address = ptr;
    uint32_t base = 0;
    if (const Chunk* c = ChunkAt(ptr, &base)) {
      v.chunk_base = base;
      v.offset = static_cast<int64_t>(ptr) - base;
      v.alloc_pc = c->alloc_pc;
    }
    return v;
  }
  Chunk& chunk = it->second;
  if (chunk.state == ChunkState::kFreed) {
    Violation v;
    v.kind = ViolationKind::kDoubleFree;
    v.address = ptr;
    v.chunk_base = ptr;
    v.alloc_pc = chunk.alloc_pc;
    v.free_pc = chunk.free_pc;
    return v;
  }
  chunk.state = ChunkState::kFreed;
  chunk.free_pc = pc;
  memory.Fill(ptr, chunk.capacity, kPoisonByte);
  quarantine_.push_back(ptr);
  if (quarantine_.size() > kQuarantineCapacity) {
    uint32_t evicted = quarantine_.front();
    quarantine_.pop_front();
    recyclable_.emplace(chunks_.at(evicted).capacity, evicted);
  }
  return std::nullopt;
}

const Chunk* AsanHeap::ChunkAt(uint32_t addr, uint32_t* chunk_base) const {
  if (chunks_.empty()) return nullptr;
  auto it = chunks_.upper_bound(addr + kRedzoneSize);
  if (it == chunks_.begin()) return nullptr;
  --it;
  const uint64_t lo = static_cast<uint64_t>(it->first) - kRedzoneSize;
  const uint64_t hi =
      static_cast<uint64_t>(it->first) + it->second.capacity + kRedzoneSize;
  if (addr < lo || addr >= hi) return nullptr;
  if (chunk_base != nullptr) *chunk_base = it->first;
  return &it->second;
}

AccessVerdict AsanHeap::IsAccessValid(const Memory& memory, uint32_t base,
                                      uint64_t size, bool is_write) const {
  if (size == 0) return {};
  const uint64_t end = static_cast<uint64_t>(base) + size;
  const uint8_t perm = is_write ? kPermW : kPermR;
  auto wild = [&](uint64_t at) {
    Violation v;
    v.kind = ViolationKind::kWildAccess;
    v.address = static_cast<uint32_t>(at);
    v.offset = static_cast<int64_t>(at) - base;
    return AccessVerdict{v};
  };
  if (end > 0x100000000ull) return wild(base);

  const uint64_t heap_begin = base_;
  const uint64_t heap_end = heap_begin + cap_;
  uint64_t pos = base;
  if (pos < heap_begin) {
    uint64_t stop = std::min(end, heap_begin);
    if (auto bad = memory.FirstInaccessible(static_cast<uint32_t>(pos),
                                            stop - pos, perm)) {
      return wild(*bad);
    }
    pos = stop;
  }
  if (pos < end && pos < heap_end) {
    uint32_t chunk_base = 0;
    const Chunk* c = ChunkAt(static_cast<uint32_t>(pos), &chunk_base);
    if (c == nullptr) return wild(pos);
    Violation v;
    v.chunk_base = chunk_base;
    v.alloc_pc = c->alloc_pc;
    if (c->state == ChunkState::kFreed) {
      v.kind = ViolationKind::kUseAfterFree;
      v.free_pc = c->free_pc;
    } else {
      const uint64_t user_end = static_cast<uint64_t>(chunk_base) + c->user_size;
      if (pos >= chunk_base && pos < user_end) {
        if (end <= user_end) return {};
        pos = user_end;
      }
      v.kind = is_write ? ViolationKind::kOobWrite : ViolationKind::kOobRead;
    }
    v.address = static_cast<uint32_t>(pos);
    v.offset = static_cast<int64_t>(pos) - chunk_base;
    return AccessVerdict{v};
  }
  if (pos < end) {
    if (auto bad = memory.FirstInaccessible(static_cast<uint32_t>(pos),
                                            end - pos, perm)) {
      return wild(*bad);
    }
  }
  return {};
}

ExecOutcome ToOutcome(const Violation& v, uint32_t pc) {
  ExecOutcome o = ExecOutcome::Crash(CrashClass::kAsanViolation, pc, v.address);
  o.detail = ViolationName(v.kind);
  o.chunk_base = v.chunk_base;
  o.offset = v.offset;
  return o;
}

}  // namespace taemu::asan
