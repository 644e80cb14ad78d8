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

#ifndef TAEMU_MEMORY_H_
#define TAEMU_MEMORY_H_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace taemu {

// ELF-compatible permission bits.
inline constexpr uint8_t kPermX = 0x1;
inline constexpr uint8_t kPermW = 0x2;
inline constexpr uint8_t kPermR = 0x4;
inline constexpr uint8_t kPermRW = kPermR | kPermW;
inline constexpr uint8_t kPermRX = kPermR | kPermX;
inline constexpr uint8_t kPermRWX = kPermR | kPermW | kPermX;

inline constexpr uint32_t kPageSize = 4096;
inline constexpr uint32_t kPageShift = 12;

constexpr uint32_t PageOf(uint32_t addr) { return addr >> kPageShift; }

struct Page {
  std::array<uint8_t, kPageSize> data{};
  uint8_t perms = 0;
  bool dirty = false;
};

class MemorySnapshot;

// Sparse 32-bit guest address space built from 4 KiB pages.
//
// Guest accesses (Read/Write) honour page permissions. Host accesses
// (Peek/Poke) only require the page to be mapped; they are used by the
// loader, the heap sanitizer and the debugger.
//
// Every page modification since the last Snapshot()/Restore() is recorded so
// that Restore() only copies the pages that changed.
class Memory {
 public:
  Memory() = default;
  Memory(const Memory&) = delete;
  Memory& operator=(const Memory&) = delete;

  // Maps every page overlapping [addr, addr + size). Throws kAddressInUse if
  // any of them is already mapped.
  void Map(uint32_t addr, uint32_t size, uint8_t perms);
  // Maps the missing pages of the range, leaving mapped ones untouched.
  void EnsureMapped(uint32_t addr, uint32_t size, uint8_t perms);
  void Unmap(uint32_t addr, uint32_t size);
  void Protect(uint32_t addr, uint32_t size, uint8_t perms);

  bool IsMapped(uint32_t addr) const;
  // True when every byte of the range is mapped with at least `perms`.
  // Ranges that wrap past 2^32 are never accessible.
  bool IsAccessible(uint32_t addr, uint64_t size, uint8_t perms) const;
  // Address of the first byte that is not accessible, if any.
  std::optional<uint32_t> FirstInaccessible(uint32_t addr, uint64_t size,
                                            uint8_t perms) const;
  std::optional<uint8_t> PermsAt(uint32_t addr) const;

  // Guest accesses. On failure `fault` receives the first bad address and
  // no byte is transferred.
  bool Read(uint32_t addr, std::span<uint8_t> out, uint32_t* fault = nullptr,
            uint8_t perms = kPermR) const;
  bool Write(uint32_t addr, std::span<const uint8_t> in,
             uint32_t* fault = nullptr);

  // Host accesses.
  bool Peek(uint32_t addr, std::span<uint8_t> out) const;
  bool Poke(uint32_t addr, std::span<const uint8_t> in);
  std::optional<uint32_t> Peek32(uint32_t addr) const;
  bool Poke32(uint32_t addr, uint32_t value);
  bool Fill(uint32_t addr, uint32_t size, uint8_t value);

  // Fast path for instruction fetch: pointer to 8 executable bytes at an
  // 8-aligned address, or null.
  const uint8_t* FetchPointer(uint32_t addr) const;

  size_t page_count() const { return pages_.size(); }
  // Page numbers in ascending order.
  std::vector<uint32_t> MappedPages() const;

  MemorySnapshot Snapshot();
  void Restore(const MemorySnapshot& snapshot);
  // Full-content comparison, used by determinism tests.
  bool ContentEquals(const Memory& other) const;

 private:
  Page* FindPage(uint32_t page_no) const;
  Page* WritablePage(uint32_t page_no);
  void MarkDirty(uint32_t page_no, Page* page);
  void InvalidateCache() const;

  std::unordered_map<uint32_t, std::unique_ptr<Page>> pages_;
  std::vector<uint32_t> dirty_;
  // Page numbers unmapped since the last snapshot.
  std::vector<uint32_t> removed_;
  uint64_t baseline_id_ = 0;

  mutable uint32_t cached_page_no_ = 0;
  mutable Page* cached_page_ = nullptr;
};

class MemorySnapshot {
 public:
  MemorySnapshot() = default;

 private:
  friend class Memory;
  uint64_t id_ = 0;
  std::shared_ptr<const std::unordered_map<uint32_t, Page>> pages_;
};

}  // namespace taemu

#endif  // TAEMU_MEMORY_H_
