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

#include "taemu/memory.h"

#include <algorithm>
#include <atomic>
#include <cstring>

#include <fmt/format.h>

#include "taemu/error.h"

namespace taemu {

namespace {

std::atomic<uint64_t> g_next_snapshot_id{1};

// Inclusive last page of a non-empty range, clamped at the top of the
// address space.
uint32_t LastPage(uint32_t addr, uint64_t size) {
  uint64_t last = static_cast<uint64_t>(addr) + size - 1;
  if (last > 0xFFFFFFFFull) last = 0xFFFFFFFFull;
  return PageOf(static_cast<uint32_t>(last));
}

}  // namespace

Page* Memory::FindPage(uint32_t page_no) const {
  if (cached_page_ != nullptr && cached_page_no_ == page_no) {
    return cached_page_;
  }
  auto it = pages_.find(page_no);
  if (it == pages_.end()) return nullptr;
  cached_page_no_ = page_no;
  cached_page_ = it->second.get();
  return cached_page_;
}

void Memory::InvalidateCache() const { cached_page_ = nullptr; }

void Memory::MarkDirty(uint32_t page_no, Page* page) {
  if (!page->dirty) {
    page->dirty = true;
    dirty_.push_back(page_no);
  }
}

Page* Memory::WritablePage(uint32_t page_no) {
  Page* page = FindPage(page_no);
  if (page != nullptr) MarkDirty(page_no, page);
  return page;
}

void Memory::Map(uint32_t addr, uint32_t size, uint8_t perms) {
  if (size == 0) return;
  uint32_t first = PageOf(addr);
  uint32_t last = LastPage(addr, size);
  for (uint32_t p = first; p <= last; ++p) {
    if (pages_.contains(p)) {
      throw Error(ErrorCode::kAddressInUse,
                  fmt::format("page 0x{:08x} already mapped", p << kPageShift));
    }
    if (p == last) break;
  }
  EnsureMapped(addr, size, perms);
}

void Memory::EnsureMapped(uint32_t addr, uint32_t size, uint8_t perms) {
  if (size == 0) return;
  uint32_t first = PageOf(addr);
  uint32_t last = LastPage(addr, size);
  for (uint32_t p = first;; ++p) {
    if (!pages_.contains(p)) {
      auto page = std::make_unique<Page>();
      page->perms = perms;
      MarkDirty(p, page.get());
      pages_.emplace(p, std::move(page));
    }
    if (p == last) break;
  }
}

void Memory::Unmap(uint32_t addr, uint32_t size) {
  if (size == 0) return;
  uint32_t first = PageOf(addr);
  uint32_t last = LastPage(addr, size);
  for (uint32_t p = first;; ++p) {
    if (pages_.erase(p) > 0) removed_.push_back(p);
    if (p == last) break;
  }
  InvalidateCache();
}

void Memory::Protect(uint32_t addr, uint32_t size, uint8_t perms) {
  if (size == 0) return;
  uint32_t first = PageOf(addr);
  uint32_t last = LastPage(addr, size);
  for (uint32_t p = first;; ++p) {
    if (Page* page = WritablePage(p)) page->perms = perms;
    if (p == last) break;
  }
}

bool Memory::IsMapped(uint32_t addr) const {
  return FindPage(PageOf(addr)) != nullptr;
}

std::optional<uint8_t> Memory::PermsAt(uint32_t addr) const {
  const Page* page = FindPage(PageOf(addr));
  if (page == nullptr) return std::nullopt;
  return page->perms;
}

std::optional<uint32_t> Memory::FirstInaccessible(uint32_t addr, uint64_t size,
                                                  uint8_t perms) const {
  if (size == 0) return std::nullopt;
  uint64_t end = static_cast<uint64_t>(addr) + size;
  uint64_t cursor = addr;
  while (cursor < end) {
    if (cursor > 0xFFFFFFFFull) return 0;  // wrapped past the top
    const Page* page = FindPage(PageOf(static_cast<uint32_t>(cursor)));
    if (page == nullptr || (page->perms & perms) != perms) {
      return static_cast<uint32_t>(cursor);
    }
    cursor = (cursor & ~static_cast<uint64_t>(kPageSize - 1)) + kPageSize;
  }
  return std::nullopt;
}

bool Memory::IsAccessible(uint32_t addr, uint64_t size, uint8_t perms) const {
  if (static_cast<uint64_t>(addr) + size > 0x100000000ull) return false;
  return !FirstInaccessible(addr, size, perms).has_value();
}

bool Memory::Read(uint32_t addr, std::span<uint8_t> out, uint32_t* fault,
                  uint8_t perms) const {
  if (auto bad = FirstInaccessible(addr, out.size(), perms)) {
    if (fault != nullptr) *fault = *bad;
    return false;
  }
  return Peek(addr, out);
}

bool Memory::Write(uint32_t addr, std::span<const uint8_t> in,
                   uint32_t* fault) {
  if (auto bad = FirstInaccessible(addr, in.size(), kPermW)) {
    if (fault != nullptr) *fault = *bad;
    return false;
  }
  return Poke(addr, in);
}

bool Memory::Peek(uint32_t addr, std::span<uint8_t> out) const {
  if (out.empty()) return true;
  if (FirstInaccessible(addr, out.size(), 0)) return false;
  size_t done = 0;
  uint32_t cursor = addr;
  while (done < out.size()) {
    const Page* page = FindPage(PageOf(cursor));
    uint32_t offset = cursor & (kPageSize - 1);
    size_t chunk = std::min<size_t>(kPageSize - offset, out.size() - done);
    std::memcpy(out.data() + done, page->data.data() + offset, chunk);
    done += chunk;
    cursor += static_cast<uint32_t>(chunk);
  }
  return true;
}

bool Memory::Poke(uint32_t addr, std::span<const uint8_t> in) {
  if (in.empty()) return true;
  if (FirstInaccessible(addr, in.size(), 0)) return false;
  size_t done = 0;
  uint32_t cursor = addr;
  while (done < in.size()) {
    Page* page = WritablePage(PageOf(cursor));
    uint32_t offset = cursor & (kPageSize - 1);
    size_t chunk = std::min<size_t>(kPageSize - offset, in.size() - done);
    std::memcpy(page->data.data() + offset, in.data() + done, chunk);
    done += chunk;
    cursor += static_cast<uint32_t>(chunk);
  }
  return true;
}

std::optional<uint32_t> Memory::Peek32(uint32_t addr) const {
  uint8_t buf[4];
  if (!Peek(addr, buf)) return std::nullopt;
  return static_cast<uint32_t>(buf[0]) | (static_cast<uint32_t>(buf[1]) << 8) |
         (static_cast<uint32_t>(buf[2]) << 16) |
         (static_cast<uint32_t>(buf[3]) << 24);
}

bool Memory::Poke32(uint32_t addr, uint32_t value) {
  const uint8_t buf[4] = {
      static_cast<uint8_t>(value), static_cast<uint8_t>(value >> 8),
      static_cast<uint8_t>(value >> 16), static_cast<uint8_t>(value >> 24)};
  return Poke(addr, buf);
}

bool Memory::Fill(uint32_t addr, uint32_t size, uint8_t value) {
  if (size == 0) return true;
  if (FirstInaccessible(addr, size, 0)) return false;
  uint32_t done = 0;
  while (done < size) {
    uint32_t cursor = addr + done;
    Page* page = WritablePage(PageOf(cursor));
    uint32_t offset = cursor & (kPageSize - 1);
    uint32_t chunk = std::min(kPageSize - offset, size - done);
    std::memset(page->data.data() + offset, value, chunk);
    done += chunk;
  }
  return true;
}

const uint8_t* Memory::FetchPointer(uint32_t addr) const {
  const Page* page = FindPage(PageOf(addr));
  if (page == nullptr || (page->perms & kPermX) == 0) return nullptr;
  return page->data.data() + (addr & (kPageSize - 1));
}

std::vector<uint32_t> Memory::MappedPages() const {
  std::vector<uint32_t> out;
  out.reserve(pages_.size());
  for (const auto& [no, page] : pages_) out.push_back(no);
  std::sort(out.begin(), out.end());
  return out;
}

MemorySnapshot Memory::Snapshot() {
  auto copy = std::make_shared<std::unordered_map<uint32_t, Page>>();
  copy->reserve(pages_.size());
  for (auto& [no, page] : pages_) {
    page->dirty = false;
    Page& dst = (*copy)[no];
    dst.data = page->data;
    dst.perms = page->perms;
  }
  dirty_.clear();
  removed_.clear();
  MemorySnapshot snap;
  snap.id_ = g_next_snapshot_id.fetch_add(1);
  snap.pages_ = std::move(copy);
  baseline_id_ = snap.id_;
  return snap;
}

void Memory::Restore(const MemorySnapshot& snapshot) {
  InvalidateCache();
  const auto& saved = *snapshot.pages_;
  if (snapshot.id_ != baseline_id_) {
    pages_.clear();
    for (const auto& [no, page] : saved) {
      auto fresh = std::make_unique<Page>();
      fresh->data = page.data;
      fresh->perms = page.perms;
      pages_.emplace(no, std::move(fresh));
    }
  } else {
    for (uint32_t no : dirty_) {
      auto it = pages_.find(no);
      if (it == pages_.end()) continue;
      auto src = saved.find(no);
      if (src == saved.end()) {
        pages_.erase(it);
        continue;
      }
      it->second->data = src->second.data;
      it->second->perms = src->second.perms;
      it->second->dirty = false;
    }
    for (uint32_t no : removed_) {
      if (pages_.contains(no)) continue;
      auto src = saved.find(no);
      if (src == saved.end()) continue;
      auto fresh = std::make_unique<Page>();
      fresh->data = src->second.data;
      fresh->perms = src->second.perms;
      pages_.emplace(no, std::move(fresh));
    }
  }
  dirty_.clear();
  removed_.clear();
  baseline_id_ = snapshot.id_;
}

bool Memory::ContentEquals(const Memory& other) const {
  if (pages_.size() != other.pages_.size()) return false;
  for (const auto& [no, page] : pages_) {
    auto it = other.pages_.find(no);
    if (it == other.pages_.end()) return false;
    if (it->second->perms != page->perms || it->second->data != page->data) {
      return false;
    }
  }
  return true;
}

}  // namespace taemu
