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

#ifndef TAEMU_LAYOUT_H_
#define TAEMU_LAYOUT_H_

#include <cstdint>

// Fixed guest address-space layout. TA segments may live anywhere outside
// the ranges reserved here.
namespace taemu::layout {

// Import slot i of a dynamically linked TA is rewritten to
// kHookRegionBase + kHookStride * i.
inline constexpr uint32_t kHookRegionBase = 0xF0000000;
inline constexpr uint32_t kHookRegionEnd = 0xF1000000;
inline constexpr uint32_t kHookStride = 16;
// lr value installed by the manager before an entrypoint runs; reaching it
// means the entrypoint returned. It is the last slot of the hook region and
// is therefore never handed out as an import sentinel.
inline constexpr uint32_t kReturnTrampoline = kHookRegionEnd - kHookStride;
inline constexpr uint32_t kMaxImports =
    (kReturnTrampoline - kHookRegionBase) / kHookStride;

constexpr uint32_t SentinelFor(uint32_t import_index) {
  return kHookRegionBase + kHookStride * import_index;
}

constexpr bool InHookRegion(uint32_t addr) {
  return addr >= kHookRegionBase && addr < kHookRegionEnd;
}

// Heap used by the sanitizing allocator (TEE_Malloc, malloc).
inline constexpr uint32_t kHeapBase = 0x20000000;
inline constexpr uint32_t kHeapCap = 16u << 20;

// Parameter arena: TEE_Param array, session-context slot and memref buffers.
inline constexpr uint32_t kParamBase = 0x60000000;
inline constexpr uint32_t kParamSize = 1u << 20;
inline constexpr uint32_t kParamArray = kParamBase;            // 4 x 8 bytes
inline constexpr uint32_t kSessionContextSlot = kParamBase + 0x40;
inline constexpr uint32_t kMemrefArena = kParamBase + 0x1000;

// Full-descending stack.
inline constexpr uint32_t kStackTop = 0x80000000;
inline constexpr uint32_t kStackSize = 1u << 20;
inline constexpr uint32_t kStackBase = kStackTop - kStackSize;

struct Range {
  uint32_t begin;
  uint64_t end;
};

inline constexpr Range kReservedRanges[] = {
    {kHeapBase, static_cast<uint64_t>(kHeapBase) + kHeapCap},
    {kParamBase, static_cast<uint64_t>(kParamBase) + kParamSize},
    {kStackBase, kStackTop},
};

}  // namespace taemu::layout

#endif  // TAEMU_LAYOUT_H_
