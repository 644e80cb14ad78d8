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

#include <gtest/gtest.h>

#include <random>

#include "../common/oracles.h"
#include "taemu/asan.h"

namespace taemu::asan {
namespace {

class AsanTest : public ::testing::Test {
 protected:
  Memory mem;
  AsanHeap heap;
};

TEST_F(AsanTest, RedzonesPoisoned) {
  uint32_t p = heap.Alloc(mem, 8, false);
  ASSERT_NE(p, 0u);
  EXPECT_EQ(p % 8, 0u);
  std::vector<uint8_t> left(16), right(16);
  mem.Peek(p - 16, left);
  mem.Peek(p + 8, right);
  EXPECT_EQ(left, std::vector<uint8_t>(16, kPoisonByte));
  EXPECT_EQ(right, std::vector<uint8_t>(16, kPoisonByte));
}

TEST_F(AsanTest, AllocationsDisjointIncludingRedzones) {
  uint32_t a = heap.Alloc(mem, 13, true);
  uint32_t b = heap.Alloc(mem, 5, true);
  uint64_t a_end = uint64_t{a} + 16 + 16;  // capacity 16 + right redzone
  EXPECT_LE(a_end, uint64_t{b} - 16);
}

TEST_F(AsanTest, ExhaustionReturnsNull) {
  EXPECT_EQ(heap.Alloc(mem, heap.cap() + 1, false), 0u);
}

TEST_F(AsanTest, FreeClasses) {
  uint32_t p = heap.Alloc(mem, 8, false);
  EXPECT_FALSE(heap.Free(mem, p).has_value());
  auto df = heap.Free(mem, p);
  ASSERT_TRUE(df);
  EXPECT_EQ(df->kind, ViolationKind::kDoubleFree);
  uint32_t q = heap.Alloc(mem, 8, false);
  auto inv = heap.Free(mem, q + 1);
  ASSERT_TRUE(inv);
  EXPECT_EQ(inv->kind, ViolationKind::kInvalidFree);
  EXPECT_FALSE(heap.Free(mem, 0).has_value());
}

TEST_F(AsanTest, AccessVerdicts) {
  uint32_t p = heap.Alloc(mem, 4, false);
  EXPECT_TRUE(heap.IsAccessValid(mem, p, 4, true).ok());
  auto v = heap.IsAccessValid(mem, p, 5, true);
  ASSERT_FALSE(v.ok());
  EXPECT_EQ(v.violation->kind, ViolationKind::kOobWrite);
  EXPECT_EQ(v.violation->offset, 4);
  v = heap.IsAccessValid(mem, p - 1, 2, false);
  ASSERT_FALSE(v.ok());
  EXPECT_EQ(v.violation->kind, ViolationKind::kOobRead);
  EXPECT_EQ(v.violation->offset, -1);
  heap.Free(mem, p);
  v = heap.IsAccessValid(mem, p, 1, false);
  ASSERT_FALSE(v.ok());
  EXPECT_EQ(v.violation->kind, ViolationKind::kUseAfterFree);
  v = heap.IsAccessValid(mem, 0xDEAD0000, 4, false);
  ASSERT_FALSE(v.ok());
  EXPECT_EQ(v.violation->kind, ViolationKind::kWildAccess);
}

TEST_F(AsanTest, QuarantineHoldsLast64Frees) {
  std::vector<uint32_t> ptrs;
  for (int i = 0; i < 64; ++i) ptrs.push_back(heap.Alloc(mem, 8, false));
  for (uint32_t p : ptrs) heap.Free(mem, p);
  // Nothing has been evicted yet, so every new chunk is fresh.
  for (int i = 0; i < 10; ++i) {
    uint32_t n = heap.Alloc(mem, 8, false);
    EXPECT_EQ(std::count(ptrs.begin(), ptrs.end(), n), 0);
  }
  for (uint32_t p : ptrs) {
    EXPECT_EQ(heap.IsAccessValid(mem, p, 1, false).violation->kind,
              ViolationKind::kUseAfterFree);
  }
}

TEST_F(AsanTest, EvictedChunkIsRecycled) {
  std::vector<uint32_t> ptrs;
  for (int i = 0; i < 65; ++i) ptrs.push_back(heap.Alloc(mem, 8, false));
  for (uint32_t p : ptrs) heap.Free(mem, p);
  EXPECT_EQ(heap.Alloc(mem, 8, false), ptrs[0]);
}

TEST_F(AsanTest, NonHeapMappedRegionsFollowPermissions) {
  mem.Map(0x10000, 0x1000, kPermR);
  EXPECT_TRUE(heap.IsAccessValid(mem, 0x10000, 16, false).ok());
  EXPECT_FALSE(heap.IsAccessValid(mem, 0x10000, 16, true).ok());
}

// Randomized alloc/free/access sequences against the interval oracle.
TEST(AsanOracle, RandomSequences) {
  std::mt19937_64 rng(77);
  for (int seq = 0; seq < 500; ++seq) {
    Memory mem;
    AsanHeap heap(layout::kHeapBase, 1u << 16);
    testing::HeapOracle oracle(layout::kHeapBase, 1u << 16);
    std::vector<uint32_t> ptrs;
    int ops = 1 + static_cast<int>(rng() % 200);
    for (int i = 0; i < ops; ++i) {
      int kind = static_cast<int>(rng() % 3);
      if (kind == 0 || ptrs.empty()) {
        uint32_t size = static_cast<uint32_t>(rng() % 300);
        uint32_t p = heap.Alloc(mem, size, rng() % 2);
        ASSERT_EQ(oracle.OnAlloc(size, p), "");
        if (p) ptrs.push_back(p);
      } else if (kind == 1) {
        uint32_t p = ptrs[rng() % ptrs.size()] + (rng() % 8 == 0 ? 8 : 0);
        auto expect = oracle.OnFree(p);
        auto got = heap.Free(mem, p);
        ASSERT_EQ(expect.has_value(), got.has_value());
        if (got) ASSERT_EQ(got->kind, *expect);
      } else {
        uint32_t p = ptrs[rng() % ptrs.size()];
        int32_t delta = static_cast<int32_t>(rng() % 64) - 24;
        uint32_t base = p + delta;
        uint32_t size = static_cast<uint32_t>(rng() % 48);
        bool w = rng() % 2;
        auto expect = oracle.Access(base, size, w);
        auto got = heap.IsAccessValid(mem, base, size, w);
        ASSERT_EQ(expect.ok, got.ok()) << base << " " << size;
        if (!got.ok()) {
          ASSERT_EQ(got.violation->kind, expect.kind);
          ASSERT_EQ(got.violation->address, expect.address);
          ASSERT_EQ(got.violation->chunk_base, expect.chunk);
        }
      }
    }
  }
}

}  // namespace
}  // namespace taemu::asan
