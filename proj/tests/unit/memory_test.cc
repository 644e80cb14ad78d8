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

#include "taemu/error.h"
#include "taemu/memory.h"

namespace taemu {
namespace {

TEST(Memory, MapReadWrite) {
  Memory m;
  m.Map(0x10000, 0x2000, kPermRW);
  std::vector<uint8_t> in{1, 2, 3, 4};
  ASSERT_TRUE(m.Write(0x10FFE, in));
  std::vector<uint8_t> out(4);
  ASSERT_TRUE(m.Read(0x10FFE, out));
  EXPECT_EQ(out, in);
  EXPECT_EQ(m.page_count(), 2u);
}

TEST(Memory, DoubleMapThrows) {
  Memory m;
  m.Map(0x10000, 0x1000, kPermRW);
  try {
    m.Map(0x10800, 0x1000, kPermRW);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAddressInUse);
  }
}

TEST(Memory, PermissionsAndFaultAddress) {
  Memory m;
  m.Map(0x10000, 0x1000, kPermR);
  uint8_t b = 1;
  uint32_t fault = 0;
  EXPECT_FALSE(m.Write(0x10010, {&b, 1}, &fault));
  EXPECT_EQ(fault, 0x10010u);
  EXPECT_TRUE(m.Poke(0x10010, {&b, 1}));
  std::vector<uint8_t> out(8);
  EXPECT_FALSE(m.Read(0x10FFC, out, &fault));
  EXPECT_EQ(fault, 0x11000u);
  EXPECT_FALSE(m.IsAccessible(0xFFFFFFF0, 0x20, kPermR));
}

TEST(Memory, SnapshotRestoreIsIdentity) {
  Memory m;
  m.Map(0x10000, 0x3000, kPermRW);
  ASSERT_TRUE(m.Poke32(0x10000, 0x11111111));
  auto snap = m.Snapshot();
  ASSERT_TRUE(m.Poke32(0x10000, 0x22222222));
  ASSERT_TRUE(m.Poke32(0x12000, 0x33333333));
  m.Map(0x40000, 0x1000, kPermRW);
  m.Restore(snap);
  EXPECT_EQ(m.Peek32(0x10000), 0x11111111u);
  EXPECT_EQ(m.Peek32(0x12000), 0u);
  EXPECT_FALSE(m.IsMapped(0x40000));
  // A second restore after more writes works from the same snapshot.
  ASSERT_TRUE(m.Poke32(0x10000, 5));
  m.Restore(snap);
  EXPECT_EQ(m.Peek32(0x10000), 0x11111111u);
}

TEST(Memory, RestoreRemapsUnmappedPages) {
  Memory m;
  m.Map(0x10000, 0x1000, kPermRW);
  m.Poke32(0x10004, 9);
  auto snap = m.Snapshot();
  m.Unmap(0x10000, 0x1000);
  EXPECT_FALSE(m.IsMapped(0x10000));
  m.Restore(snap);
  EXPECT_EQ(m.Peek32(0x10004), 9u);
  EXPECT_EQ(m.PermsAt(0x10004), kPermRW);
}

TEST(Memory, ContentEquals) {
  Memory a, b;
  a.Map(0x1000, 0x1000, kPermRW);
  b.Map(0x1000, 0x1000, kPermRW);
  EXPECT_TRUE(a.ContentEquals(b));
  a.Poke32(0x1000, 1);
  EXPECT_FALSE(a.ContentEquals(b));
}

}  // namespace
}  // namespace taemu
