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

#include <filesystem>

#include "../common/test_util.h"
#include "taemu/fuzz.h"

namespace taemu {
namespace {

using testing::Fixture;
using testing::ReadData;
using testing::TempDir;

FuzzTarget Target(const std::string& ta, const std::string& harness) {
  return FuzzTarget(Fixture(ta).file, nullptr,
                    ParseHarness(ReadData("harness/" + harness + ".txt")));
}

TEST(Fuzz, FindsOobWrite) {
  auto t = Target("oob", "oob");
  FuzzOptions o;
  o.seed = 1;
  o.iterations = 200'000;
  o.stop_after_crashes = 1;
  auto r = FuzzLoop(t, o);
  ASSERT_EQ(r.crashes.size(), 1u);
  EXPECT_EQ(r.crashes[0].triage, Triage::kBug);
  EXPECT_EQ(r.crashes[0].outcome.detail, "oob-write");
  auto replay = Replay(t, r.crashes[0].input);
  ASSERT_TRUE(replay);
  EXPECT_EQ(DedupKey(replay->outcome), r.crashes[0].dedup_key);
}

TEST(Fuzz, MissingApiTriage) {
  auto t = Target("missing", "missing");
  FuzzOptions o;
  o.iterations = 200;
  auto r = FuzzLoop(t, o);
  ASSERT_FALSE(r.crashes.empty());
  for (const auto& c : r.crashes) EXPECT_EQ(c.triage, Triage::kMissingApi);
  EXPECT_EQ(r.stats.crashes_bug, 0u);
  EXPECT_EQ(r.stats.crashes_missing_api, r.crashes.size());
}

TEST(Fuzz, HangsAreCountedNotStored) {
  ManagerOptions mo;
  mo.instruction_budget = 5'000;
  FuzzTarget t(Fixture("loop").file, nullptr, ParseHarness(ReadData("harness/loop.txt")), mo);
  FuzzOptions o;
  o.iterations = 100;
  auto r = FuzzLoop(t, o);
  EXPECT_GT(r.stats.hangs, 0u);
  EXPECT_TRUE(r.crashes.empty());
}

TEST(Fuzz, DeterministicForSeed) {
  TempDir a("fa"), b("fb");
  for (const auto* dir : {&a, &b}) {
    auto t = Target("oob", "oob");
    FuzzOptions o;
    o.seed = 9;
    o.iterations = 20000;
    o.out_dir = dir->str();
    FuzzLoop(t, o);
  }
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    auto rel = std::filesystem::relative(e.path(), a.path());
    if (rel == "stats.txt") continue;
    EXPECT_EQ(testing::ReadBytes(e.path()), testing::ReadBytes(b.path() / rel)) << rel;
  }
}

TEST(Fuzz, CorpusGrowsCoverage) {
  auto t = Target("oob", "oob");
  FuzzOptions o;
  o.iterations = 20000;
  auto r = FuzzLoop(t, o);
  EXPECT_GE(r.corpus.size(), 2u);
  EXPECT_GT(r.stats.blocks, 0u);
}

TEST(Fuzz, CrashFileRoundTrip) {
  CrashReport rep;
  rep.outcome = ExecOutcome::MissingApi("tee_get_key", 0x10030);
  rep.dedup_key = DedupKey(rep.outcome);
  rep.triage = TriageOf(rep.outcome);
  rep.input = {0, 1, 2, '\n', 0xFF};
  auto text = FormatCrashFile(rep);
  std::vector<uint8_t> bytes(text.begin(), text.end());
  auto parsed = ParseCrashFile(bytes);
  EXPECT_EQ(parsed.dedup_key, "MissingApi:00010030:tee_get_key");
  EXPECT_EQ(parsed.input, rep.input);
  std::vector<uint8_t> raw{'O', 'B'};
  EXPECT_EQ(ParseCrashFile(raw).input, raw);
}

TEST(Fuzz, StatsLineFormat) {
  FuzzStats s;
  s.execs = 10;
  s.execs_per_sec = 2.5;
  s.blocks = 3;
  s.crashes_bug = 1;
  EXPECT_EQ(FormatStats(s),
            "execs, execs_per_sec, blocks, crashes_bug, crashes_missing_api\n"
            "10, 2.50, 3, 1, 0\n");
}

TEST(Coverage, IdentityIsFullAfterOneRun) {
  auto t = Target("identity", "identity");
  auto none = MeasureCoverage(t, {});
  EXPECT_EQ(none.hit, 0u);
  EXPECT_EQ(none.percent, 0.0);
  auto one = MeasureCoverage(t, {{0}});
  EXPECT_EQ(one.hit, one.total);
  EXPECT_EQ(one.percent, 100.0);
}

TEST(Coverage, DeadBranchUntilFound) {
  auto t = Target("oob", "oob");
  auto miss = MeasureCoverage(t, {{'x', 'y'}});
  EXPECT_LT(miss.percent, 100.0);
  auto hit = MeasureCoverage(t, {{'x', 'y'}, {'O', 'B', 1}});
  EXPECT_GT(hit.hit, miss.hit);
}

}  // namespace
}  // namespace taemu
