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
#include "../common/test_util.h"
#include "taemu/error.h"
#include "taemu/greedy.h"

namespace taemu {
namespace {

using testing::ReadData;

Icfg Single(const std::string& text) {
  auto g = ParseIcfg(text);
  EXPECT_EQ(g.size(), 1u);
  return g.at(0);
}

TEST(Icfg, ChainReachability) {
  auto g = Single(ReadData("icfg/chain.icfg"));
  EXPECT_EQ(g.CountableBlocks(), 2u);
  EXPECT_EQ(ReachableBlocks(g, {}, {"t"}), 0u);
  EXPECT_EQ(ReachableBlocks(g, {"t"}, {"t"}), 2u);
}

TEST(Icfg, ChainRanking) {
  auto g = Single(ReadData("icfg/chain.icfg"));
  auto r = GreedyRank(g, {"t"});
  EXPECT_EQ(r.baseline, 0u);
  ASSERT_EQ(r.steps.size(), 1u);
  EXPECT_EQ(r.steps[0].api, "t");
  EXPECT_EQ(r.steps[0].gain, 2u);
  EXPECT_EQ(r.steps[0].cumulative, 2u);
  EXPECT_EQ(EmitReport(r, ReportFormat::kCurve), "implemented,pct\n0,0.000000\n1,1.000000\n");
}

TEST(Icfg, BranchesRanking) {
  auto g = Single(ReadData("icfg/branches.icfg"));
  auto r = GreedyRank(g, {"t1", "t2"});
  ASSERT_EQ(r.steps.size(), 2u);
  EXPECT_EQ(r.steps[0].api, "t1");
  EXPECT_EQ(r.steps[0].gain, 5u);
  EXPECT_EQ(r.steps[1].api, "t2");
  EXPECT_EQ(r.steps[1].gain, 3u);
}

TEST(Icfg, DemoRanking) {
  auto tas = ParseIcfg(ReadData("icfg/demo.icfg"));
  ASSERT_EQ(tas.size(), 2u);
  auto merged = Merge(tas, MergeLevel::kTee);
  EXPECT_EQ(merged.CountableBlocks(), 12u);
  auto u = Classify(merged, ParseApiList(ReadData("gp_apis.txt")),
                    ParseApiList(ReadData("libc_apis.txt")));
  EXPECT_EQ(u.tee, (std::set<std::string>{"msee_ta_printf_va", "tee_get_key",
                                          "tee_secure_clock", "ut_pf_cp_rd_random"}));
  auto r = GreedyRank(merged, u.tee);
  EXPECT_EQ(r.baseline, 3u);
  std::vector<std::string> order;
  for (const auto& s : r.steps) order.push_back(s.api);
  EXPECT_EQ(order, (std::vector<std::string>{"tee_get_key", "ut_pf_cp_rd_random",
                                             "msee_ta_printf_va", "tee_secure_clock"}));
  EXPECT_EQ(r.threshold_90, 3u);
}

TEST(Icfg, EmptyResultCsvIsHeaderOnly) {
  EXPECT_EQ(EmitReport(GreedyResult{}, ReportFormat::kCsv), "rank,api,gain,cumulative,pct\n");
}

TEST(Icfg, ParseErrors) {
  try {
    ParseIcfg("TA a\nBLOCK b1\nEDGE b1 b9\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDanglingEdge);
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(ParseIcfg("BLOCK b1\n"), Error);
  EXPECT_THROW(ParseIcfg("TA a\nBLOCK b1\nBLOCK b1\n"), Error);
  EXPECT_THROW(ParseIcfg("TA a\nTA a\n"), Error);
  EXPECT_THROW(ParseIcfg("TA a\nENTRY nope TA_InvokeCommandEntryPoint\n"), Error);
}

TEST(Icfg, GlobalMergeKeepsPerTeeRoots) {
  auto tas = ParseIcfg(ReadData("icfg/demo.icfg"));
  auto tee1 = Merge({tas[0]}, MergeLevel::kTee);
  auto tee2 = Merge({tas[1]}, MergeLevel::kTee);
  auto global = Merge({tee1, tee2}, MergeLevel::kGlobal);
  EXPECT_EQ(global.CountableBlocks(), 12u);
  std::set<std::string> all{"msee_ta_printf_va", "tee_get_key", "tee_secure_clock",
                            "ut_pf_cp_rd_random"};
  EXPECT_EQ(ReachableBlocks(global, all, all), 12u);
  EXPECT_EQ(ReachableBlocks(global, {}, all), 3u);
}

TEST(GreedyOracle, RandomGraphs) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    auto og = testing::RandomGraph(rng);
    auto g = Single(og.ToText());
    std::set<std::string> universe(og.apis.begin(), og.apis.end());
    EXPECT_EQ(ReachableBlocks(g, {}, universe), testing::OracleReach(og, {}));
    auto r = GreedyRank(g, universe);
    auto expect = testing::OracleGreedy(og);
    ASSERT_EQ(r.steps.size(), expect.size());
    for (size_t k = 0; k < expect.size(); ++k) {
      EXPECT_EQ(r.steps[k].api, expect[k].api);
      EXPECT_EQ(r.steps[k].cumulative, expect[k].reach);
    }
  }
}

}  // namespace
}  // namespace taemu
