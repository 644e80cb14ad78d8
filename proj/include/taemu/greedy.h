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

#ifndef TAEMU_GREEDY_H_
#define TAEMU_GREEDY_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace taemu {

// Interprocedural control-flow graph. Blocks are addressed by index; the
// root is always a synthetic block that calls nothing and is never counted.
struct Icfg {
  struct Block {
    std::string id;
    std::string ta;
    std::vector<std::string> calls;
    bool synthetic = false;

    friend bool operator==(const Block&, const Block&) = default;
  };

  std::vector<Block> blocks;
  std::vector<std::vector<uint32_t>> succ;
  uint32_t root = 0;
  // ta id -> entrypoint name -> block index
  std::map<std::string, std::map<std::string, uint32_t>> entries;

  uint32_t AddBlock(Block block);
  void AddEdge(uint32_t from, uint32_t to) { succ[from].push_back(to); }
  // Non-synthetic blocks.
  uint32_t CountableBlocks() const;
  std::optional<uint32_t> Find(std::string_view ta, std::string_view id) const;

  friend bool operator==(const Icfg&, const Icfg&) = default;
};

// Line format, one graph per `TA` section:
//   TA <id>
//   ENTRY <block> <entrypoint-name>
//   BLOCK <id> [CALLS a,b,c]
//   EDGE <src> <dst>
// Each TA graph gets a synthetic root with an edge to every entry block.
// Throws kParseError (duplicates, syntax) or kDanglingEdge.
std::vector<Icfg> ParseIcfg(std::string_view text);

enum class MergeLevel { kTee, kGlobal };

// kTee: fresh root linked to every entry block of every input; the inputs'
// synthetic roots are dropped. kGlobal: fresh root linked to each input
// root, which are kept as the per-TEE roots.
Icfg Merge(const std::vector<Icfg>& graphs, MergeLevel level);

struct ApiUniverse {
  std::set<std::string> gp;
  std::set<std::string> libc;
  // Everything called in the graph that is neither GP nor libc.
  std::set<std::string> tee;
};

ApiUniverse Classify(const Icfg& g, std::set<std::string> gp,
                     std::set<std::string> libc);
// One name per line, `#` comments.
std::set<std::string> ParseApiList(std::string_view text);

// Blocks reachable from the root after removing every block that calls an
// API in universe \ implemented. Synthetic blocks are not counted.
uint32_t ReachableBlocks(const Icfg& g, const std::set<std::string>& implemented,
                         const std::set<std::string>& universe);

struct GreedyStep {
  std::string api;
  uint32_t gain = 0;
  uint32_t cumulative = 0;
  double pct = 0;

  friend bool operator==(const GreedyStep&, const GreedyStep&) = default;
};

struct GreedyResult {
  std::vector<GreedyStep> steps;
  uint32_t baseline = 0;
  uint32_t total = 0;
  // Number of implemented APIs at which coverage first reaches 90%.
  std::optional<uint32_t> threshold_90;

  double baseline_pct() const { return total ? double(baseline) / total : 0.0; }
  friend bool operator==(const GreedyResult&, const GreedyResult&) = default;
};

// Picks the API with the largest gain at every step; ties go to the
// lexicographically smallest name.
GreedyResult GreedyRank(const Icfg& g, const std::set<std::string>& universe);

enum class ReportFormat { kCsv, kCurve };
std::string EmitReport(const GreedyResult& result, ReportFormat format);

}  // namespace taemu

#endif  // TAEMU_GREEDY_H_
