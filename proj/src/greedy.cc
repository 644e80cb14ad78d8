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

#include "taemu/greedy.h"

#include <fmt/format.h>

#include "taemu/error.h"

namespace taemu {

namespace {

std::vector<std::string_view> Words(std::string_view line) {
  std::vector<std::string_view> out;
  size_t p = 0;
  while (p < line.size()) {
    size_t b = line.find_first_not_of(" \t\r", p);
    if (b == std::string_view::npos) break;
    size_t e = line.find_first_of(" \t\r", b);
    if (e == std::string_view::npos) e = line.size();
    out.push_back(line.substr(b, e - b));
    p = e;
  }
  return out;
}

std::vector<std::string> SplitCalls(std::string_view s, int line) {
  std::vector<std::string> out;
  size_t p = 0;
  while (p <= s.size()) {
    size_t c = s.find(',', p);
    if (c == std::string_view::npos) c = s.size();
    if (c == p) throw Error(ErrorCode::kParseError, "empty api name", line);
    out.emplace_back(s.substr(p, c - p));
    p = c + 1;
  }
  return out;
}

struct PendingTa {
  Icfg g;
  std::string ta;
  std::vector<std::tuple<std::string, std::string, int>> edges;
  std::vector<std::tuple<std::string, std::string, int>> entries;
};

Icfg FinishTa(PendingTa& p) {
  for (const auto& [src, dst, line] : p.edges) {
    auto a = p.g.Find(p.ta, src);
    auto b = p.g.Find(p.ta, dst);
    if (!a || !b) {
      throw Error(ErrorCode::kDanglingEdge,
                  fmt::format("edge {} -> {} references an undeclared block", src, dst),
                  line);
    }
    p.g.AddEdge(*a, *b);
  }
  for (const auto& [block, name, line] : p.entries) {
    auto b = p.g.Find(p.ta, block);
    if (!b) {
      throw Error(ErrorCode::kDanglingEdge,
                  fmt::format("entry {} names undeclared block {}", name, block), line);
    }
    p.g.entries[p.ta][name] = *b;
    p.g.AddEdge(p.g.root, *b);
  }
  return std::move(p.g);
}

}  // namespace

uint32_t Icfg::AddBlock(Block block) {
  blocks.push_back(std::move(block));
  succ.emplace_back();
  return static_cast<uint32_t>(blocks.size() - 1);
}

uint32_t Icfg::CountableBlocks() const {
  uint32_t n = 0;
  for (const auto& b : blocks) n += b.synthetic ? 0 : 1;
  return n;
}

std::optional<uint32_t> Icfg::Find(std::string_view ta, std::string_view id) const {
  for (uint32_t i = 0; i < blocks.size(); ++i) {
    if (!blocks[i].synthetic && blocks[i].ta == ta && blocks[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<Icfg> ParseIcfg(std::string_view text) {
  std::vector<Icfg> out;
  std::optional<PendingTa> cur;
  std::set<std::string> seen_tas;
  std::set<std::string> seen_blocks;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    auto w = Words(line);
    if (w.empty()) continue;
    if (w[0] == "TA") {
      if (w.size() != 2) throw Error(ErrorCode::kParseError, "TA <id>", line_no);
      if (!seen_tas.insert(std::string(w[1])).second) {
        throw Error(ErrorCode::kParseError, fmt::format("duplicate TA {}", w[1]), line_no);
      }
      if (cur) out.push_back(FinishTa(*cur));
      cur.emplace();
      cur->ta = std::string(w[1]);
      cur->g.root = cur->g.AddBlock({"<root>", cur->ta, {}, true});
      seen_blocks.clear();
      continue;
    }
    if (!cur) {
      throw Error(ErrorCode::kParseError, "directive before the first TA line", line_no);
    }
    if (w[0] == "ENTRY") {
      if (w.size() != 3) {
        throw Error(ErrorCode::kParseError, "ENTRY <block> <entrypoint>", line_no);
      }
      cur->entries.emplace_back(std::string(w[1]), std::string(w[2]), line_no);
    } else if (w[0] == "BLOCK") {
      Icfg::Block b;
      if (w.size() == 4 && w[2] == "CALLS") {
        b.calls = SplitCalls(w[3], line_no);
      } else if (w.size() != 2) {
        throw Error(ErrorCode::kParseError, "BLOCK <id> [CALLS a,b,c]", line_no);
      }
      b.id = std::string(w[1]);
      b.ta = cur->ta;
      if (!seen_blocks.insert(b.id).second) {
        throw Error(ErrorCode::kParseError, fmt::format("duplicate block {}", b.id),
                    line_no);
      }
      cur->g.AddBlock(std::move(b));
    } else if (w[0] == "EDGE") {
      if (w.size() != 3) throw Error(ErrorCode::kParseError, "EDGE <src> <dst>", line_no);
      cur->edges.emplace_back(std::string(w[1]), std::string(w[2]), line_no);
    } else {
      throw Error(ErrorCode::kParseError, fmt::format("unknown directive {}", w[0]),
                  line_no);
    }
  }
  if (cur) out.push_back(FinishTa(*cur));
  return out;
}

Icfg Merge(const std::vector<Icfg>& graphs, MergeLevel level) {
  Icfg m;
  m.root = m.AddBlock({level == MergeLevel::kTee ? "<tee-root>" : "<global-root>", "", {}, true});
  for (const auto& g : graphs) {
    bool drop_root = level == MergeLevel::kTee;
    std::vector<uint32_t> remap(g.blocks.size(), UINT32_MAX);
    for (uint32_t i = 0; i < g.blocks.size(); ++i) {
      if (drop_root && i == g.root) continue;
      remap[i] = m.AddBlock(g.blocks[i]);
    }
    for (uint32_t i = 0; i < g.blocks.size(); ++i) {
      if (remap[i] == UINT32_MAX) continue;
      for (uint32_t s : g.succ[i]) {
        if (remap[s] != UINT32_MAX) m.AddEdge(remap[i], remap[s]);
      }
    }
    for (const auto& [ta, names] : g.entries) {
      for (const auto& [name, b] : names) {
        m.entries[ta][name] = remap[b];
        if (drop_root) m.AddEdge(m.root, remap[b]);
      }
    }
    if (!drop_root) m.AddEdge(m.root, remap[g.root]);
  }
  return m;
}

ApiUniverse Classify(const Icfg& g, std::set<std::string> gp,
                     std::set<std::string> libc) {
  ApiUniverse u;
  for (const auto& b : g.blocks) {
    for (const auto& c : b.calls) {
      if (!gp.contains(c) && !libc.contains(c)) u.tee.insert(c);
    }
  }
  for (const auto& name : gp) libc.erase(name);
  u.gp = std::move(gp);
  u.libc = std::move(libc);
  return u;
}

std::set<std::string> ParseApiList(std::string_view text) {
  std::set<std::string> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    auto w = Words(line);
    if (!w.empty()) out.emplace(w[0]);
  }
  return out;
}

uint32_t ReachableBlocks(const Icfg& g, const std::set<std::string>& implemented,
                         const std::set<std::string>& universe) {
  std::vector<char> removed(g.blocks.size(), 0);
  for (uint32_t i = 0; i < g.blocks.size(); ++i) {
    for (const auto& c : g.blocks[i].calls) {
      if (universe.contains(c) && !implemented.contains(c)) {
        removed[i] = 1;
        break;
      }
    }
  }
  if (g.blocks.empty() || removed[g.root]) return 0;
  std::vector<char> seen(g.blocks.size(), 0);
  std::vector<uint32_t> stack{g.root};
  seen[g.root] = 1;
  uint32_t count = 0;
  while (!stack.empty()) {
    uint32_t b = stack.back();
    stack.pop_back();
    if (!g.blocks[b].synthetic) ++count;
    for (uint32_t s : g.succ[b]) {
      if (!seen[s] && !removed[s]) {
        seen[s] = 1;
        stack.push_back(s);
      }
    }
  }
  return count;
}

GreedyResult GreedyRank(const Icfg& g, const std::set<std::string>& universe) {
  GreedyResult r;
  r.total = g.CountableBlocks();
  std::set<std::string> implemented;
  r.baseline = ReachableBlocks(g, implemented, universe);
  uint32_t current = r.baseline;
  auto pct = [&](uint32_t n) { return r.total ? double(n) / r.total : 0.0; };
  if (pct(current) >= 0.9) r.threshold_90 = 0;
  while (implemented.size() < universe.size()) {
    std::optional<std::string> best;
    uint32_t best_reach = 0;
    // std::set iterates in name order, so the first maximum wins ties.
    for (const auto& a : universe) {
      if (implemented.contains(a)) continue;
      implemented.insert(a);
      uint32_t reach = ReachableBlocks(g, implemented, universe);
      implemented.erase(a);
      if (!best || reach > best_reach) {
        best = a;
        best_reach = reach;
      }
    }
    implemented.insert(*best);
    r.steps.push_back({*best, best_reach - current, best_reach, pct(best_reach)});
    current = best_reach;
    if (!r.threshold_90 && pct(current) >= 0.9) {
      r.threshold_90 = static_cast<uint32_t>(r.steps.size());
    }
  }
  return r;
}

std::string EmitReport(const GreedyResult& result, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::kCsv) {
    out = "rank,api,gain,cumulative,pct\n";
    for (size_t i = 0; i < result.steps.size(); ++i) {
      const auto& s = result.steps[i];
      out += fmt::format("{},{},{},{},{:.6f}\n", i + 1, s.api, s.gain, s.cumulative, s.pct);
    }
  } else {
    out = "implemented,pct\n";
    out += fmt::format("0,{:.6f}\n", result.baseline_pct());
    for (size_t i = 0; i < result.steps.size(); ++i) {
      out += fmt::format("{},{:.6f}\n", i + 1, result.steps[i].pct);
    }
  }
  return out;
}

}  // namespace taemu
