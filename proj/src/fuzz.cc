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

#include "taemu/fuzz.h"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "taemu/error.h"

namespace taemu {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCrashMagic = "TAEMU-CRASH 1";

uint64_t SplitMix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class Xorshift64 {
 public:
  explicit Xorshift64(uint64_t seed) : s_(SplitMix64(seed)) {
    if (s_ == 0) s_ = 1;
  }
  uint64_t Next() {
    s_ ^= s_ << 13;
    s_ ^= s_ >> 7;
    s_ ^= s_ << 17;
    return s_;
  }
  // Uniform enough for mutation scheduling; n > 0.
  size_t Below(size_t n) { return static_cast<size_t>(Next() % n); }

 private:
  uint64_t s_;
};

constexpr uint32_t kInteresting[] = {0, 1, 0x7F, 0x80, 0xFF, 0x7FFFFFFF, 0x80000000};

void Mutate(std::vector<uint8_t>& d, Xorshift64& rng,
            const std::vector<std::vector<uint8_t>>& pool, size_t max_len) {
  int ops = 1 + static_cast<int>(rng.Below(8));
  for (int n = 0; n < ops; ++n) {
    if (d.empty()) {
      d.push_back(static_cast<uint8_t>(rng.Next()));
      continue;
    }
    switch (rng.Below(8)) {
      case 0:  // bit flip
        d[rng.Below(d.size())] ^= static_cast<uint8_t>(1u << rng.Below(8));
        break;
      case 1:  // random byte
        d[rng.Below(d.size())] = static_cast<uint8_t>(rng.Next());
        break;
      case 2: {  // interesting value
        uint32_t v = kInteresting[rng.Below(std::size(kInteresting))];
        if (v > 0xFF && d.size() >= 4) {
          size_t at = rng.Below(d.size() - 3);
          for (int i = 0; i < 4; ++i) d[at + i] = static_cast<uint8_t>(v >> (8 * i));
        } else {
          d[rng.Below(d.size())] = static_cast<uint8_t>(v);
        }
        break;
      }
      case 3: {  // duplicate a block
        size_t from = rng.Below(d.size());
        size_t len = 1 + rng.Below(std::min<size_t>(32, d.size() - from));
        std::vector<uint8_t> block(d.begin() + from, d.begin() + from + len);
        size_t to = rng.Below(d.size() + 1);
        d.insert(d.begin() + to, block.begin(), block.end());
        break;
      }
      case 4: {  // delete a block
        if (d.size() < 2) break;
        size_t from = rng.Below(d.size());
        size_t len = 1 + rng.Below(std::min<size_t>(32, d.size() - from));
        len = std::min(len, d.size() - 1);
        d.erase(d.begin() + from, d.begin() + from + len);
        break;
      }
      case 5: {  // crossover
        const auto& other = pool[rng.Below(pool.size())];
        if (other.empty()) break;
        size_t keep = rng.Below(d.size() + 1);
        size_t from = rng.Below(other.size());
        d.resize(keep);
        d.insert(d.end(), other.begin() + from, other.end());
        break;
      }
      case 6: {  // arithmetic
        uint8_t delta = static_cast<uint8_t>(1 + rng.Below(35));
        uint8_t& b = d[rng.Below(d.size())];
        b = rng.Below(2) ? b + delta : b - delta;
        break;
      }
      default:  // insert a byte
        d.insert(d.begin() + rng.Below(d.size() + 1), static_cast<uint8_t>(rng.Next()));
        break;
    }
  }
  if (d.size() > max_len) d.resize(max_len);
}

// Marks the cells of `map` in `virgin` and returns how many were new.
uint32_t MergeCoverage(const std::vector<uint8_t>& map, std::vector<uint8_t>& virgin,
                       bool commit) {
  uint32_t fresh = 0;
  for (size_t i = 0; i < map.size(); ++i) {
    if (map[i] != 0 && virgin[i] == 0) {
      ++fresh;
      if (commit) virgin[i] = 1;
    }
  }
  return fresh;
}

void WriteFile(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

std::string_view AsText(std::span<const uint8_t> b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

}  // namespace

const char* TriageName(Triage t) {
  return t == Triage::kMissingApi ? "missing-api" : "bug";
}

Triage TriageOf(const ExecOutcome& outcome) {
  return outcome.crash_class == CrashClass::kMissingApi ? Triage::kMissingApi
                                                         : Triage::kBug;
}

std::string DedupKey(const ExecOutcome& o) {
  std::string tail;
  switch (o.crash_class) {
    case CrashClass::kMissingApi:
      tail = o.detail;
      break;
    case CrashClass::kAsanViolation:
      tail = fmt::format("{}@{}", o.detail, o.offset);
      break;
    case CrashClass::kPanic:
      tail = fmt::format("0x{:08x}", o.code);
      break;
    default:
      tail = "-";
      break;
  }
  return fmt::format("{}:{:08x}:{}", CrashClassName(o.crash_class), o.fault_pc, tail);
}

std::string FormatCrashFile(const CrashReport& r) {
  std::string out = fmt::format("{}\n", kCrashMagic);
  out += fmt::format("class: {}\n", CrashClassName(r.outcome.crash_class));
  out += fmt::format("dedup_key: {}\n", r.dedup_key);
  out += fmt::format("triage: {}\n", TriageName(r.triage));
  out += fmt::format("fault_pc: 0x{:08x}\n", r.outcome.fault_pc);
  out += fmt::format("fault_addr: 0x{:08x}\n", r.outcome.fault_addr);
  if (!r.outcome.detail.empty()) out += fmt::format("detail: {}\n", r.outcome.detail);
  if (r.outcome.chunk_base) out += fmt::format("chunk: 0x{:08x}\n", *r.outcome.chunk_base);
  if (r.outcome.crash_class == CrashClass::kAsanViolation) {
    out += fmt::format("offset: {}\n", r.outcome.offset);
  }
  out += fmt::format("new_cells: {}\n", r.new_cells);
  out += fmt::format("exec: {}\n", r.exec_index);
  out += fmt::format("input_len: {}\n\n", r.input.size());
  out.append(r.input.begin(), r.input.end());
  return out;
}

CrashFile ParseCrashFile(std::span<const uint8_t> bytes) {
  CrashFile f;
  std::string_view text = AsText(bytes);
  if (!text.starts_with(std::string(kCrashMagic) + "\n")) {
    f.input.assign(bytes.begin(), bytes.end());
    return f;
  }
  size_t pos = kCrashMagic.size() + 1;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      throw Error(ErrorCode::kParseError, "crash file header is not terminated");
    }
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) break;
    if (line.starts_with("dedup_key: ")) f.dedup_key = line.substr(11);
  }
  f.input.assign(bytes.begin() + std::min(pos, bytes.size()), bytes.end());
  return f;
}

std::string FormatStats(const FuzzStats& s) {
  return fmt::format(
      "execs, execs_per_sec, blocks, crashes_bug, crashes_missing_api\n"
      "{}, {:.2f}, {}, {}, {}\n",
      s.execs, s.execs_per_sec, s.blocks, s.crashes_bug, s.crashes_missing_api);
}

FuzzTarget::FuzzTarget(const TaElfFile& file, const StaticAnnotationConfig* config,
                       HarnessSpec harness, ManagerOptions options)
    : manager_(std::make_unique<TaManager>(file, config, options)),
      harness_(std::move(harness)) {
  auto opened = manager_->OpenSession();
  if (!opened.session) {
    throw Error(ErrorCode::kBadState,
                fmt::format("open session failed: 0x{:08x} {}", opened.result.return_code,
                            opened.result.outcome.Describe()));
  }
  session_ = *opened.session;
  for (const auto& call : harness_.init) {
    auto built = BuildInitCall(call);
    auto r = manager_->InvokeCommand(session_, built.cmd_id, built.params);
    if (r.crashed()) {
      throw Error(ErrorCode::kBadState,
                  fmt::format("init command {} crashed: {}", call.cmd_id,
                              r.outcome.Describe()));
    }
  }
  snapshot_ = manager_->TakeSnapshot();
}

std::optional<InvocationResult> FuzzTarget::Run(std::span<const uint8_t> input) {
  auto built = BuildParamSet(harness_, input);
  if (!built) return std::nullopt;
  manager_->RestoreSnapshot(snapshot_);
  auto& map = manager_->guest().coverage_map;
  std::fill(map.begin(), map.end(), 0);
  return manager_->InvokeCommand(session_, built->cmd_id, built->params);
}

std::optional<InvocationResult> Replay(FuzzTarget& target,
                                       std::span<const uint8_t> input) {
  return target.Run(input);
}

FuzzResult FuzzLoop(FuzzTarget& target, const FuzzOptions& options) {
  FuzzResult result;
  Xorshift64 rng(options.seed);
  std::vector<uint8_t> virgin(kCoverageMapSize, 0);
  std::set<std::string> seen_keys;
  GuestState& guest = target.manager().guest();
  guest.track_blocks = true;
  guest.block_hits.clear();

  fs::path out;
  if (!options.out_dir.empty()) {
    out = options.out_dir;
    fs::create_directories(out / "corpus");
    fs::create_directories(out / "crashes");
  }

  auto execute = [&](const std::vector<uint8_t>& input) {
    auto r = target.Run(input);
    if (!r) {
      ++result.stats.skipped;
      return;
    }
    ++result.stats.execs;
    const auto& map = guest.coverage_map;
    if (r->outcome.kind == OutcomeKind::kBudgetExhausted) {
      ++result.stats.hangs;
      return;
    }
    if (r->outcome.is_crash()) {
      CrashReport report;
      report.dedup_key = DedupKey(r->outcome);
      if (!seen_keys.insert(report.dedup_key).second) return;
      report.outcome = r->outcome;
      report.triage = TriageOf(r->outcome);
      report.input = input;
      report.new_cells = MergeCoverage(map, virgin, false);
      report.exec_index = result.stats.execs;
      if (report.triage == Triage::kBug) {
        ++result.stats.crashes_bug;
      } else {
        ++result.stats.crashes_missing_api;
      }
      if (!out.empty()) {
        WriteFile(out / "crashes" / fmt::format("crash-{:06d}", result.crashes.size()),
                  FormatCrashFile(report));
      }
      result.crashes.push_back(std::move(report));
      return;
    }
    if (MergeCoverage(map, virgin, true) > 0) {
      if (!out.empty()) {
        WriteFile(out / "corpus" / fmt::format("id-{:06d}", result.corpus.size()),
                  AsText(input));
      }
      result.corpus.push_back(input);
    }
  };

  std::vector<std::vector<uint8_t>> seeds = options.seeds;
  if (seeds.empty()) {
    seeds.emplace_back(std::max<size_t>(target.harness().min_input_len, 1), 0);
  }
  for (const auto& s : seeds) execute(s);

  auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  for (uint64_t i = 0;; ++i) {
    if (options.iterations != 0) {
      if (i >= options.iterations) break;
    } else if ((i & 0xFF) == 0 && elapsed() >= options.seconds) {
      break;
    }
    if (options.stop_after_crashes != 0 &&
        result.crashes.size() >= options.stop_after_crashes) {
      break;
    }
    const auto& pool = result.corpus.empty() ? seeds : result.corpus;
    std::vector<uint8_t> input = pool[rng.Below(pool.size())];
    Mutate(input, rng, pool, options.max_input_len);
    execute(input);
  }

  double secs = elapsed();
  result.stats.execs_per_sec = secs > 0 ? static_cast<double>(result.stats.execs) / secs : 0;
  const auto& leaders = guest.leaders;
  for (const auto& [addr, count] : guest.block_hits) {
    if (leaders.empty() || std::binary_search(leaders.begin(), leaders.end(), addr)) {
      ++result.stats.blocks;
    }
  }
  guest.track_blocks = false;
  if (!out.empty()) WriteFile(out / "stats.txt", FormatStats(result.stats));
  return result;
}

std::vector<FuzzResult> FuzzParallel(const TaElfFile& file,
                                     const StaticAnnotationConfig* config,
                                     const HarnessSpec& harness,
                                     ManagerOptions manager_options,
                                     const FuzzOptions& options, unsigned jobs) {
  std::vector<FuzzResult> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> threads;
  for (unsigned i = 0; i < jobs; ++i) {
    threads.emplace_back([&, i] {
      try {
        FuzzTarget target(file, config, harness, manager_options);
        FuzzOptions mine = options;
        mine.seed = options.seed + i;
        if (!options.out_dir.empty()) {
          mine.out_dir = (fs::path(options.out_dir) / fmt::format("job-{}", i)).string();
        }
        results[i] = FuzzLoop(target, mine);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

CoverageReport MeasureCoverage(FuzzTarget& target,
                               const std::vector<std::vector<uint8_t>>& inputs) {
  GuestState& guest = target.manager().guest();
  guest.block_hits.clear();
  guest.track_blocks = true;
  for (const auto& in : inputs) target.Run(in);
  guest.track_blocks = false;
  CoverageReport report;
  const auto& blocks = target.manager().image().file.blocks;
  std::vector<uint32_t> sorted(blocks.begin(), blocks.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  report.total = static_cast<uint32_t>(sorted.size());
  for (uint32_t b : sorted) {
    auto it = guest.block_hits.find(b);
    if (it != guest.block_hits.end()) report.blocks.emplace_back(b, it->second);
  }
  guest.block_hits.clear();
  report.hit = static_cast<uint32_t>(report.blocks.size());
  report.percent = report.total ? 100.0 * report.hit / report.total : 0.0;
  return report;
}

}  // namespace taemu
