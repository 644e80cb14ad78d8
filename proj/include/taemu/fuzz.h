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

#ifndef TAEMU_FUZZ_H_
#define TAEMU_FUZZ_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taemu/harness.h"
#include "taemu/manager.h"

namespace taemu {

enum class Triage : uint8_t { kBug, kMissingApi };

const char* TriageName(Triage t);
// MissingApi crashes are missing-API triage, everything else is a bug.
Triage TriageOf(const ExecOutcome& outcome);
// "<class>:<fault pc>:<api name | violation kind@offset>"
std::string DedupKey(const ExecOutcome& outcome);

struct CrashReport {
  ExecOutcome outcome;
  std::string dedup_key;
  Triage triage = Triage::kBug;
  std::vector<uint8_t> input;
  // Map cells this input touched that no earlier execution had.
  uint32_t new_cells = 0;
  uint64_t exec_index = 0;
};

// Crash file: "TAEMU-CRASH 1" header, key: value lines, blank line, raw input.
std::string FormatCrashFile(const CrashReport& report);
struct CrashFile {
  std::string dedup_key;
  std::vector<uint8_t> input;
};
// Files without the header are taken as raw input with no key.
CrashFile ParseCrashFile(std::span<const uint8_t> bytes);

// A loaded TA with one open session and the harness init calls applied,
// snapshotted so every execution starts from the same state.
class FuzzTarget {
 public:
  // Throws kBadState when opening the session or an init call fails.
  FuzzTarget(const TaElfFile& file, const StaticAnnotationConfig* config,
             HarnessSpec harness, ManagerOptions options = {});

  // Restores the snapshot and runs one invocation. nullopt when the input is
  // shorter than the harness minimum. The guest coverage map holds this
  // execution's edges afterwards.
  std::optional<InvocationResult> Run(std::span<const uint8_t> input);

  TaManager& manager() { return *manager_; }
  const HarnessSpec& harness() const { return harness_; }

 private:
  std::unique_ptr<TaManager> manager_;
  HarnessSpec harness_;
  uint32_t session_ = 0;
  ManagerSnapshot snapshot_;
};

struct FuzzOptions {
  uint64_t seed = 1;
  // Attempted mutations. When zero the loop runs for `seconds` instead.
  uint64_t iterations = 0;
  double seconds = 0;
  size_t max_input_len = 1024;
  // Ends the loop once this many unique crashes are stored; zero never stops.
  uint32_t stop_after_crashes = 0;
  // Starting inputs. An all-zero input of the minimum length is used when
  // empty.
  std::vector<std::vector<uint8_t>> seeds;
  // Output directory for corpus/, crashes/ and stats.txt; empty writes
  // nothing.
  std::string out_dir;
};

struct FuzzStats {
  uint64_t execs = 0;
  double execs_per_sec = 0;
  uint32_t blocks = 0;
  uint32_t crashes_bug = 0;
  uint32_t crashes_missing_api = 0;
  uint64_t hangs = 0;
  uint64_t skipped = 0;
};

// Header line plus "execs, execs_per_sec, blocks, crashes_bug,
// crashes_missing_api" values line.
std::string FormatStats(const FuzzStats& stats);

struct FuzzResult {
  std::vector<std::vector<uint8_t>> corpus;
  std::vector<CrashReport> crashes;
  FuzzStats stats;
};

FuzzResult FuzzLoop(FuzzTarget& target, const FuzzOptions& options);

// Runs `jobs` independent loops with seeds seed..seed+jobs-1, each writing
// to out_dir/job-<i>.
std::vector<FuzzResult> FuzzParallel(const TaElfFile& file,
                                     const StaticAnnotationConfig* config,
                                     const HarnessSpec& harness,
                                     ManagerOptions manager_options,
                                     const FuzzOptions& options, unsigned jobs);

std::optional<InvocationResult> Replay(FuzzTarget& target,
                                       std::span<const uint8_t> input);

struct CoverageReport {
  uint32_t hit = 0;
  uint32_t total = 0;
  double percent = 0;
  // Static block leader -> executions that entered it, hit blocks only.
  std::vector<std::pair<uint32_t, uint64_t>> blocks;
};

// Block coverage of the invocations driven by `inputs`, measured against the
// static block map of the TA.
CoverageReport MeasureCoverage(FuzzTarget& target,
                               const std::vector<std::vector<uint8_t>>& inputs);

}  // namespace taemu

#endif  // TAEMU_FUZZ_H_
