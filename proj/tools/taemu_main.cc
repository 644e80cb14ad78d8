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

// taemu command-line driver.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "taemu/assembler.h"
#include "taemu/bytes.h"
#include "taemu/debugstub.h"
#include "taemu/error.h"
#include "taemu/fuzz.h"
#include "taemu/greedy.h"
#include "taemu/harness.h"
#include "taemu/manager.h"
#include "taemu/protocol.h"
#include "taemu/shm.h"
#include "taemu/taelf.h"

namespace fs = std::filesystem;
using namespace taemu;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitCrashed = 2;
constexpr int kExitInternal = 3;

std::vector<uint8_t> ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string ReadText(const std::string& path) {
  auto b = ReadBytes(path);
  return {b.begin(), b.end()};
}

void WriteBytes(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
}

// Targets may be given as TAELF files or as assembler source.
TaElfFile LoadTarget(const std::string& path) {
  if (fs::path(path).extension() == ".s") return AssembleWithSymbols(ReadText(path)).file;
  return ParseTaElf(ReadBytes(path));
}

struct TargetFlags {
  std::string ta;
  std::string config;
  bool stub_missing = false;
  uint64_t budget = kDefaultInstructionBudget;

  void Add(CLI::App* app) {
    app->add_option("ta", ta, "TAELF file or .s source")->required()->check(CLI::ExistingFile);
    app->add_option("--config", config, "static-TA annotation config")->check(CLI::ExistingFile);
    app->add_flag("--stub-missing", stub_missing,
                  "return 0 from unimplemented APIs instead of crashing");
    app->add_option("--budget", budget, "instructions per entrypoint call");
  }

  ManagerOptions Options() const {
    ManagerOptions o;
    o.policy = stub_missing ? MissingApiPolicy::kReturnZero : MissingApiPolicy::kCrash;
    o.instruction_budget = budget;
    return o;
  }

  std::optional<StaticAnnotationConfig> Config() const {
    if (config.empty()) return std::nullopt;
    return ParseStaticAnnotationConfig(ReadText(config));
  }
};

// none | value:A,B | mem:HEX | memsize:N | memstr:TEXT | shm:PATH
ParamSlot ParseParam(const std::string& spec) {
  auto colon = spec.find(':');
  std::string kind = spec.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto num = [&](const std::string& s) {
    return static_cast<uint32_t>(std::stoul(s, nullptr, 0));
  };
  if (kind == "none") return {};
  if (kind == "value") {
    auto comma = arg.find(',');
    if (comma == std::string::npos) throw CLI::ValidationError("value:<a>,<b>");
    return ParamSlot::Value(num(arg.substr(0, comma)), num(arg.substr(comma + 1)));
  }
  if (kind == "mem") {
    auto bytes = HexDecode(arg);
    if (!bytes) throw CLI::ValidationError("mem:<hex>");
    return ParamSlot::Memref(*bytes);
  }
  if (kind == "memsize") return ParamSlot::Memref(std::vector<uint8_t>(num(arg), 0));
  if (kind == "memstr") return ParamSlot::Memref({arg.begin(), arg.end()});
  if (kind == "shm") return ParamSlot::Shm(MapFileBacking(arg));
  throw CLI::ValidationError("unknown parameter form " + spec);
}

struct InvokeFlags {
  uint32_t cmd = 0;
  std::string types = "0";
  std::vector<std::string> params;

  void Add(CLI::App* app) {
    app->add_option("--cmd", cmd, "command id");
    app->add_option("--types", types, "param_types, e.g. 0x0065");
    app->add_option("--param", params,
                    "up to 4 of none | value:A,B | mem:HEX | memsize:N | memstr:TEXT | shm:PATH");
  }

  GpParamSet Build() const {
    if (params.size() > 4) throw CLI::ValidationError("at most 4 --param");
    GpParamSet set;
    set.param_types = static_cast<uint16_t>(std::stoul(types, nullptr, 0));
    for (size_t i = 0; i < params.size(); ++i) set.params[i] = ParseParam(params[i]);
    return set;
  }
};

void PrintResult(const InvocationResult& r) {
  fmt::print("return: 0x{:08x}\norigin: {}\noutcome: {}\n", r.return_code,
             static_cast<int>(r.origin), r.outcome.Describe());
  for (int i = 0; i < 4; ++i) {
    const auto& p = r.out_params[i];
    if (p.kind == ParamSlot::Kind::kValue) {
      fmt::print("param{}: value 0x{:08x} 0x{:08x}\n", i, p.a, p.b);
    } else if (p.kind == ParamSlot::Kind::kMemref) {
      fmt::print("param{}: memref size {} {}\n", i, p.b, HexEncode(p.bytes));
    }
  }
  for (const auto& line : r.log_lines) fmt::print("log: {}\n", line);
}

int CmdRun(const TargetFlags& t, const InvokeFlags& inv) {
  auto config = t.Config();
  TaManager m(LoadTarget(t.ta), config ? &*config : nullptr, t.Options());
  auto opened = m.OpenSession();
  if (!opened.session) {
    PrintResult(opened.result);
    return opened.result.crashed() ? kExitCrashed : kExitOk;
  }
  auto r = m.InvokeCommand(*opened.session, inv.cmd, inv.Build());
  PrintResult(r);
  m.CloseSession(*opened.session);
  m.Destroy();
  return r.crashed() ? kExitCrashed : kExitOk;
}

std::vector<std::vector<uint8_t>> CollectInputs(const std::vector<std::string>& paths) {
  std::vector<std::vector<uint8_t>> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) out.push_back(ParseCrashFile(ReadBytes(f)).input);
    } else {
      out.push_back(ParseCrashFile(ReadBytes(p)).input);
    }
  }
  return out;
}

int CmdFuzz(const TargetFlags& t, const std::string& harness_path, FuzzOptions opts,
            const std::vector<std::string>& seed_paths, unsigned jobs) {
  auto config = t.Config();
  auto file = LoadTarget(t.ta);
  auto harness = ParseHarness(ReadText(harness_path));
  opts.seeds = CollectInputs(seed_paths);
  if (opts.iterations == 0 && opts.seconds <= 0) opts.seconds = 10;
  std::vector<FuzzResult> results;
  if (jobs > 1) {
    results = FuzzParallel(file, config ? &*config : nullptr, harness, t.Options(), opts, jobs);
  } else {
    FuzzTarget target(file, config ? &*config : nullptr, harness, t.Options());
    results.push_back(FuzzLoop(target, opts));
  }
  for (size_t i = 0; i < results.size(); ++i) {
    if (results.size() > 1) fmt::print("job {}\n", i);
    fmt::print("{}", FormatStats(results[i].stats));
    for (const auto& c : results[i].crashes) {
      fmt::print("crash {} {}\n", TriageName(c.triage), c.dedup_key);
    }
  }
  return kExitOk;
}

int CmdReplay(const TargetFlags& t, const std::string& harness_path,
              const std::vector<std::string>& inputs, bool abort_on_crash, bool coverage) {
  auto config = t.Config();
  FuzzTarget target(LoadTarget(t.ta), config ? &*config : nullptr,
                    ParseHarness(ReadText(harness_path)), t.Options());
  if (coverage) {
    auto report = MeasureCoverage(target, CollectInputs(inputs));
    fmt::print("blocks: {}/{} ({:.2f}%)\n", report.hit, report.total, report.percent);
    for (const auto& [addr, hits] : report.blocks) fmt::print("0x{:08x} {}\n", addr, hits);
    return kExitOk;
  }
  int status = kExitOk;
  for (const auto& path : inputs) {
    auto file = ParseCrashFile(ReadBytes(path));
    auto r = Replay(target, file.input);
    if (!r) {
      fmt::print("{}: skipped (input shorter than the harness minimum)\n", path);
      continue;
    }
    if (!r->crashed() || r->outcome.kind == OutcomeKind::kBudgetExhausted) {
      fmt::print("{}: return 0x{:08x} {}\n", path, r->return_code, r->outcome.Describe());
      continue;
    }
    std::string key = DedupKey(r->outcome);
    fmt::print("{}: {} {} {}\n", path, CrashClassName(r->outcome.crash_class),
               TriageName(TriageOf(r->outcome)), key);
    if (!file.dedup_key.empty() && file.dedup_key != key) {
      spdlog::warn("{}: recorded key {} differs", path, file.dedup_key);
    }
    if (abort_on_crash) std::abort();
    status = kExitCrashed;
  }
  return status;
}

int CmdRankApis(const std::vector<std::string>& graphs, const std::string& level,
                const std::string& gp_path, const std::string& libc_path,
                const std::string& format) {
  std::vector<Icfg> tees;
  std::vector<Icfg> all_tas;
  for (const auto& g : graphs) {
    auto tas = ParseIcfg(ReadText(g));
    all_tas.insert(all_tas.end(), tas.begin(), tas.end());
    tees.push_back(Merge(tas, MergeLevel::kTee));
  }
  Icfg merged = level == "global" ? Merge(tees, MergeLevel::kGlobal)
                                  : Merge(all_tas, MergeLevel::kTee);
  auto universe = Classify(merged, ParseApiList(ReadText(gp_path)),
                           ParseApiList(ReadText(libc_path)));
  auto result = GreedyRank(merged, universe.tee);
  if (format == "csv" || format == "both") fmt::print("{}", EmitReport(result, ReportFormat::kCsv));
  if (format == "both") fmt::print("\n");
  if (format == "curve" || format == "both") {
    fmt::print("{}", EmitReport(result, ReportFormat::kCurve));
  }
  return kExitOk;
}

int CmdDebug(const TargetFlags& t, const InvokeFlags& inv, uint16_t port,
             const std::string& host) {
  auto config = t.Config();
  TaManager m(LoadTarget(t.ta), config ? &*config : nullptr, t.Options());
  auto opened = m.OpenSession();
  if (!opened.session) {
    PrintResult(opened.result);
    return kExitCrashed;
  }
  m.BeginInvoke(*opened.session, inv.cmd, inv.Build());
  rsp::Server server;
  uint16_t bound = server.Listen(port, host);
  fmt::print("listening on {}:{}\n", host, bound);
  std::fflush(stdout);
  rsp::RspSession session(m);
  server.ServeOne(session);
  auto r = session.RunToCompletion();
  PrintResult(r);
  return r.crashed() ? kExitCrashed : kExitOk;
}

int CmdServe(const TargetFlags& t, const std::string& socket, proto::ServerOptions opts) {
  auto config = t.Config();
  TaManager m(LoadTarget(t.ta), config ? &*config : nullptr, t.Options());
  proto::Server server(m, opts);
  server.Listen(socket);
  spdlog::info("serving on {}", socket);
  server.Run();
  return kExitOk;
}

void ConfigureLogging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("TAEMU_LOG")) {
    spdlog::set_level(spdlog::level::from_str(lvl));
  }
}

}  // namespace

int main(int argc, char** argv) {
  ConfigureLogging();
  CLI::App app{"taemu: trusted application emulator"};
  app.require_subcommand(1);

  TargetFlags target;
  InvokeFlags invoke;

  auto* run = app.add_subcommand("run", "invoke one command and print the result");
  target.Add(run);
  invoke.Add(run);

  std::string harness;
  FuzzOptions fuzz_opts;
  std::vector<std::string> seed_paths;
  unsigned jobs = 1;
  auto* fuzz = app.add_subcommand("fuzz", "coverage-guided fuzzing campaign");
  target.Add(fuzz);
  fuzz->add_option("harness", harness, "harness file")->required()->check(CLI::ExistingFile);
  fuzz->add_option("--seed", fuzz_opts.seed, "PRNG seed");
  fuzz->add_option("--iters", fuzz_opts.iterations, "mutation budget");
  fuzz->add_option("--seconds", fuzz_opts.seconds, "wall-clock budget when --iters is 0");
  fuzz->add_option("--out", fuzz_opts.out_dir, "output directory");
  fuzz->add_option("--max-len", fuzz_opts.max_input_len, "largest generated input");
  fuzz->add_option("--stop-after", fuzz_opts.stop_after_crashes,
                   "stop after this many unique crashes (0 = never)");
  fuzz->add_option("--input", seed_paths, "seed input file or directory");
  fuzz->add_option("--jobs", jobs, "independent loops, seeds seed..seed+N-1")
      ->check(CLI::Range(1u, 256u));

  std::vector<std::string> inputs;
  bool abort_on_crash = false;
  bool coverage = false;
  auto* replay = app.add_subcommand("replay", "re-run stored inputs from the post-init state");
  target.Add(replay);
  replay->add_option("harness", harness, "harness file")->required()->check(CLI::ExistingFile);
  replay->add_option("inputs", inputs, "input or crash files")->required()->check(CLI::ExistingPath);
  replay->add_flag("--abort-on-crash", abort_on_crash, "abort() on a crash (external fuzzers)");
  replay->add_flag("--coverage", coverage, "report static block coverage of the inputs");

  std::vector<std::string> graphs;
  std::string level = "tee";
  std::string gp_list = std::string(TAEMU_DATA_DIR) + "/gp_apis.txt";
  std::string libc_list = std::string(TAEMU_DATA_DIR) + "/libc_apis.txt";
  std::string format = "csv";
  auto* rank = app.add_subcommand("rank-apis", "greedy ranking of TEE-specific APIs");
  rank->add_option("graphs", graphs, "ICFG files, one TEE per file")->required()
      ->check(CLI::ExistingFile);
  rank->add_option("--level", level, "tee | global")->check(CLI::IsMember({"tee", "global"}));
  rank->add_option("--gp", gp_list, "GP API name list")->check(CLI::ExistingFile);
  rank->add_option("--libc", libc_list, "libc API name list")->check(CLI::ExistingFile);
  rank->add_option("--format", format, "csv | curve | both")
      ->check(CLI::IsMember({"csv", "curve", "both"}));

  uint16_t port = 1234;
  std::string host = "127.0.0.1";
  auto* debug = app.add_subcommand("debug", "GDB remote stub stopped at the invoke entrypoint");
  target.Add(debug);
  invoke.Add(debug);
  debug->add_option("--port", port, "TCP port, 0 for any");
  debug->add_option("--host", host, "listen address");

  std::string source;
  std::string output;
  auto* asm_cmd = app.add_subcommand("asm", "assemble TIR-32 source into a TAELF");
  asm_cmd->add_option("source", source, "assembler source")->required()->check(CLI::ExistingFile);
  asm_cmd->add_option("-o,--output", output, "output TAELF")->required();

  std::string socket;
  proto::ServerOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "interactive protocol over a Unix socket");
  target.Add(serve);
  serve->add_option("--socket", socket, "socket path")->required();
  serve->add_option("--pause-api", serve_opts.pause_api, "pause after calls to this API");
  serve->add_option("--pause-nth", serve_opts.pause_nth, "pause after the Nth call");
  serve->add_option("--store", serve_opts.store_path, "persistent-object store file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return CmdRun(target, invoke);
    if (*fuzz) return CmdFuzz(target, harness, fuzz_opts, seed_paths, jobs);
    if (*replay) return CmdReplay(target, harness, inputs, abort_on_crash, coverage);
    if (*rank) return CmdRankApis(graphs, level, gp_list, libc_list, format);
    if (*debug) return CmdDebug(target, invoke, port, host);
    if (*serve) return CmdServe(target, socket, serve_opts);
    if (*asm_cmd) {
      WriteBytes(output, Assemble(ReadText(source)));
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "bad number: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
