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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "taemu/assembler.h"
#include "taemu/bytes.h"
#include "taemu/error.h"
#include "taemu/fuzz.h"
#include "taemu/greedy.h"
#include "taemu/harness.h"
#include "taemu/manager.h"
#include "taemu/taelf.h"

namespace py = pybind11;
using namespace taemu;

namespace {

std::vector<uint8_t> ToBytes(const py::bytes& b) {
  std::string_view s = b;
  return {s.begin(), s.end()};
}

py::bytes FromBytes(std::span<const uint8_t> b) {
  return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

// Python parameter forms: None, ("value", a, b), bytes, ("memref", bytes, declared).
ParamSlot ToSlot(const py::handle& h) {
  if (h.is_none()) return {};
  if (py::isinstance<py::bytes>(h)) return ParamSlot::Memref(ToBytes(h.cast<py::bytes>()));
  auto t = h.cast<py::tuple>();
  auto kind = t[0].cast<std::string>();
  if (kind == "value") return ParamSlot::Value(t[1].cast<uint32_t>(), t[2].cast<uint32_t>());
  if (kind == "memref") {
    return ParamSlot::Memref(ToBytes(t[1].cast<py::bytes>()), t[2].cast<uint32_t>());
  }
  throw py::value_error("unknown parameter form " + kind);
}

GpParamSet ToParamSet(uint16_t types, const py::list& params) {
  if (params.size() > 4) throw py::value_error("at most 4 parameters");
  GpParamSet set;
  set.param_types = types;
  for (size_t i = 0; i < params.size(); ++i) set.params[i] = ToSlot(params[i]);
  return set;
}

py::dict ResultDict(const InvocationResult& r) {
  py::dict d;
  d["return_code"] = r.return_code;
  d["origin"] = static_cast<int>(r.origin);
  d["crashed"] = r.crashed();
  d["outcome"] = r.outcome.Describe();
  if (r.outcome.is_crash()) {
    d["crash_class"] = CrashClassName(r.outcome.crash_class);
    d["dedup_key"] = DedupKey(r.outcome);
  }
  py::list params;
  for (const auto& p : r.out_params) {
    switch (p.kind) {
      case ParamSlot::Kind::kValue:
        params.append(py::make_tuple("value", p.a, p.b));
        break;
      case ParamSlot::Kind::kMemref:
        params.append(FromBytes(p.bytes));
        break;
      default:
        params.append(py::none());
    }
  }
  d["params"] = params;
  d["log"] = r.log_lines;
  return d;
}

class PyManager {
 public:
  PyManager(const py::bytes& taelf, bool stub_missing, uint64_t budget) {
    ManagerOptions o;
    o.policy = stub_missing ? MissingApiPolicy::kReturnZero : MissingApiPolicy::kCrash;
    o.instruction_budget = budget;
    auto bytes = ToBytes(taelf);
    m_ = LoadTa(bytes, nullptr, o);
  }

  py::tuple Open() {
    auto r = m_->OpenSession();
    py::object id = r.session ? py::cast(*r.session) : py::none();
    return py::make_tuple(id, ResultDict(r.result));
  }
  py::dict Invoke(uint32_t session, uint32_t cmd, uint16_t types, const py::list& params) {
    return ResultDict(m_->InvokeCommand(session, cmd, ToParamSet(types, params)));
  }
  py::dict Close(uint32_t session) { return ResultDict(m_->CloseSession(session)); }

 private:
  std::unique_ptr<TaManager> m_;
};

py::dict Fuzz(const py::bytes& taelf, const std::string& harness, uint64_t seed,
              uint64_t iterations, const std::string& out_dir) {
  auto bytes = ToBytes(taelf);
  FuzzTarget target(ParseTaElf(bytes), nullptr, ParseHarness(harness));
  FuzzOptions o;
  o.seed = seed;
  o.iterations = iterations;
  o.out_dir = out_dir;
  FuzzResult r;
  {
    py::gil_scoped_release release;
    r = FuzzLoop(target, o);
  }
  py::dict d;
  d["execs"] = r.stats.execs;
  d["execs_per_sec"] = r.stats.execs_per_sec;
  d["blocks"] = r.stats.blocks;
  d["crashes_bug"] = r.stats.crashes_bug;
  d["crashes_missing_api"] = r.stats.crashes_missing_api;
  py::list crashes;
  for (const auto& c : r.crashes) {
    crashes.append(py::make_tuple(c.dedup_key, TriageName(c.triage), FromBytes(c.input)));
  }
  d["crashes"] = crashes;
  py::list corpus;
  for (const auto& c : r.corpus) corpus.append(FromBytes(c));
  d["corpus"] = corpus;
  return d;
}

py::object ReplayOne(const py::bytes& taelf, const std::string& harness, const py::bytes& input) {
  auto bytes = ToBytes(taelf);
  FuzzTarget target(ParseTaElf(bytes), nullptr, ParseHarness(harness));
  auto in = ToBytes(input);
  auto r = Replay(target, in);
  if (!r) return py::none();
  return ResultDict(*r);
}

std::string RankApis(const std::vector<std::string>& graphs, const std::string& level,
                     const std::vector<std::string>& gp, const std::vector<std::string>& libc,
                     const std::string& format) {
  std::vector<Icfg> tees;
  std::vector<Icfg> tas;
  for (const auto& g : graphs) {
    auto parsed = ParseIcfg(g);
    tas.insert(tas.end(), parsed.begin(), parsed.end());
    tees.push_back(Merge(parsed, MergeLevel::kTee));
  }
  Icfg merged = level == "global" ? Merge(tees, MergeLevel::kGlobal) : Merge(tas, MergeLevel::kTee);
  auto u = Classify(merged, {gp.begin(), gp.end()}, {libc.begin(), libc.end()});
  return EmitReport(GreedyRank(merged, u.tee),
                    format == "curve" ? ReportFormat::kCurve : ReportFormat::kCsv);
}

}  // namespace

PYBIND11_MODULE(_taemu, m) {
  m.doc() = "TA emulator core";

  py::register_exception<Error>(m, "TaemuError", PyExc_RuntimeError);

  m.def("assemble", [](const std::string& src) { return FromBytes(Assemble(src)); },
        py::arg("source"));
  m.def("taelf_roundtrip", [](const py::bytes& b) {
    auto bytes = ToBytes(b);
    return FromBytes(SerializeTaElf(ParseTaElf(bytes)));
  });

  py::class_<PyManager>(m, "Manager")
      .def(py::init<const py::bytes&, bool, uint64_t>(), py::arg("taelf"),
           py::arg("stub_missing") = false,
           py::arg("budget") = kDefaultInstructionBudget)
      .def("open_session", &PyManager::Open)
      .def("invoke", &PyManager::Invoke, py::arg("session"), py::arg("cmd"),
           py::arg("param_types") = 0, py::arg("params") = py::list())
      .def("close_session", &PyManager::Close);

  m.def("fuzz", &Fuzz, py::arg("taelf"), py::arg("harness"), py::arg("seed") = 1,
        py::arg("iterations") = 1000, py::arg("out_dir") = "");
  m.def("replay", &ReplayOne, py::arg("taelf"), py::arg("harness"), py::arg("input"));
  m.def("rank_apis", &RankApis, py::arg("graphs"), py::arg("level") = "tee",
        py::arg("gp") = std::vector<std::string>{}, py::arg("libc") = std::vector<std::string>{},
        py::arg("format") = "csv");
}
