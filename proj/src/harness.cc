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

#include "taemu/harness.h"

#include <algorithm>
#include <charconv>
#include <set>

#include <fmt/format.h>

#include "taemu/bytes.h"
#include "taemu/error.h"
#include "taemu/gp.h"

namespace taemu {

namespace {

[[noreturn]] void Fail(int line, const std::string& why) {
  throw Error(ErrorCode::kHarnessError, why, line);
}

std::string_view Trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<uint32_t> Number(std::string_view s) {
  s = Trim(s);
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size() || v > UINT32_MAX) {
    return std::nullopt;
  }
  return static_cast<uint32_t>(v);
}

uint32_t NumberOrFail(int line, std::string_view s, const char* what) {
  auto v = Number(s);
  if (!v) Fail(line, fmt::format("bad {} '{}'", what, s));
  return *v;
}

SlotTemplate ParseSlot(int line, std::string_view text) {
  text = Trim(text);
  SlotTemplate t;
  auto colon = text.find(':');
  std::string_view kind = Trim(text.substr(0, colon));
  std::string_view arg =
      colon == std::string_view::npos ? std::string_view{} : Trim(text.substr(colon + 1));
  if (kind == "none") {
    if (!arg.empty()) Fail(line, "none takes no argument");
  } else if (kind == "value") {
    auto comma = arg.find(',');
    if (comma == std::string_view::npos) Fail(line, "value:<a>,<b>");
    t.kind = SlotTemplate::Kind::kValue;
    t.a = NumberOrFail(line, arg.substr(0, comma), "value a");
    t.b = NumberOrFail(line, arg.substr(comma + 1), "value b");
  } else if (kind == "value_in") {
    t.kind = SlotTemplate::Kind::kValueInput;
    t.offset = NumberOrFail(line, arg, "offset");
  } else if (kind == "memref_in") {
    t.kind = SlotTemplate::Kind::kMemrefIn;
    auto c2 = arg.find(':');
    t.offset = NumberOrFail(line, arg.substr(0, c2), "offset");
    if (c2 != std::string_view::npos) {
      t.max_len = NumberOrFail(line, arg.substr(c2 + 1), "length");
    }
  } else if (kind == "memref_out") {
    t.kind = SlotTemplate::Kind::kMemrefOut;
    t.size = NumberOrFail(line, arg, "size");
  } else if (kind == "memref_in_fixed") {
    t.kind = SlotTemplate::Kind::kMemrefInFixed;
    auto bytes = HexDecode(arg);
    if (!bytes) Fail(line, fmt::format("bad hex '{}'", arg));
    t.bytes = std::move(*bytes);
  } else {
    Fail(line, fmt::format("unknown slot template '{}'", kind));
  }
  return t;
}

bool IsValueKind(SlotTemplate::Kind k) {
  return k == SlotTemplate::Kind::kValue || k == SlotTemplate::Kind::kValueInput;
}

void CheckConsistent(int line, uint16_t types,
                     const std::array<SlotTemplate, 4>& slots) {
  for (int i = 0; i < 4; ++i) {
    uint8_t nibble = gp::ParamTypeAt(types, i);
    auto k = slots[i].kind;
    bool ok = false;
    if (nibble == gp::kParamNone) {
      ok = k == SlotTemplate::Kind::kNone;
    } else if (nibble >= gp::kParamValueInput && nibble <= gp::kParamValueInout) {
      ok = IsValueKind(k);
    } else if (nibble >= gp::kParamMemrefInput && nibble <= gp::kParamMemrefInout) {
      ok = k != SlotTemplate::Kind::kNone && !IsValueKind(k);
    }
    if (!ok) {
      Fail(line, fmt::format("slot{} template does not match type nibble {}", i,
                             nibble));
    }
  }
}

std::string FormatSlot(const SlotTemplate& t) {
  switch (t.kind) {
    case SlotTemplate::Kind::kNone: return "none";
    case SlotTemplate::Kind::kValue: return fmt::format("value:0x{:x},0x{:x}", t.a, t.b);
    case SlotTemplate::Kind::kValueInput: return fmt::format("value_in:{}", t.offset);
    case SlotTemplate::Kind::kMemrefIn:
      if (t.max_len) return fmt::format("memref_in:{}:{}", t.offset, *t.max_len);
      return fmt::format("memref_in:{}", t.offset);
    case SlotTemplate::Kind::kMemrefOut: return fmt::format("memref_out:0x{:x}", t.size);
    case SlotTemplate::Kind::kMemrefInFixed:
      return fmt::format("memref_in_fixed:{}", HexEncode(t.bytes));
  }
  return "none";
}

ParamSlot Fill(const SlotTemplate& t, std::span<const uint8_t> input) {
  switch (t.kind) {
    case SlotTemplate::Kind::kNone:
      return {};
    case SlotTemplate::Kind::kValue:
      return ParamSlot::Value(t.a, t.b);
    case SlotTemplate::Kind::kValueInput: {
      uint8_t raw[8] = {};
      for (uint32_t i = 0; i < 8; ++i) {
        uint64_t at = static_cast<uint64_t>(t.offset) + i;
        if (at < input.size()) raw[i] = input[at];
      }
      return ParamSlot::Value(LoadLe32(raw), LoadLe32(raw + 4));
    }
    case SlotTemplate::Kind::kMemrefIn: {
      size_t start = std::min<size_t>(t.offset, input.size());
      size_t len = input.size() - start;
      if (t.max_len) len = std::min<size_t>(len, *t.max_len);
      return ParamSlot::Memref({input.begin() + start, input.begin() + start + len});
    }
    case SlotTemplate::Kind::kMemrefOut:
      return ParamSlot::Memref(std::vector<uint8_t>(t.size, 0));
    case SlotTemplate::Kind::kMemrefInFixed:
      return ParamSlot::Memref(t.bytes);
  }
  return {};
}

}  // namespace

HarnessSpec ParseHarness(std::string_view text) {
  HarnessSpec spec;
  std::set<std::string> seen;
  std::optional<uint32_t> min_len;
  int line_no = 0;
  int types_line = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) Fail(line_no, "expected key = value");
    std::string key(Trim(line.substr(0, eq)));
    std::string_view value = Trim(line.substr(eq + 1));
    if (key != "init" && !seen.insert(key).second) {
      Fail(line_no, fmt::format("duplicate key {}", key));
    }
    if (key == "cmd") {
      if (value.starts_with("byte:")) {
        auto rest = value.substr(5);
        auto pct = rest.find('%');
        if (pct == std::string_view::npos) Fail(line_no, "cmd = byte:<index>%<modulo>");
        spec.cmd_from_input = true;
        spec.cmd_byte = NumberOrFail(line_no, rest.substr(0, pct), "byte index");
        spec.cmd_modulo = NumberOrFail(line_no, rest.substr(pct + 1), "modulo");
        if (spec.cmd_modulo == 0) Fail(line_no, "modulo must be non-zero");
      } else if (value.starts_with("fixed:")) {
        spec.fixed_cmd = NumberOrFail(line_no, value.substr(6), "command");
      } else {
        Fail(line_no, "cmd = byte:<index>%<modulo> | fixed:<id>");
      }
    } else if (key == "param_types") {
      uint32_t v = NumberOrFail(line_no, value, "param_types");
      if (v > 0xFFFF) Fail(line_no, "param_types is 16 bits");
      spec.param_types = static_cast<uint16_t>(v);
      types_line = line_no;
    } else if (key == "min_input_len") {
      min_len = NumberOrFail(line_no, value, "min_input_len");
    } else if (key.size() == 5 && key.starts_with("slot") && key[4] >= '0' &&
               key[4] <= '3') {
      spec.slots[key[4] - '0'] = ParseSlot(line_no, value);
    } else if (key == "init") {
      InitCall call;
      size_t p = 0;
      bool has_cmd = false;
      while (p < value.size()) {
        auto b = value.find_first_not_of(" \t", p);
        if (b == std::string_view::npos) break;
        auto e = value.find_first_of(" \t", b);
        if (e == std::string_view::npos) e = value.size();
        std::string_view tok = value.substr(b, e - b);
        p = e;
        auto teq = tok.find('=');
        if (teq == std::string_view::npos) Fail(line_no, "init tokens are key=value");
        std::string_view k = tok.substr(0, teq);
        std::string_view v = tok.substr(teq + 1);
        if (k == "cmd") {
          call.cmd_id = NumberOrFail(line_no, v, "command");
          has_cmd = true;
        } else if (k == "types") {
          uint32_t t = NumberOrFail(line_no, v, "types");
          if (t > 0xFFFF) Fail(line_no, "types is 16 bits");
          call.param_types = static_cast<uint16_t>(t);
        } else if (k.size() == 5 && k.starts_with("slot") && k[4] >= '0' && k[4] <= '3') {
          SlotTemplate t = ParseSlot(line_no, v);
          if (t.kind == SlotTemplate::Kind::kValueInput ||
              t.kind == SlotTemplate::Kind::kMemrefIn) {
            Fail(line_no, "init calls cannot depend on the fuzz input");
          }
          call.slots[k[4] - '0'] = t;
        } else {
          Fail(line_no, fmt::format("unknown init key {}", k));
        }
      }
      if (!has_cmd) Fail(line_no, "init needs cmd=");
      CheckConsistent(line_no, call.param_types, call.slots);
      spec.init.push_back(std::move(call));
    } else {
      Fail(line_no, fmt::format("unknown key {}", key));
    }
  }
  CheckConsistent(types_line, spec.param_types, spec.slots);

  uint32_t needed = spec.cmd_from_input ? spec.cmd_byte + 1 : 0;
  for (const auto& t : spec.slots) {
    if (t.kind == SlotTemplate::Kind::kValueInput) needed = std::max(needed, t.offset + 8);
    if (t.kind == SlotTemplate::Kind::kMemrefIn) needed = std::max(needed, t.offset);
  }
  if (min_len && *min_len < needed) {
    Fail(0, fmt::format("min_input_len {} is below the {} bytes the rules consume",
                        *min_len, needed));
  }
  spec.min_input_len = min_len.value_or(needed);
  return spec;
}

std::string FormatHarness(const HarnessSpec& spec) {
  std::string out;
  if (spec.cmd_from_input) {
    out += fmt::format("cmd = byte:{}%{}\n", spec.cmd_byte, spec.cmd_modulo);
  } else {
    out += fmt::format("cmd = fixed:{}\n", spec.fixed_cmd);
  }
  out += fmt::format("param_types = 0x{:04x}\n", spec.param_types);
  out += fmt::format("min_input_len = {}\n", spec.min_input_len);
  for (int i = 0; i < 4; ++i) {
    out += fmt::format("slot{} = {}\n", i, FormatSlot(spec.slots[i]));
  }
  for (const auto& call : spec.init) {
    out += fmt::format("init = cmd={} types=0x{:04x}", call.cmd_id, call.param_types);
    for (int i = 0; i < 4; ++i) {
      if (call.slots[i].kind != SlotTemplate::Kind::kNone) {
        out += fmt::format(" slot{}={}", i, FormatSlot(call.slots[i]));
      }
    }
    out += "\n";
  }
  return out;
}

std::optional<BuiltInvocation> BuildParamSet(const HarnessSpec& spec,
                                             std::span<const uint8_t> input) {
  if (input.size() < spec.min_input_len) return std::nullopt;
  BuiltInvocation out;
  if (spec.cmd_from_input) {
    uint32_t byte = spec.cmd_byte < input.size() ? input[spec.cmd_byte] : 0;
    out.cmd_id = byte % spec.cmd_modulo;
  } else {
    out.cmd_id = spec.fixed_cmd;
  }
  out.params.param_types = spec.param_types;
  for (int i = 0; i < 4; ++i) out.params.params[i] = Fill(spec.slots[i], input);
  return out;
}

BuiltInvocation BuildInitCall(const InitCall& call) {
  BuiltInvocation out;
  out.cmd_id = call.cmd_id;
  out.params.param_types = call.param_types;
  for (int i = 0; i < 4; ++i) out.params.params[i] = Fill(call.slots[i], {});
  return out;
}

}  // namespace taemu
