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

#include "taemu/assembler.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "taemu/bytes.h"
#include "taemu/error.h"
#include "taemu/gp.h"
#include "taemu/isa.h"
#include "taemu/layout.h"

namespace taemu {

namespace {

using isa::Opcode;

constexpr uint32_t kDefaultTextBase = 0x00010000;

[[noreturn]] void Fail(int line, const std::string& why) {
  throw Error(ErrorCode::kAssemblyError, why, line);
}

std::string_view Trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string Upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool IsIdentStart(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
         c == '$';
}

bool IsIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
         c == '$';
}

bool IsIdent(std::string_view s) {
  if (s.empty() || !IsIdentStart(s[0])) return false;
  return std::all_of(s.begin(), s.end(), IsIdentChar);
}

// Strips a trailing comment, honouring quoted strings.
std::string_view StripComment(std::string_view line) {
  bool in_str = false;
  char quote = 0;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_str) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        in_str = false;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      in_str = true;
      quote = c;
    } else if (c == ';' || c == '#') {
      return line.substr(0, i);
    } else if (c == '/' && i + 1 < line.size() && line[i + 1] == '/') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::vector<std::string> SplitOperands(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  bool in_str = false;
  char quote = 0;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_str) {
      cur.push_back(c);
      if (c == '\\' && i + 1 < text.size()) {
        cur.push_back(text[++i]);
      } else if (c == quote) {
        in_str = false;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      in_str = true;
      quote = c;
      cur.push_back(c);
    } else if (c == ',') {
      out.emplace_back(Trim(cur));
      cur.clear();
    } else if (c != '[' && c != ']') {
      cur.push_back(c);
    }
  }
  if (!Trim(cur).empty() || !out.empty()) out.emplace_back(Trim(cur));
  return out;
}

std::optional<int64_t> ParseNumber(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.size() >= 3 && s.front() == '\'' && s.back() == '\'') {
    std::string_view body = s.substr(1, s.size() - 2);
    if (body.size() == 1) return static_cast<unsigned char>(body[0]);
    if (body.size() == 2 && body[0] == '\\') {
      switch (body[1]) {
        case 'n': return '\n';
        case 't': return '\t';
        case '0': return 0;
        case '\\': return '\\';
        case '\'': return '\'';
        default: return std::nullopt;
      }
    }
    return std::nullopt;
  }
  bool neg = false;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  } else if (s.size() > 2 && s[0] == '0' && (s[1] == 'b' || s[1] == 'B')) {
    base = 2;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  if (v > 0xFFFFFFFFull) return std::nullopt;
  return neg ? -static_cast<int64_t>(v) : static_cast<int64_t>(v);
}

std::optional<uint8_t> ParseRegister(std::string_view s) {
  std::string u = Upper(s);
  if (u == "SP") return isa::kSp;
  if (u == "LR") return isa::kLr;
  if (u == "PC") return isa::kPc;
  if (u == "IP") return isa::kIp;
  if (u.size() >= 2 && u[0] == 'R') {
    int v = 0;
    auto [ptr, ec] = std::from_chars(u.data() + 1, u.data() + u.size(), v);
    if (ec == std::errc() && ptr == u.data() + u.size() && v >= 0 && v < 16) {
      return static_cast<uint8_t>(v);
    }
  }
  return std::nullopt;
}

std::vector<uint8_t> ParseString(int line, std::string_view s) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') {
    Fail(line, "expected a quoted string");
  }
  std::vector<uint8_t> out;
  for (size_t i = 1; i + 1 < s.size(); ++i) {
    char c = s[i];
    if (c != '\\') {
      out.push_back(static_cast<uint8_t>(c));
      continue;
    }
    if (i + 2 >= s.size()) Fail(line, "dangling escape");
    char e = s[++i];
    switch (e) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case '0': out.push_back(0); break;
      case '\\': out.push_back('\\'); break;
      case '"': out.push_back('"'); break;
      case 'x': {
        if (i + 2 >= s.size() - 1 + 1) Fail(line, "bad \\x escape");
        auto v = HexDecode(s.substr(i + 1, 2));
        if (!v) Fail(line, "bad \\x escape");
        out.push_back((*v)[0]);
        i += 2;
        break;
      }
      default:
        Fail(line, fmt::format("unknown escape \\{}", e));
    }
  }
  return out;
}

uint8_t ParsePerms(int line, std::string_view s) {
  uint8_t p = 0;
  for (char c : s) {
    switch (std::tolower(static_cast<unsigned char>(c))) {
      case 'r': p |= kPermR; break;
      case 'w': p |= kPermW; break;
      case 'x': p |= kPermX; break;
      default: Fail(line, fmt::format("bad permission string '{}'", s));
    }
  }
  return p;
}

struct Segment {
  std::string name;
  std::optional<uint32_t> base;
  uint8_t perms = 0;
  uint32_t size = 0;
  bool pending_leader = false;
};

enum class ItemKind { kInstr, kWord, kBytes };

struct Item {
  int line = 0;
  int seg = 0;
  uint32_t offset = 0;
  ItemKind kind = ItemKind::kInstr;
  std::string mnemonic;
  std::vector<std::string> operands;
  std::vector<uint8_t> raw;
  bool leader = false;
};

struct Location {
  int seg;
  uint32_t offset;
  int line;
};

class Assembler {
 public:
  AssemblyResult Run(std::string_view source) {
    int line_no = 0;
    size_t pos = 0;
    while (pos <= source.size()) {
      size_t eol = source.find('\n', pos);
      if (eol == std::string_view::npos) eol = source.size();
      ++line_no;
      ParseLine(line_no, source.substr(pos, eol - pos));
      pos = eol + 1;
    }
    LayoutSegments();
    return Emit();
  }

 private:
  int CurrentSegment(int line) {
    if (current_ < 0) current_ = SegmentNamed("text", kDefaultTextBase, kPermRX, line);
    return current_;
  }

  int SegmentNamed(const std::string& name, std::optional<uint32_t> base,
                   uint8_t perms, int line) {
    for (size_t i = 0; i < segs_.size(); ++i) {
      if (segs_[i].name != name) continue;
      if ((base && segs_[i].base != base) || perms != segs_[i].perms) {
        Fail(line, fmt::format("segment {} redeclared differently", name));
      }
      return static_cast<int>(i);
    }
    segs_.push_back(Segment{name, base, perms, 0, false});
    return static_cast<int>(segs_.size() - 1);
  }

  void DefineLabel(int line, const std::string& name) {
    if (!IsIdent(name)) Fail(line, fmt::format("bad label '{}'", name));
    int seg = CurrentSegment(line);
    if (!labels_.emplace(name, Location{seg, segs_[seg].size, line}).second) {
      Fail(line, fmt::format("duplicate label {}", name));
    }
    if (segs_[seg].perms & kPermX) segs_[seg].pending_leader = true;
  }

  void AddItem(Item item, uint32_t size) {
    Segment& seg = segs_[item.seg];
    item.offset = seg.size;
    if (item.kind == ItemKind::kInstr) {
      item.leader = seg.pending_leader;
      seg.pending_leader = false;
    } else {
      seg.pending_leader = false;
    }
    uint64_t new_size = static_cast<uint64_t>(seg.size) + size;
    if (new_size > 0x10000000ull) Fail(item.line, "segment too large");
    seg.size = static_cast<uint32_t>(new_size);
    items_.push_back(std::move(item));
  }

  void ParseLine(int line, std::string_view raw) {
    std::string_view text = Trim(StripComment(raw));
    // Leading labels.
    for (;;) {
      auto colon = text.find(':');
      if (colon == std::string_view::npos) break;
      std::string_view head = Trim(text.substr(0, colon));
      if (!IsIdent(head) || head[0] == '.') break;
      DefineLabel(line, std::string(head));
      text = Trim(text.substr(colon + 1));
    }
    if (text.empty()) return;
    auto space = text.find_first_of(" \t");
    std::string_view head = text.substr(0, space);
    std::string_view rest =
        space == std::string_view::npos ? std::string_view{} : Trim(text.substr(space));
    if (head[0] == '.') {
      Directive(line, head, rest);
    } else {
      Instruction(line, Upper(head), rest);
    }
  }

  void Directive(int line, std::string_view name, std::string_view rest) {
    auto ops = SplitOperands(rest);
    auto words = [&]() {
      std::vector<std::string> out;
      size_t p = 0;
      while (p < rest.size()) {
        auto b = rest.find_first_not_of(" \t", p);
        if (b == std::string_view::npos) break;
        auto e = rest.find_first_of(" \t", b);
        if (e == std::string_view::npos) e = rest.size();
        out.emplace_back(rest.substr(b, e - b));
        p = e;
      }
      return out;
    };
    if (name == ".segment") {
      auto w = words();
      if (w.size() == 1) {
        bool found = false;
        for (size_t i = 0; i < segs_.size(); ++i) {
          if (segs_[i].name == w[0]) {
            current_ = static_cast<int>(i);
            found = true;
          }
        }
        if (!found) Fail(line, fmt::format("unknown segment {}", w[0]));
        return;
      }
      if (w.size() != 3) Fail(line, ".segment <name> <vaddr> <perms>");
      auto base = ParseNumber(w[1]);
      if (!base || *base < 0) Fail(line, "bad segment address");
      current_ = SegmentNamed(w[0], static_cast<uint32_t>(*base),
                              ParsePerms(line, w[2]), line);
    } else if (name == ".text") {
      bool found = false;
      for (size_t i = 0; i < segs_.size(); ++i) {
        if (segs_[i].name == "text") {
          current_ = static_cast<int>(i);
          found = true;
        }
      }
      if (!found) current_ = SegmentNamed("text", kDefaultTextBase, kPermRX, line);
    } else if (name == ".data") {
      bool found = false;
      for (size_t i = 0; i < segs_.size(); ++i) {
        if (segs_[i].name == "data") {
          current_ = static_cast<int>(i);
          found = true;
        }
      }
      if (!found) current_ = SegmentNamed("data", std::nullopt, kPermRW, line);
    } else if (name == ".import") {
      auto w = words();
      if (w.size() != 1 || !IsIdent(w[0])) Fail(line, ".import <name>");
      if (std::find(imports_.begin(), imports_.end(), w[0]) != imports_.end()) {
        Fail(line, fmt::format("duplicate import {}", w[0]));
      }
      if (is_static_) Fail(line, "statically linked TA cannot import");
      imports_.push_back(w[0]);
    } else if (name == ".static") {
      if (!imports_.empty()) Fail(line, "statically linked TA cannot import");
      is_static_ = true;
    } else if (name == ".got") {
      auto w = words();
      auto base = w.size() == 1 ? ParseNumber(w[0]) : std::nullopt;
      if (!base || *base < 0) Fail(line, ".got <vaddr>");
      got_base_ = static_cast<uint32_t>(*base);
    } else if (name == ".entry") {
      auto w = words();
      if (w.empty() || w.size() > 2) Fail(line, ".entry <entrypoint> [label]");
      if (!gp::IsEntryPointName(w[0])) {
        Fail(line, fmt::format("{} is not a GP entrypoint", w[0]));
      }
      if (entries_.contains(w[0])) {
        Fail(line, fmt::format("duplicate entrypoint {}", w[0]));
      }
      if (w.size() == 2) {
        entries_[w[0]] = EntryRef{w[1], {}, line};
      } else {
        int seg = CurrentSegment(line);
        segs_[seg].pending_leader = true;
        entries_[w[0]] = EntryRef{"", Location{seg, segs_[seg].size, line}, line};
      }
    } else if (name == ".word") {
      if (ops.empty()) Fail(line, ".word needs values");
      for (auto& op : ops) {
        Item item;
        item.line = line;
        item.seg = CurrentSegment(line);
        item.kind = ItemKind::kWord;
        item.operands = {op};
        AddItem(std::move(item), 4);
      }
    } else if (name == ".byte") {
      if (ops.empty()) Fail(line, ".byte needs values");
      Item item;
      item.line = line;
      item.seg = CurrentSegment(line);
      item.kind = ItemKind::kBytes;
      for (auto& op : ops) {
        auto v = ParseNumber(op);
        if (!v || *v < -128 || *v > 255) Fail(line, fmt::format("bad byte '{}'", op));
        item.raw.push_back(static_cast<uint8_t>(*v));
      }
      uint32_t n = static_cast<uint32_t>(item.raw.size());
      AddItem(std::move(item), n);
    } else if (name == ".ascii" || name == ".asciz") {
      Item item;
      item.line = line;
      item.seg = CurrentSegment(line);
      item.kind = ItemKind::kBytes;
      item.raw = ParseString(line, rest);
      if (name == ".asciz") item.raw.push_back(0);
      uint32_t n = static_cast<uint32_t>(item.raw.size());
      AddItem(std::move(item), n);
    } else if (name == ".space") {
      if (ops.empty() || ops.size() > 2) Fail(line, ".space <n>[, fill]");
      auto n = ParseNumber(ops[0]);
      if (!n || *n < 0 || *n > (1 << 24)) Fail(line, "bad .space size");
      uint8_t fill = 0;
      if (ops.size() == 2) {
        auto f = ParseNumber(ops[1]);
        if (!f || *f < 0 || *f > 255) Fail(line, "bad .space fill");
        fill = static_cast<uint8_t>(*f);
      }
      Item item;
      item.line = line;
      item.seg = CurrentSegment(line);
      item.kind = ItemKind::kBytes;
      item.raw.assign(static_cast<size_t>(*n), fill);
      AddItem(std::move(item), static_cast<uint32_t>(*n));
    } else if (name == ".align") {
      auto n = ops.size() == 1 ? ParseNumber(ops[0]) : std::nullopt;
      if (!n || *n <= 0 || (*n & (*n - 1)) != 0 || *n > 4096) {
        Fail(line, ".align needs a power of two");
      }
      int seg = CurrentSegment(line);
      uint32_t pad = (static_cast<uint32_t>(*n) - segs_[seg].size % *n) % *n;
      if (pad == 0) return;
      Item item;
      item.line = line;
      item.seg = seg;
      item.kind = ItemKind::kBytes;
      item.raw.assign(pad, 0);
      bool leader = segs_[seg].pending_leader;
      AddItem(std::move(item), pad);
      segs_[seg].pending_leader = leader;
    } else {
      Fail(line, fmt::format("unknown directive {}", name));
    }
  }

  void Instruction(int line, const std::string& mnemonic, std::string_view rest) {
    Item item;
    item.line = line;
    item.seg = CurrentSegment(line);
    item.kind = ItemKind::kInstr;
    item.mnemonic = mnemonic;
    item.operands = SplitOperands(rest);
    uint32_t size = isa::kInstrSize;
    bool transfer = false;
    if (mnemonic == "NOP") {
      // MOV r0, r0
    } else if (mnemonic == "CALL" && item.operands.size() == 1 &&
               !item.operands[0].empty() && item.operands[0][0] == '@') {
      size = 3 * isa::kInstrSize;  // MOVI ip, slot; LDW ip, ip, 0; CALLR ip
      transfer = true;
    } else {
      auto op = isa::OpcodeFromMnemonic(mnemonic);
      if (!op) Fail(line, fmt::format("unknown mnemonic {}", mnemonic));
      transfer = isa::IsControlTransfer(*op);
    }
    int seg = item.seg;
    AddItem(std::move(item), size);
    if (transfer && (segs_[seg].perms & kPermX)) segs_[seg].pending_leader = true;
  }

  void LayoutSegments() {
    uint64_t top = 0;
    for (const auto& s : segs_) {
      if (s.base) top = std::max<uint64_t>(top, static_cast<uint64_t>(*s.base) + s.size);
    }
    auto page_up = [](uint64_t v) { return (v + kPageSize - 1) & ~uint64_t{kPageSize - 1}; };
    uint64_t cursor = page_up(top);
    for (auto& s : segs_) {
      if (s.base) continue;
      s.base = static_cast<uint32_t>(cursor);
      cursor = page_up(cursor + std::max<uint32_t>(s.size, 1));
    }
    if (!imports_.empty() && !got_base_) got_base_ = static_cast<uint32_t>(cursor);
  }

  uint32_t Address(const Location& loc) const {
    return *segs_[loc.seg].base + loc.offset;
  }

  uint32_t ResolveExpr(int line, const std::string& text) const {
    if (auto n = ParseNumber(text)) {
      if (*n < INT32_MIN) Fail(line, fmt::format("immediate '{}' out of range", text));
      return static_cast<uint32_t>(*n);
    }
    if (!text.empty() && text[0] == '@') {
      std::string name = text.substr(1);
      auto it = std::find(imports_.begin(), imports_.end(), name);
      if (it == imports_.end()) Fail(line, fmt::format("undeclared import {}", name));
      return *got_base_ + 4 * static_cast<uint32_t>(it - imports_.begin());
    }
    std::string sym = text;
    int64_t addend = 0;
    auto op = text.find_first_of("+-", 1);
    if (op != std::string::npos) {
      sym = std::string(Trim(text.substr(0, op)));
      auto n = ParseNumber(Trim(std::string_view(text).substr(op)));
      if (!n) Fail(line, fmt::format("bad expression '{}'", text));
      addend = *n;
    }
    auto it = labels_.find(sym);
    if (it == labels_.end()) Fail(line, fmt::format("undefined label {}", sym));
    return static_cast<uint32_t>(Address(it->second) + addend);
  }

  uint8_t Reg(int line, const std::string& text) const {
    auto r = ParseRegister(text);
    if (!r) Fail(line, fmt::format("bad register '{}'", text));
    return *r;
  }

  void Expect(const Item& item, size_t lo, size_t hi) const {
    if (item.operands.size() < lo || item.operands.size() > hi) {
      Fail(item.line, fmt::format("{} takes {} operand(s)", item.mnemonic,
                                  lo == hi ? fmt::format("{}", lo)
                                           : fmt::format("{}-{}", lo, hi)));
    }
  }

  std::vector<isa::Instr> Encode(const Item& item, uint32_t pc) const {
    const auto& o = item.operands;
    int line = item.line;
    isa::Instr in;
    if (item.mnemonic == "NOP") {
      Expect(item, 0, 0);
      in.op = Opcode::kMov;
      return {in};
    }
    if (item.mnemonic == "CALL" && o.size() == 1 && o[0][0] == '@') {
      uint32_t slot = ResolveExpr(line, o[0]);
      return {isa::Instr{Opcode::kMovi, isa::kIp, 0, 0, static_cast<int32_t>(slot)},
              isa::Instr{Opcode::kLdw, isa::kIp, isa::kIp, 0, 0},
              isa::Instr{Opcode::kCallr, 0, isa::kIp, 0, 0}};
    }
    in.op = *isa::OpcodeFromMnemonic(item.mnemonic);
    auto second = [&](const std::string& text) {
      if (auto r = ParseRegister(text)) {
        in.rs2 = *r;
      } else {
        in.rs2 = isa::kImmOperand;
        in.imm = static_cast<int32_t>(ResolveExpr(line, text));
      }
    };
    switch (in.op) {
      case Opcode::kMovi:
        Expect(item, 2, 2);
        in.rd = Reg(line, o[0]);
        in.imm = static_cast<int32_t>(ResolveExpr(line, o[1]));
        break;
      case Opcode::kMov:
        Expect(item, 2, 2);
        in.rd = Reg(line, o[0]);
        in.rs1 = Reg(line, o[1]);
        break;
      case Opcode::kAdd:
      case Opcode::kSub:
      case Opcode::kAnd:
      case Opcode::kOr:
      case Opcode::kXor:
      case Opcode::kShl:
      case Opcode::kShr:
        Expect(item, 3, 3);
        in.rd = Reg(line, o[0]);
        in.rs1 = Reg(line, o[1]);
        second(o[2]);
        break;
      case Opcode::kCmp:
        Expect(item, 2, 2);
        in.rs1 = Reg(line, o[0]);
        second(o[1]);
        break;
      case Opcode::kLdw:
      case Opcode::kLdb:
      case Opcode::kStw:
      case Opcode::kStb:
        Expect(item, 2, 3);
        in.rd = Reg(line, o[0]);
        in.rs1 = Reg(line, o[1]);
        if (o.size() == 3) in.imm = static_cast<int32_t>(ResolveExpr(line, o[2]));
        break;
      case Opcode::kBeq:
      case Opcode::kBne:
      case Opcode::kBlt:
      case Opcode::kBge:
      case Opcode::kJmp:
        Expect(item, 1, 1);
        in.imm = static_cast<int32_t>(ResolveExpr(line, o[0]) - pc);
        break;
      case Opcode::kCall:
        Expect(item, 1, 1);
        in.imm = static_cast<int32_t>(ResolveExpr(line, o[0]));
        break;
      case Opcode::kCallr:
        Expect(item, 1, 1);
        in.rs1 = Reg(line, o[0]);
        break;
      case Opcode::kPush:
      case Opcode::kPop:
        Expect(item, 1, 1);
        in.rd = Reg(line, o[0]);
        break;
      case Opcode::kRet:
      case Opcode::kHalt:
        Expect(item, 0, 0);
        break;
    }
    return {in};
  }

  AssemblyResult Emit() {
    AssemblyResult result;
    TaElfFile& f = result.file;
    f.is_static = is_static_;
    std::vector<std::vector<uint8_t>> bytes(segs_.size());
    for (size_t i = 0; i < segs_.size(); ++i) bytes[i].reserve(segs_[i].size);
    std::set<uint32_t> blocks;
    for (const auto& item : items_) {
      auto& out = bytes[item.seg];
      uint32_t addr = *segs_[item.seg].base + item.offset;
      switch (item.kind) {
        case ItemKind::kBytes:
          out.insert(out.end(), item.raw.begin(), item.raw.end());
          break;
        case ItemKind::kWord: {
          uint32_t v = ResolveExpr(item.line, item.operands[0]);
          uint8_t b[4];
          StoreLe32(b, v);
          out.insert(out.end(), b, b + 4);
          break;
        }
        case ItemKind::kInstr: {
          if (addr % isa::kInstrSize != 0) {
            Fail(item.line, "instruction not 8-byte aligned (use .align 8)");
          }
          if (item.leader) blocks.insert(addr);
          uint32_t pc = addr;
          for (const auto& in : Encode(item, pc)) {
            auto enc = isa::Encode(in);
            out.insert(out.end(), enc.begin(), enc.end());
            pc += isa::kInstrSize;
          }
          break;
        }
      }
    }
    for (size_t i = 0; i < segs_.size(); ++i) {
      if (segs_[i].size == 0) continue;
      f.segments.push_back(TaSegment{*segs_[i].base, segs_[i].perms, std::move(bytes[i])});
    }
    if (!imports_.empty()) {
      TaSegment got{*got_base_, kPermRW, std::vector<uint8_t>(4 * imports_.size(), 0)};
      f.segments.push_back(std::move(got));
      for (size_t i = 0; i < imports_.size(); ++i) {
        f.imports.push_back(TaImport{*got_base_ + 4 * static_cast<uint32_t>(i), imports_[i]});
      }
    }
    for (const auto& [name, ref] : entries_) {
      uint32_t addr = 0;
      if (!ref.label.empty()) {
        auto it = labels_.find(ref.label);
        if (it == labels_.end()) Fail(ref.line, fmt::format("undefined label {}", ref.label));
        addr = Address(it->second);
      } else {
        addr = Address(ref.loc);
      }
      f.entrypoints[name] = addr;
    }
    for (const auto& [name, loc] : labels_) {
      result.labels[name] = Address(loc);
      if ((segs_[loc.seg].perms & kPermX) && loc.offset < segs_[loc.seg].size) {
        // Labels in code segments start blocks even when no instruction item
        // directly follows them in source order.
        uint32_t addr = Address(loc);
        if (addr % isa::kInstrSize == 0) {
          for (const auto& item : items_) {
            if (item.seg == loc.seg && item.offset == loc.offset &&
                item.kind == ItemKind::kInstr) {
              blocks.insert(addr);
              break;
            }
          }
        }
      }
    }
    for (const auto& [name, addr] : f.entrypoints) blocks.insert(addr);
    f.blocks.assign(blocks.begin(), blocks.end());
    ValidateTaElf(f);
    return result;
  }

  struct EntryRef {
    std::string label;
    Location loc;
    int line;
  };

  std::vector<Segment> segs_;
  int current_ = -1;
  std::vector<Item> items_;
  std::map<std::string, Location> labels_;
  std::vector<std::string> imports_;
  std::map<std::string, EntryRef> entries_;
  std::optional<uint32_t> got_base_;
  bool is_static_ = false;
};

}  // namespace

AssemblyResult AssembleWithSymbols(std::string_view source) {
  return Assembler().Run(source);
}

std::vector<uint8_t> Assemble(std::string_view source) {
  return SerializeTaElf(AssembleWithSymbols(source).file);
}

}  // namespace taemu
