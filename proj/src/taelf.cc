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

#include "taemu/taelf.h"

#include <algorithm>
#include <charconv>
#include <set>

#include <fmt/format.h>

#include "taemu/bytes.h"
#include "taemu/error.h"
#include "taemu/gp.h"
#include "taemu/layout.h"

namespace taemu {

namespace {

constexpr uint8_t kElfMagic[4] = {0x7F, 'E', 'L', 'F'};
constexpr uint16_t kEtExec = 2;
constexpr uint32_t kPtLoad = 1;
constexpr uint32_t kShtProgbits = 1;
constexpr uint32_t kShtStrtab = 3;
constexpr uint32_t kEhdrSize = 52;
constexpr uint32_t kPhdrSize = 32;
constexpr uint32_t kShdrSize = 40;
constexpr uint32_t kFlagStatic = 0x1;

constexpr std::string_view kSecImports = ".taimp";
constexpr std::string_view kSecEntries = ".taent";
constexpr std::string_view kSecBlocks = ".tablk";
constexpr std::string_view kSecShstrtab = ".shstrtab";

[[noreturn]] void Malformed(const std::string& why) {
  throw Error(ErrorCode::kMalformedContainer, why);
}

template <typename T>
T Need(std::optional<T> v, const char* what) {
  if (!v) Malformed(fmt::format("truncated {}", what));
  return *v;
}

uint64_t SegmentEnd(const TaSegment& s) {
  return static_cast<uint64_t>(s.vaddr) + s.bytes.size();
}

const TaSegment* SegmentContaining(const TaElfFile& f, uint32_t addr,
                                   uint64_t size) {
  for (const auto& s : f.segments) {
    if (addr >= s.vaddr && addr + size <= SegmentEnd(s)) return &s;
  }
  return nullptr;
}

std::vector<uint8_t> EncodeNamedRecords(
    const std::vector<std::pair<uint32_t, std::string>>& records) {
  ByteWriter w;
  for (const auto& [addr, name] : records) {
    w.U32(addr);
    w.U16(static_cast<uint16_t>(name.size()));
    w.Str(name);
  }
  return w.Take();
}

std::vector<std::pair<uint32_t, std::string>> DecodeNamedRecords(
    std::span<const uint8_t> data, const char* what) {
  std::vector<std::pair<uint32_t, std::string>> out;
  ByteReader r(data);
  while (r.remaining() > 0) {
    uint32_t addr = Need(r.U32(), what);
    uint16_t len = Need(r.U16(), what);
    std::string name = Need(r.Str(len), what);
    out.emplace_back(addr, std::move(name));
  }
  return out;
}

}  // namespace

std::optional<uint32_t> TaElfFile::entry(std::string_view name) const {
  auto it = entrypoints.find(std::string(name));
  if (it == entrypoints.end()) return std::nullopt;
  return it->second;
}

void ValidateTaElf(const TaElfFile& f) {
  if (f.segments.empty()) Malformed("no loadable segments");
  std::vector<const TaSegment*> sorted;
  for (const auto& s : f.segments) {
    if (s.vaddr % 4 != 0) {
      Malformed(fmt::format("segment 0x{:08x} not 4-byte aligned", s.vaddr));
    }
    if (s.bytes.empty()) Malformed("empty segment");
    if (SegmentEnd(s) > 0x100000000ull) Malformed("segment wraps address space");
    if ((s.flags & ~kPermRWX) != 0) Malformed("bad segment flags");
    sorted.push_back(&s);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](auto* a, auto* b) { return a->vaddr < b->vaddr; });
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (SegmentEnd(*sorted[i - 1]) > sorted[i]->vaddr) {
      Malformed(fmt::format("segments overlap at 0x{:08x}", sorted[i]->vaddr));
    }
  }
  if (f.is_static && !f.imports.empty()) {
    Malformed("statically linked TA declares imports");
  }
  if (f.imports.size() > layout::kMaxImports) Malformed("too many imports");
  std::set<uint32_t> slots;
  for (const auto& imp : f.imports) {
    if (imp.name.empty()) Malformed("import without a name");
    if (imp.slot_vaddr % 4 != 0) Malformed("unaligned import slot");
    const TaSegment* seg = SegmentContaining(f, imp.slot_vaddr, 4);
    if (seg == nullptr || (seg->flags & kPermW) == 0) {
      Malformed(fmt::format("import slot 0x{:08x} for {} is not in a writable "
                            "segment",
                            imp.slot_vaddr, imp.name));
    }
    if (!slots.insert(imp.slot_vaddr).second) {
      Malformed(fmt::format("import slot 0x{:08x} shared", imp.slot_vaddr));
    }
  }
  for (const auto& [name, vaddr] : f.entrypoints) {
    if (!gp::IsEntryPointName(name)) {
      Malformed(fmt::format("unknown entrypoint name {}", name));
    }
    const TaSegment* seg = SegmentContaining(f, vaddr, 1);
    if (seg == nullptr || (seg->flags & kPermX) == 0) {
      Malformed(fmt::format("entrypoint {} outside executable segments", name));
    }
  }
  for (size_t i = 0; i < f.blocks.size(); ++i) {
    if (i > 0 && f.blocks[i] <= f.blocks[i - 1]) {
      Malformed("block map not strictly ascending");
    }
    if (SegmentContaining(f, f.blocks[i], 1) == nullptr) {
      Malformed(fmt::format("block 0x{:08x} outside segments", f.blocks[i]));
    }
  }
  if (!f.entrypoints.contains(std::string(gp::kInvokeCommandEntryPoint))) {
    throw Error(ErrorCode::kMissingEntrypoint,
                "no TA_InvokeCommandEntryPoint entrypoint");
  }
}

std::vector<uint8_t> SerializeTaElf(const TaElfFile& f) {
  ByteWriter w;
  // ELF header; offsets are patched once the layout is known.
  w.Bytes(kElfMagic);
  w.U8(1);  // ELFCLASS32
  w.U8(1);  // ELFDATA2LSB
  w.U8(1);  // EV_CURRENT
  for (int i = 0; i < 9; ++i) w.U8(0);
  w.U16(kEtExec);
  w.U16(kTaElfMachine);
  w.U32(1);
  w.U32(f.entry(gp::kInvokeCommandEntryPoint).value_or(0));
  w.U32(kEhdrSize);  // e_phoff
  const size_t shoff_at = w.size();
  w.U32(0);          // e_shoff
  w.U32(f.is_static ? kFlagStatic : 0);
  w.U16(kEhdrSize);
  w.U16(kPhdrSize);
  w.U16(static_cast<uint16_t>(f.segments.size()));
  w.U16(kShdrSize);
  w.U16(5);  // null, .taimp, .taent, .tablk, .shstrtab
  w.U16(4);

  std::vector<size_t> phdr_offset_at;
  for (const auto& s : f.segments) {
    w.U32(kPtLoad);
    phdr_offset_at.push_back(w.size());
    w.U32(0);
    w.U32(s.vaddr);
    w.U32(s.vaddr);
    w.U32(static_cast<uint32_t>(s.bytes.size()));
    w.U32(static_cast<uint32_t>(s.bytes.size()));
    w.U32(s.flags);
    w.U32(4);
  }
  for (size_t i = 0; i < f.segments.size(); ++i) {
    w.Align(4);
    w.Patch32(phdr_offset_at[i], static_cast<uint32_t>(w.size()));
    w.Bytes(f.segments[i].bytes);
  }

  std::vector<std::pair<uint32_t, std::string>> imp;
  for (const auto& i : f.imports) imp.emplace_back(i.slot_vaddr, i.name);
  std::vector<std::pair<uint32_t, std::string>> ent;
  for (const auto& [name, vaddr] : f.entrypoints) ent.emplace_back(vaddr, name);
  ByteWriter blk;
  for (uint32_t b : f.blocks) blk.U32(b);
  const std::string shstrtab = std::string("\0", 1) + std::string(kSecImports) +
                               '\0' + std::string(kSecEntries) + '\0' +
                               std::string(kSecBlocks) + '\0' +
                               std::string(kSecShstrtab) + '\0';
  const uint32_t name_imports = 1;
  const uint32_t name_entries = name_imports + kSecImports.size() + 1;
  const uint32_t name_blocks = name_entries + kSecEntries.size() + 1;
  const uint32_t name_shstrtab = name_blocks + kSecBlocks.size() + 1;

  struct Sec {
    uint32_t name;
    uint32_t type;
    std::vector<uint8_t> data;
    uint32_t align;
    uint32_t entsize;
    uint32_t offset = 0;
  };
  std::vector<Sec> secs = {
      {name_imports, kShtProgbits, EncodeNamedRecords(imp), 4, 0},
      {name_entries, kShtProgbits, EncodeNamedRecords(ent), 4, 0},
      {name_blocks, kShtProgbits, blk.Take(), 4, 4},
      {name_shstrtab, kShtStrtab,
       std::vector<uint8_t>(shstrtab.begin(), shstrtab.end()), 1, 0},
  };
  for (auto& s : secs) {
    w.Align(4);
    s.offset = static_cast<uint32_t>(w.size());
    w.Bytes(s.data);
  }
  w.Align(4);
  w.Patch32(shoff_at, static_cast<uint32_t>(w.size()));
  for (int i = 0; i < 10; ++i) w.U32(0);  // SHN_UNDEF
  for (const auto& s : secs) {
    w.U32(s.name);
    w.U32(s.type);
    w.U32(0);
    w.U32(0);
    w.U32(s.offset);
    w.U32(static_cast<uint32_t>(s.data.size()));
    w.U32(0);
    w.U32(0);
    w.U32(s.align);
    w.U32(s.entsize);
  }
  return w.Take();
}

TaElfFile ParseTaElf(std::span<const uint8_t> bytes) {
  if (bytes.size() < kEhdrSize) Malformed("truncated ELF header");
  if (!std::equal(std::begin(kElfMagic), std::end(kElfMagic), bytes.begin())) {
    Malformed("bad ELF magic");
  }
  if (bytes[4] != 1 || bytes[5] != 1 || bytes[6] != 1) {
    Malformed("not an ELF32 little-endian image");
  }
  ByteReader r(bytes, 16);
  uint16_t type = Need(r.U16(), "header");
  uint16_t machine = Need(r.U16(), "header");
  if (machine != kTaElfMachine) {
    Malformed(fmt::format("machine 0x{:04x} is not a TA image", machine));
  }
  if (type != kEtExec) Malformed("not an executable image");
  Need(r.U32(), "header");  // e_version
  Need(r.U32(), "header");  // e_entry
  uint32_t phoff = Need(r.U32(), "header");
  uint32_t shoff = Need(r.U32(), "header");
  uint32_t flags = Need(r.U32(), "header");
  Need(r.U16(), "header");  // e_ehsize
  uint16_t phentsize = Need(r.U16(), "header");
  uint16_t phnum = Need(r.U16(), "header");
  uint16_t shentsize = Need(r.U16(), "header");
  uint16_t shnum = Need(r.U16(), "header");
  uint16_t shstrndx = Need(r.U16(), "header");
  if (phentsize != kPhdrSize || shentsize != kShdrSize) {
    Malformed("unexpected header entry sizes");
  }
  if ((flags & ~kFlagStatic) != 0) Malformed("unknown e_flags");
  auto in_bounds = [&](uint64_t off, uint64_t len) {
    return off <= bytes.size() && len <= bytes.size() - off;
  };
  if (!in_bounds(phoff, static_cast<uint64_t>(phnum) * kPhdrSize)) {
    Malformed("program headers out of bounds");
  }
  if (!in_bounds(shoff, static_cast<uint64_t>(shnum) * kShdrSize)) {
    Malformed("section headers out of bounds");
  }

  TaElfFile f;
  f.is_static = (flags & kFlagStatic) != 0;
  for (uint16_t i = 0; i < phnum; ++i) {
    ByteReader ph(bytes, phoff + static_cast<size_t>(i) * kPhdrSize);
    uint32_t p_type = *ph.U32();
    uint32_t p_offset = *ph.U32();
    uint32_t p_vaddr = *ph.U32();
    ph.U32();  // p_paddr
    uint32_t p_filesz = *ph.U32();
    uint32_t p_memsz = *ph.U32();
    uint32_t p_flags = *ph.U32();
    if (p_type != kPtLoad) continue;
    if (!in_bounds(p_offset, p_filesz)) Malformed("segment data out of bounds");
    if (p_memsz < p_filesz) Malformed("segment memsz smaller than filesz");
    TaSegment seg;
    seg.vaddr = p_vaddr;
    seg.flags = static_cast<uint8_t>(p_flags & 0xFF);
    if (p_flags > kPermRWX) Malformed("bad segment flags");
    seg.bytes.assign(bytes.begin() + p_offset,
                     bytes.begin() + p_offset + p_filesz);
    seg.bytes.resize(p_memsz, 0);
    f.segments.push_back(std::move(seg));
  }

  struct Shdr {
    uint32_t name, type, offset, size;
  };
  std::vector<Shdr> shdrs;
  for (uint16_t i = 0; i < shnum; ++i) {
    ByteReader sh(bytes, shoff + static_cast<size_t>(i) * kShdrSize);
    Shdr s{};
    s.name = *sh.U32();
    s.type = *sh.U32();
    sh.U32();
    sh.U32();
    s.offset = *sh.U32();
    s.size = *sh.U32();
    if (s.type != 0 && !in_bounds(s.offset, s.size)) {
      Malformed("section data out of bounds");
    }
    shdrs.push_back(s);
  }
  if (shstrndx >= shdrs.size() || shdrs[shstrndx].type != kShtStrtab) {
    Malformed("missing section name table");
  }
  const Shdr& strtab = shdrs[shstrndx];
  auto section_name = [&](uint32_t off) -> std::string {
    if (off >= strtab.size) Malformed("section name out of bounds");
    std::string out;
    for (uint32_t i = strtab.offset + off; i < strtab.offset + strtab.size; ++i) {
      if (bytes[i] == 0) return out;
      out.push_back(static_cast<char>(bytes[i]));
    }
    Malformed("unterminated section name");
  };
  const Shdr* imports = nullptr;
  const Shdr* entries = nullptr;
  const Shdr* blocks = nullptr;
  for (const auto& s : shdrs) {
    if (s.type == 0) continue;
    std::string name = section_name(s.name);
    const Shdr** slot = name == kSecImports   ? &imports
                        : name == kSecEntries ? &entries
                        : name == kSecBlocks  ? &blocks
                                              : nullptr;
    if (slot == nullptr) continue;
    if (*slot != nullptr) Malformed(fmt::format("duplicate section {}", name));
    *slot = &s;
  }
  if (imports == nullptr || entries == nullptr) {
    Malformed("missing .taimp or .taent section");
  }
  auto section_bytes = [&](const Shdr* s) {
    return bytes.subspan(s->offset, s->size);
  };
  for (auto& [slot, name] : DecodeNamedRecords(section_bytes(imports), ".taimp")) {
    f.imports.push_back(TaImport{slot, std::move(name)});
  }
  for (auto& [vaddr, name] : DecodeNamedRecords(section_bytes(entries), ".taent")) {
    if (!f.entrypoints.emplace(name, vaddr).second) {
      Malformed(fmt::format("duplicate entrypoint {}", name));
    }
  }
  if (blocks != nullptr) {
    if (blocks->size % 4 != 0) Malformed("block map size not a multiple of 4");
    ByteReader br(section_bytes(blocks));
    while (br.remaining() > 0) f.blocks.push_back(*br.U32());
  }
  ValidateTaElf(f);
  return f;
}

StaticAnnotationConfig ParseStaticAnnotationConfig(std::string_view text) {
  StaticAnnotationConfig config;
  std::set<uint32_t> seen;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    line = line.substr(first);
    auto space = line.find_first_of(" \t");
    if (space == std::string_view::npos) {
      throw Error(ErrorCode::kMalformedConfig, "expected <vaddr> <api-name>",
                  line_no);
    }
    std::string_view addr_text = line.substr(0, space);
    std::string_view rest = line.substr(space);
    auto name_begin = rest.find_first_not_of(" \t");
    auto name_end = rest.find_last_not_of(" \t\r");
    if (name_begin == std::string_view::npos) {
      throw Error(ErrorCode::kMalformedConfig, "missing api name", line_no);
    }
    std::string_view name = rest.substr(name_begin, name_end - name_begin + 1);
    if (name.find_first_of(" \t") != std::string_view::npos) {
      throw Error(ErrorCode::kMalformedConfig, "one api name per line", line_no);
    }
    if (addr_text.starts_with("0x") || addr_text.starts_with("0X")) {
      addr_text.remove_prefix(2);
    }
    uint32_t vaddr = 0;
    auto [ptr, ec] = std::from_chars(addr_text.data(),
                                     addr_text.data() + addr_text.size(), vaddr, 16);
    if (ec != std::errc() || ptr != addr_text.data() + addr_text.size() ||
        addr_text.empty()) {
      throw Error(ErrorCode::kMalformedConfig,
                  fmt::format("bad address '{}'", addr_text), line_no);
    }
    if (!seen.insert(vaddr).second) {
      throw Error(ErrorCode::kMalformedConfig,
                  fmt::format("duplicate address 0x{:x}", vaddr), line_no);
    }
    config.entries.push_back(StaticAnnotation{vaddr, std::string(name)});
  }
  return config;
}

uint32_t TaImage::SlotOf(std::string_view import_name) const {
  for (const auto& imp : file.imports) {
    if (imp.name == import_name) return imp.slot_vaddr;
  }
  throw Error(ErrorCode::kItemNotFound,
              fmt::format("no import named {}", import_name));
}

TaImage Load(const TaElfFile& file, const StaticAnnotationConfig* config,
             GuestState& guest) {
  ValidateTaElf(file);
  if (file.is_static && config == nullptr) {
    throw Error(ErrorCode::kUnresolvedStaticTa,
                "statically linked TA needs an annotation config");
  }
  for (const auto& s : file.segments) {
    uint64_t end = SegmentEnd(s);
    if (s.vaddr < layout::kHookRegionEnd && end > layout::kHookRegionBase) {
      throw Error(ErrorCode::kOverlapWithHookRegion,
                  fmt::format("segment 0x{:08x} intersects the hook region",
                              s.vaddr));
    }
    for (const auto& reserved : layout::kReservedRanges) {
      if (s.vaddr < reserved.end && end > reserved.begin) {
        throw Error(ErrorCode::kAddressInUse,
                    fmt::format("segment 0x{:08x} intersects reserved range "
                                "0x{:08x}",
                                s.vaddr, reserved.begin));
      }
    }
    for (uint64_t a = s.vaddr & ~(kPageSize - 1); a < end; a += kPageSize) {
      if (guest.memory.IsMapped(static_cast<uint32_t>(a))) {
        throw Error(ErrorCode::kAddressInUse,
                    fmt::format("guest page 0x{:08x} already mapped", a));
      }
    }
  }
  // Pages shared by two segments get the union of their permissions.
  std::map<uint32_t, uint8_t> page_perms;
  for (const auto& s : file.segments) {
    uint64_t end = SegmentEnd(s);
    for (uint64_t a = s.vaddr & ~(kPageSize - 1); a < end; a += kPageSize) {
      page_perms[PageOf(static_cast<uint32_t>(a))] |= s.flags;
    }
  }
  for (const auto& [page, perms] : page_perms) {
    guest.memory.Map(page << kPageShift, kPageSize, perms);
  }
  for (const auto& s : file.segments) guest.memory.Poke(s.vaddr, s.bytes);

  TaImage image;
  image.file = file;
  image.entrypoints = file.entrypoints;
  for (size_t i = 0; i < file.imports.size(); ++i) {
    const auto& imp = file.imports[i];
    image.import_bindings.push_back(imp.name);
    image.got_original.push_back(*guest.memory.Peek32(imp.slot_vaddr));
    guest.memory.Poke32(imp.slot_vaddr,
                        layout::SentinelFor(static_cast<uint32_t>(i)));
  }
  if (config != nullptr) {
    for (const auto& e : config->entries) {
      if (layout::InHookRegion(e.vaddr)) {
        throw Error(ErrorCode::kOverlapWithHookRegion,
                    fmt::format("annotation at 0x{:08x}", e.vaddr));
      }
      const TaSegment* seg = SegmentContaining(file, e.vaddr, 1);
      if (seg == nullptr || (seg->flags & kPermX) == 0) {
        throw Error(ErrorCode::kMalformedConfig,
                    fmt::format("annotation 0x{:08x} ({}) is not in an "
                                "executable segment",
                                e.vaddr, e.api_name));
      }
      image.inline_bindings[e.vaddr] = e.api_name;
    }
  }
  guest.SetLeaders(file.blocks);
  return image;
}

void RestoreGot(const TaImage& image, GuestState& guest) {
  for (size_t i = 0; i < image.file.imports.size(); ++i) {
    guest.memory.Poke32(image.file.imports[i].slot_vaddr, image.got_original[i]);
  }
}

}  // namespace taemu
