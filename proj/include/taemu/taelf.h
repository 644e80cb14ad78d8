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

#ifndef TAEMU_TAELF_H_
#define TAEMU_TAELF_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taemu/emulator.h"

namespace taemu {

inline constexpr uint16_t kTaElfMachine = 0x5441;

struct TaSegment {
  uint32_t vaddr = 0;
  uint8_t flags = 0;  // kPermR | kPermW | kPermX
  std::vector<uint8_t> bytes;

  friend bool operator==(const TaSegment&, const TaSegment&) = default;
};

struct TaImport {
  uint32_t slot_vaddr = 0;
  std::string name;

  friend bool operator==(const TaImport&, const TaImport&) = default;
};

// In-memory form of a TAELF container: an ELF32 little-endian executable
// with machine tag 0x5441 and three custom sections (.taimp import records,
// .taent entrypoint records, .tablk static block leaders). Statically
// linked TAs set bit 0 of e_flags, carry no imports, and need a
// StaticAnnotationConfig at load time.
struct TaElfFile {
  std::vector<TaSegment> segments;
  std::vector<TaImport> imports;
  std::map<std::string, uint32_t> entrypoints;
  std::vector<uint32_t> blocks;
  bool is_static = false;

  std::optional<uint32_t> entry(std::string_view name) const;

  friend bool operator==(const TaElfFile&, const TaElfFile&) = default;
};

// Throws kMalformedContainer or kMissingEntrypoint.
TaElfFile ParseTaElf(std::span<const uint8_t> bytes);
// Canonical encoding; ParseTaElf(SerializeTaElf(f)) == f for valid files.
std::vector<uint8_t> SerializeTaElf(const TaElfFile& file);
// Structural checks shared by the parser and the serializer.
void ValidateTaElf(const TaElfFile& file);

struct StaticAnnotation {
  uint32_t vaddr = 0;
  std::string api_name;
};

struct StaticAnnotationConfig {
  std::vector<StaticAnnotation> entries;
};

// One `<hex-vaddr> <api-name>` per line, `#` starts a comment.
StaticAnnotationConfig ParseStaticAnnotationConfig(std::string_view text);

struct TaImage {
  TaElfFile file;
  // import index -> api name
  std::vector<std::string> import_bindings;
  // vaddr -> api name, for statically linked TAs
  std::map<uint32_t, std::string> inline_bindings;
  std::map<std::string, uint32_t> entrypoints;
  // import index -> slot value before the loader rewrote it
  std::vector<uint32_t> got_original;

  uint32_t SlotOf(std::string_view import_name) const;
};

// Maps the segments into `guest`, rewrites every import slot to its hook
// sentinel and records static-TA annotations. Installs the static block map
// as the guest's block leaders.
TaImage Load(const TaElfFile& file, const StaticAnnotationConfig* config,
             GuestState& guest);

// Writes the saved pre-rewrite values back into the GOT.
void RestoreGot(const TaImage& image, GuestState& guest);

}  // namespace taemu

#endif  // TAEMU_TAELF_H_
