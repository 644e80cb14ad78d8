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

#ifndef TAEMU_ASSEMBLER_H_
#define TAEMU_ASSEMBLER_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "taemu/taelf.h"

namespace taemu {

struct AssemblyResult {
  TaElfFile file;
  std::map<std::string, uint32_t> labels;
};

// Assembles TIR-32 source (dialect in docs/isa.md) into a TAELF container.
// Throws Error(kAssemblyError) carrying the offending line number, or the
// container validation errors when the result would not load.
AssemblyResult AssembleWithSymbols(std::string_view source);
std::vector<uint8_t> Assemble(std::string_view source);

}  // namespace taemu

#endif  // TAEMU_ASSEMBLER_H_
