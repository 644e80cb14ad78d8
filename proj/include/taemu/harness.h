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

#ifndef TAEMU_HARNESS_H_
#define TAEMU_HARNESS_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taemu/manager.h"

namespace taemu {

// How one parameter slot is filled from a fuzzer input.
struct SlotTemplate {
  enum class Kind : uint8_t {
    kNone,
    kValue,          // constant a, b
    kValueInput,     // a, b read little-endian from input[offset..offset+8)
    kMemrefIn,       // input[offset..], at most max_len bytes
    kMemrefOut,      // size zero bytes
    kMemrefInFixed,  // literal bytes
  };

  Kind kind = Kind::kNone;
  uint32_t a = 0;
  uint32_t b = 0;
  uint32_t offset = 0;
  std::optional<uint32_t> max_len;
  uint32_t size = 0;
  std::vector<uint8_t> bytes;

  friend bool operator==(const SlotTemplate&, const SlotTemplate&) = default;
};

// Invocation run once before the fuzz loop. Only input-independent
// templates are allowed.
struct InitCall {
  uint32_t cmd_id = 0;
  uint16_t param_types = 0;
  std::array<SlotTemplate, 4> slots;

  friend bool operator==(const InitCall&, const InitCall&) = default;
};

struct HarnessSpec {
  // cmd = input[cmd_byte] % cmd_modulo when cmd_from_input, else fixed_cmd.
  bool cmd_from_input = false;
  uint32_t cmd_byte = 0;
  uint32_t cmd_modulo = 1;
  uint32_t fixed_cmd = 0;
  uint16_t param_types = 0;
  std::array<SlotTemplate, 4> slots;
  uint32_t min_input_len = 0;
  std::vector<InitCall> init;

  friend bool operator==(const HarnessSpec&, const HarnessSpec&) = default;
};

// key = value text format, see docs/harness.md. Throws kHarnessError with
// the offending line.
HarnessSpec ParseHarness(std::string_view text);
std::string FormatHarness(const HarnessSpec& spec);

struct BuiltInvocation {
  uint32_t cmd_id = 0;
  GpParamSet params;
};

// nullopt when the input is shorter than min_input_len.
std::optional<BuiltInvocation> BuildParamSet(const HarnessSpec& spec,
                                             std::span<const uint8_t> input);

BuiltInvocation BuildInitCall(const InitCall& call);

}  // namespace taemu

#endif  // TAEMU_HARNESS_H_
