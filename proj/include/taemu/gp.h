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

#ifndef TAEMU_GP_H_
#define TAEMU_GP_H_

#include <array>
#include <cstdint>
#include <string_view>

// GlobalPlatform constants shared by the virtual TEE, the TA manager and the
// wire protocol. Values follow the GP TEE Internal Core / Client API headers.
namespace taemu::gp {

inline constexpr uint32_t kSuccess = 0x00000000;
inline constexpr uint32_t kErrorGeneric = 0xFFFF0000;
inline constexpr uint32_t kErrorAccessDenied = 0xFFFF0001;
inline constexpr uint32_t kErrorAccessConflict = 0xFFFF0003;
inline constexpr uint32_t kErrorBadFormat = 0xFFFF0005;
inline constexpr uint32_t kErrorBadParameters = 0xFFFF0006;
inline constexpr uint32_t kErrorBadState = 0xFFFF0007;
inline constexpr uint32_t kErrorItemNotFound = 0xFFFF0008;
inline constexpr uint32_t kErrorNotImplemented = 0xFFFF0009;
inline constexpr uint32_t kErrorNotSupported = 0xFFFF000A;
inline constexpr uint32_t kErrorOutOfMemory = 0xFFFF000C;
inline constexpr uint32_t kErrorShortBuffer = 0xFFFF0010;
inline constexpr uint32_t kErrorTargetDead = 0xFFFF3024;
inline constexpr uint32_t kErrorStorageNoSpace = 0xFFFF3041;

enum class Origin : uint8_t {
  kApi = 1,
  kComms = 2,
  kTee = 3,
  kTrustedApp = 4,
};

// Parameter type nibbles.
inline constexpr uint8_t kParamNone = 0;
inline constexpr uint8_t kParamValueInput = 1;
inline constexpr uint8_t kParamValueOutput = 2;
inline constexpr uint8_t kParamValueInout = 3;
inline constexpr uint8_t kParamMemrefInput = 5;
inline constexpr uint8_t kParamMemrefOutput = 6;
inline constexpr uint8_t kParamMemrefInout = 7;

constexpr uint8_t ParamTypeAt(uint16_t param_types, int slot) {
  return static_cast<uint8_t>((param_types >> (4 * slot)) & 0xF);
}

constexpr uint16_t ParamTypes(uint8_t t0, uint8_t t1, uint8_t t2, uint8_t t3) {
  return static_cast<uint16_t>(t0 | (t1 << 4) | (t2 << 8) | (t3 << 12));
}

// TEE_CheckMemoryAccessRights flags.
inline constexpr uint32_t kMemoryAccessRead = 0x1;
inline constexpr uint32_t kMemoryAccessWrite = 0x2;
inline constexpr uint32_t kMemoryAccessAnyOwner = 0x4;

// TEE_CreatePersistentObject flags.
inline constexpr uint32_t kDataFlagOverwrite = 0x400;

inline constexpr std::string_view kCreateEntryPoint = "TA_CreateEntryPoint";
inline constexpr std::string_view kDestroyEntryPoint = "TA_DestroyEntryPoint";
inline constexpr std::string_view kOpenSessionEntryPoint =
    "TA_OpenSessionEntryPoint";
inline constexpr std::string_view kCloseSessionEntryPoint =
    "TA_CloseSessionEntryPoint";
inline constexpr std::string_view kInvokeCommandEntryPoint =
    "TA_InvokeCommandEntryPoint";

inline constexpr std::array<std::string_view, 5> kEntryPointNames = {
    kCreateEntryPoint, kDestroyEntryPoint, kOpenSessionEntryPoint,
    kCloseSessionEntryPoint, kInvokeCommandEntryPoint};

constexpr bool IsEntryPointName(std::string_view name) {
  for (auto n : kEntryPointNames) {
    if (n == name) return true;
  }
  return false;
}

}  // namespace taemu::gp

#endif  // TAEMU_GP_H_
