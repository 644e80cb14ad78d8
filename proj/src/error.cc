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

#include "taemu/error.h"

#include <fmt/format.h>

namespace taemu {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedContainer: return "MalformedContainer";
    case ErrorCode::kMissingEntrypoint: return "MissingEntrypoint";
    case ErrorCode::kOverlapWithHookRegion: return "OverlapWithHookRegion";
    case ErrorCode::kAddressInUse: return "AddressInUse";
    case ErrorCode::kUnresolvedStaticTa: return "UnresolvedStaticTa";
    case ErrorCode::kMalformedConfig: return "MalformedConfig";
    case ErrorCode::kAssemblyError: return "AssemblyError";
    case ErrorCode::kItemNotFound: return "ItemNotFound";
    case ErrorCode::kBadHandle: return "BadHandle";
    case ErrorCode::kStorageFull: return "StorageFull";
    case ErrorCode::kKeyNotSet: return "KeyNotSet";
    case ErrorCode::kShortBuffer: return "ShortBuffer";
    case ErrorCode::kDuplicateRegistration: return "DuplicateRegistration";
    case ErrorCode::kBadState: return "BadState";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDanglingEdge: return "DanglingEdge";
    case ErrorCode::kHarnessError: return "HarnessError";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string Decorate(ErrorCode code, const std::string& message, int line) {
  if (line > 0) {
    return fmt::format("{}: line {}: {}", ErrorCodeName(code), line, message);
  }
  return fmt::format("{}: {}", ErrorCodeName(code), message);
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, int line)
    : std::runtime_error(Decorate(code, message, line)),
      code_(code),
      line_(line) {}

}  // namespace taemu
