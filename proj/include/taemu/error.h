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

#ifndef TAEMU_ERROR_H_
#define TAEMU_ERROR_H_

#include <stdexcept>
#include <string>

namespace taemu {

enum class ErrorCode {
  kMalformedContainer,
  kMissingEntrypoint,
  kOverlapWithHookRegion,
  kAddressInUse,
  kUnresolvedStaticTa,
  kMalformedConfig,
  kAssemblyError,
  kItemNotFound,
  kBadHandle,
  kStorageFull,
  kKeyNotSet,
  kShortBuffer,
  kDuplicateRegistration,
  kBadState,
  kParseError,
  kDanglingEdge,
  kHarnessError,
  kProtocolError,
  kIoError,
};

const char* ErrorCodeName(ErrorCode code);

// All recoverable failures in the library are reported through this type.
// Guest-side faults are never exceptions; they surface as ExecOutcome values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, int line = 0);

  ErrorCode code() const { return code_; }
  // Source line for parse/assembly errors, 0 otherwise.
  int line() const { return line_; }

 private:
  ErrorCode code_;
  int line_;
};

}  // namespace taemu

#endif  // TAEMU_ERROR_H_
