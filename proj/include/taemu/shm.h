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

#ifndef TAEMU_SHM_H_
#define TAEMU_SHM_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>

namespace taemu {

// Host-side bytes backing a shared-memory parameter. The normal-world side
// may mutate them at any time; the emulator only touches them at API sync
// points.
class ShmBacking {
 public:
  virtual ~ShmBacking() = default;
  virtual std::span<uint8_t> bytes() = 0;
  size_t size() { return bytes().size(); }
};

// In-process buffer (fuzzing mode).
std::shared_ptr<ShmBacking> MakeBufferBacking(size_t size);

// MAP_SHARED mapping of an existing, non-empty file (interactive mode).
// Throws kIoError.
std::shared_ptr<ShmBacking> MapFileBacking(const std::string& path);

}  // namespace taemu

#endif  // TAEMU_SHM_H_
