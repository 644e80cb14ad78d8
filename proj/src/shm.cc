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

#include "taemu/shm.h"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <vector>

#include <fmt/format.h>

#include "taemu/error.h"

namespace taemu {

namespace {

class BufferBacking : public ShmBacking {
 public:
  explicit BufferBacking(size_t size) : data_(size, 0) {}
  std::span<uint8_t> bytes() override { return data_; }

 private:
  std::vector<uint8_t> data_;
};

class FileBacking : public ShmBacking {
 public:
  FileBacking(void* base, size_t size) : base_(base), size_(size) {}
  ~FileBacking() override { munmap(base_, size_); }
  std::span<uint8_t> bytes() override {
    return {static_cast<uint8_t*>(base_), size_};
  }

 private:
  void* base_;
  size_t size_;
};

}  // namespace

std::shared_ptr<ShmBacking> MakeBufferBacking(size_t size) {
  return std::make_shared<BufferBacking>(size);
}

std::shared_ptr<ShmBacking> MapFileBacking(const std::string& path) {
  int fd = open(path.c_str(), O_RDWR | O_CLOEXEC);
  if (fd < 0) {
    throw Error(ErrorCode::kIoError,
                fmt::format("open {}: {}", path, std::strerror(errno)));
  }
  struct stat st {};
  if (fstat(fd, &st) != 0 || st.st_size <= 0) {
    close(fd);
    throw Error(ErrorCode::kIoError,
                fmt::format("shared memory file {} is empty", path));
  }
  size_t size = static_cast<size_t>(st.st_size);
  void* base = mmap(nullptr, size, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
  close(fd);
  if (base == MAP_FAILED) {
    throw Error(ErrorCode::kIoError,
                fmt::format("mmap {}: {}", path, std::strerror(errno)));
  }
  return std::make_shared<FileBacking>(base, size);
}

}  // namespace taemu
