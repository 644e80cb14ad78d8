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

#ifndef TAEMU_TESTS_TEST_UTIL_H_
#define TAEMU_TESTS_TEST_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "taemu/assembler.h"
#include "taemu/manager.h"

namespace taemu::testing {

inline std::string DataPath(const std::string& rel) {
  return std::string(TAEMU_DATA_DIR) + "/" + rel;
}

inline std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<uint8_t> ReadBytes(const std::string& path) {
  auto s = ReadText(path);
  return {s.begin(), s.end()};
}

inline std::string ReadData(const std::string& rel) { return ReadText(DataPath(rel)); }

// Assembles data/tas/<name>.s.
inline AssemblyResult Fixture(const std::string& name) {
  return AssembleWithSymbols(ReadData("tas/" + name + ".s"));
}

inline std::unique_ptr<TaManager> FixtureManager(const std::string& name,
                                                 ManagerOptions options = {}) {
  return std::make_unique<TaManager>(Fixture(name).file, nullptr, options);
}

// Fresh directory under the system temp dir, removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("taemu-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path_.string() : (path_ / child).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace taemu::testing

#endif  // TAEMU_TESTS_TEST_UTIL_H_
