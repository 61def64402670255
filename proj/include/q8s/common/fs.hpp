// Copyright 2026 The Q8s Kernel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace q8s::common {

// Whole-file read; std::nullopt if the file cannot be opened.
std::optional<std::string> read_file(const std::filesystem::path &path);

// Writes via a sibling temp file + rename. Throws std::system_error.
void write_file_atomic(const std::filesystem::path &path, std::string_view contents);

// Removes its directory tree on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view prefix = "q8s");
  ~TempDir();
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace q8s::common
