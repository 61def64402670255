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
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace q8s::deps {

// The code a user wants executed remotely. `text` is opaque payload apart
// from its import statements.
struct CellSource {
  std::string text;
  std::string cell_id;
};

// Sorted, deduplicated installable package names required by a cell.
struct DependencyManifest {
  std::vector<std::string> packages;

  bool empty() const { return packages.empty(); }
  bool operator==(const DependencyManifest &) const = default;
};

// Raised for malformed module=package override files.
class MappingFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Alphanumerics plus `-`, `_`, `.`; non-empty.
bool is_valid_package_name(std::string_view name);

// ASCII identifier: [A-Za-z_][A-Za-z0-9_]*.
bool is_identifier(std::string_view name);

// Membership in the pinned CPython 3.10 standard-library module list.
bool is_stdlib_module(std::string_view root_module);
const std::set<std::string, std::less<>> &stdlib_modules();

// Root module names of every absolute import statement in `source`, in
// order of appearance (duplicates kept). Relative imports, IPython magics
// and shell escapes, comments and string literals are ignored; statements
// that do not parse are skipped.
std::vector<std::string> scan_import_roots(std::string_view source);

// Import-name to package-name table with identity fallback.
class PackageMap {
 public:
  PackageMap() = default;

  // The curated table shipped with the library.
  static PackageMap builtin();

  // Parses `module=package` lines; `#` starts a comment line. `origin` is
  // used in error messages.
  static PackageMap parse(std::string_view text, std::string_view origin = "<text>");

  // Entries from `other` override existing ones.
  void merge(const PackageMap &other);
  void merge_file(const std::filesystem::path &path);
  void set(std::string module, std::string package);

  std::string map(std::string_view module) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

class DependencyAnalyzer {
 public:
  // `local_modules` are import roots resolved inside the job container
  // rather than installed; `main` is always included because the cell
  // itself is mounted as main.py.
  explicit DependencyAnalyzer(PackageMap packages = PackageMap::builtin(),
                              std::set<std::string, std::less<>> local_modules = {});

  DependencyManifest analyze(const CellSource &cell) const;
  std::string map_module_to_package(std::string_view module) const;

  const std::set<std::string, std::less<>> &local_modules() const { return local_modules_; }

 private:
  PackageMap packages_;
  std::set<std::string, std::less<>> local_modules_;
};

}  // namespace q8s::deps
