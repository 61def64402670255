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

#include <cctype>
#include <string>

#include "q8s/common/fs.hpp"
#include "q8s/deps/dependency_analyzer.hpp"

namespace q8s::deps {

namespace detail {
extern const std::string_view kStdlibModulesText;
extern const std::string_view kBuiltinPackageMapText;
}  // namespace detail

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn &&fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    fn(++line_no, line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

}  // namespace

bool is_valid_package_name(std::string_view name) {
  if (name.empty()) {
    return false;
  }
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (!(std::isalnum(c) || c == '-' || c == '_' || c == '.')) {
      return false;
    }
  }
  return true;
}

const std::set<std::string, std::less<>> &stdlib_modules() {
  static const auto *modules = [] {
    auto *set = new std::set<std::string, std::less<>>();
    for_each_line(detail::kStdlibModulesText, [&](std::size_t, std::string_view line) {
      line = strip(line);
      if (!line.empty() && line.front() != '#') {
        set->emplace(line);
      }
    });
    return set;
  }();
  return *modules;
}

bool is_stdlib_module(std::string_view root_module) {
  return stdlib_modules().contains(root_module);
}

PackageMap PackageMap::builtin() {
  static const PackageMap table = parse(detail::kBuiltinPackageMapText, "<builtin>");
  return table;
}

PackageMap PackageMap::parse(std::string_view text, std::string_view origin) {
  PackageMap map;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    line = strip(line);
    if (line.empty() || line.front() == '#') {
      return;
    }
    const auto eq = line.find('=');
    const auto where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) {
      throw MappingFileError(where + ": expected module=package");
    }
    const auto module = strip(line.substr(0, eq));
    const auto package = strip(line.substr(eq + 1));
    if (!is_identifier(module)) {
      throw MappingFileError(where + ": invalid module name '" + std::string(module) + "'");
    }
    if (!is_valid_package_name(package)) {
      throw MappingFileError(where + ": invalid package name '" + std::string(package) + "'");
    }
    map.set(std::string(module), std::string(package));
  });
  return map;
}

void PackageMap::merge(const PackageMap &other) {
  for (const auto &[module, package] : other.entries_) {
    entries_[module] = package;
  }
}

void PackageMap::merge_file(const std::filesystem::path &path) {
  const auto text = common::read_file(path);
  if (!text) {
    throw MappingFileError("cannot read package mapping file " + path.string());
  }
  merge(parse(*text, path.string()));
}

void PackageMap::set(std::string module, std::string package) {
  entries_[std::move(module)] = std::move(package);
}

std::string PackageMap::map(std::string_view module) const {
  if (auto it = entries_.find(module); it != entries_.end()) {
    return it->second;
  }
  return std::string(module);
}

}  // namespace q8s::deps
