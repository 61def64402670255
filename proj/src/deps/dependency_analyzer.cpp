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

#include "q8s/deps/dependency_analyzer.hpp"

namespace q8s::deps {

DependencyAnalyzer::DependencyAnalyzer(PackageMap packages,
                                       std::set<std::string, std::less<>> local_modules)
    : packages_(std::move(packages)), local_modules_(std::move(local_modules)) {
  local_modules_.emplace("main");
}

std::string DependencyAnalyzer::map_module_to_package(std::string_view module) const {
  return packages_.map(module);
}

DependencyManifest DependencyAnalyzer::analyze(const CellSource &cell) const {
  std::set<std::string> packages;
  for (const auto &root : scan_import_roots(cell.text)) {
    if (is_stdlib_module(root) || local_modules_.contains(root)) {
      continue;
    }
    auto package = map_module_to_package(root);
    if (!is_valid_package_name(package) || is_stdlib_module(package)) {
      continue;
    }
    packages.insert(std::move(package));
  }
  return DependencyManifest{{packages.begin(), packages.end()}};
}

}  // namespace q8s::deps
