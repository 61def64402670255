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

// Brute-force reference import scanner used only by tests. Works physical
// line by physical line with regular expressions; deliberately shares no
// code with the library scanner.

#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace q8s::testing {

inline std::set<std::string> load_name_list(const std::string &path) {
  std::set<std::string> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') out.insert(line);
  }
  return out;
}

inline std::map<std::string, std::string> load_mapping(const std::string &path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

inline std::vector<std::string> oracle_import_roots(std::string src) {
  src = std::regex_replace(src, std::regex("\r\n"), "\n");
  src = std::regex_replace(src, std::regex("\\\\\n"), " ");
  static const std::regex single_strings(R"("[^"\n]*"|'[^'\n]*')");
  static const std::regex compound(
      R"(^\s*(?:(?:try|else|finally|(?:if|elif|except|with|for|while|def|class)\b[^:]*)\s*:)?\s*)");
  static const std::regex import_re(R"(^import\s+(.+)$)");
  static const std::regex from_re(R"(^from\s+([A-Za-z_][A-Za-z0-9_.]*)\s+import\b)");
  static const std::regex item_re(R"(^\s*([A-Za-z_][A-Za-z0-9_]*)[A-Za-z0-9_.]*(\s+as\s+\w+)?\s*$)");

  std::vector<std::string> roots;
  std::istringstream in(src);
  std::string line;
  std::string open_triple;
  while (std::getline(in, line)) {
    if (!open_triple.empty()) {
      const auto close = line.find(open_triple);
      if (close == std::string::npos) continue;
      line = line.substr(close + 3);
      open_triple.clear();
    }
    for (const char *q : {"\"\"\"", "'''"}) {
      const auto open = line.find(q);
      if (open == std::string::npos) continue;
      const auto close = line.find(q, open + 3);
      if (close == std::string::npos) {
        open_triple = q;
        line = line.substr(0, open);
      } else {
        line = line.substr(0, open) + line.substr(close + 3);
      }
    }
    line = std::regex_replace(line, single_strings, "S");
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    std::istringstream stmts(line);
    std::string stmt;
    while (std::getline(stmts, stmt, ';')) {
      stmt = std::regex_replace(stmt, compound, "", std::regex_constants::format_first_only);
      std::smatch m;
      if (std::regex_search(stmt, m, from_re)) {
        roots.push_back(m[1].str().substr(0, m[1].str().find('.')));
      } else if (std::regex_search(stmt, m, import_re)) {
        std::istringstream items(m[1].str());
        std::string item;
        while (std::getline(items, item, ',')) {
          std::smatch im;
          if (std::regex_match(item, im, item_re)) roots.push_back(im[1]);
        }
      }
    }
  }
  return roots;
}

// Full manifest computed the brute-force way.
inline std::vector<std::string> oracle_manifest(const std::string &src,
                                                const std::set<std::string> &stdlib,
                                                const std::map<std::string, std::string> &mapping) {
  std::set<std::string> pkgs;
  for (const auto &root : oracle_import_roots(src)) {
    if (stdlib.count(root) || root == "main") continue;
    auto it = mapping.find(root);
    pkgs.insert(it == mapping.end() ? root : it->second);
  }
  return {pkgs.begin(), pkgs.end()};
}

}  // namespace q8s::testing
