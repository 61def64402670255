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

// Static scanner for Python import statements. The source is first folded
// into logical lines with string literals blanked and comments removed, so
// only real statements are inspected.

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "q8s/deps/dependency_analyzer.hpp"

namespace q8s::deps {

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\f' || c == '\r'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_blank(s.back())) s.remove_suffix(1);
  return s;
}

// Splits on `sep` at bracket depth zero.
std::vector<std::string_view> split_top_level(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if ((c == ')' || c == ']' || c == '}') && depth > 0) {
      --depth;
    } else if (c == sep && depth == 0) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  out.push_back(s.substr(start));
  return out;
}

// Logical lines with string contents replaced by a single `S` and comments
// dropped. Bracketed and backslash-continued physical lines are joined.
std::vector<std::string> logical_lines(std::string_view src) {
  std::vector<std::string> lines;
  std::string current;
  int depth = 0;
  std::size_t i = 0;
  const auto flush = [&] {
    lines.push_back(std::move(current));
    current.clear();
    depth = 0;
  };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (c == '\\' && i + 1 < src.size() && src[i + 1] == '\n') {
      current.push_back(' ');
      i += 2;
      continue;
    }
    if (c == '\\' && i + 2 < src.size() && src[i + 1] == '\r' && src[i + 2] == '\n') {
      current.push_back(' ');
      i += 3;
      continue;
    }
    if (c == '\'' || c == '"') {
      const bool triple = i + 2 < src.size() && src[i + 1] == c && src[i + 2] == c;
      i += triple ? 3 : 1;
      bool closed = false;
      while (i < src.size()) {
        const char d = src[i];
        if (d == '\\') {
          i += 2;
          continue;
        }
        if (!triple && d == '\n') {
          break;  // unterminated; the newline ends the logical line below
        }
        if (d == c) {
          if (!triple) {
            ++i;
            closed = true;
            break;
          }
          if (i + 2 < src.size() && src[i + 1] == c && src[i + 2] == c) {
            i += 3;
            closed = true;
            break;
          }
        }
        ++i;
      }
      (void)closed;
      current.push_back('S');
      continue;
    }
    if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if ((c == ')' || c == ']' || c == '}') && depth > 0) {
      --depth;
    } else if (c == '\n') {
      if (depth > 0) {
        current.push_back(' ');
      } else {
        flush();
      }
      ++i;
      continue;
    }
    current.push_back(c);
    ++i;
  }
  if (!current.empty()) {
    flush();
  }
  return lines;
}

bool starts_with_keyword(std::string_view stmt, std::string_view kw) {
  if (stmt.substr(0, kw.size()) != kw) {
    return false;
  }
  if (stmt.size() == kw.size()) {
    return true;
  }
  const unsigned char next = static_cast<unsigned char>(stmt[kw.size()]);
  return !(std::isalnum(next) || next == '_' || next >= 0x80);
}

// "a . b" -> {"a", "b"}; empty result when any segment is not an identifier.
std::vector<std::string_view> dotted_segments(std::string_view dotted) {
  std::vector<std::string_view> segs;
  for (auto part : split_top_level(dotted, '.')) {
    part = trim(part);
    if (!is_identifier(part)) {
      return {};
    }
    segs.push_back(part);
  }
  return segs;
}

// Splits on whitespace runs.
std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_blank(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_blank(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

// Rewrites "a . b" into "a.b" so the module name is a single word.
std::string squeeze_dots(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (is_blank(s[i])) {
      std::size_t j = i;
      while (j < s.size() && is_blank(s[j])) ++j;
      const bool next_dot = j < s.size() && s[j] == '.';
      const bool prev_dot = !out.empty() && out.back() == '.';
      if (next_dot || prev_dot) {
        i = j - 1;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

void scan_import(std::string_view body, std::vector<std::string> &roots) {
  std::vector<std::string> found;
  for (auto item : split_top_level(body, ',')) {
    const std::string squeezed = squeeze_dots(trim(item));
    const auto parts = words(squeezed);
    const bool plain = parts.size() == 1;
    const bool aliased = parts.size() == 3 && parts[1] == "as" && !parts[2].empty();
    if (!plain && !aliased) {
      return;
    }
    const auto segs = dotted_segments(parts[0]);
    if (segs.empty()) {
      return;
    }
    found.emplace_back(segs.front());
  }
  roots.insert(roots.end(), found.begin(), found.end());
}

void scan_from(std::string_view body, std::vector<std::string> &roots) {
  body = trim(body);
  if (body.empty() || body.front() == '.') {
    return;  // relative import refers to cell-local code
  }
  const std::string squeezed = squeeze_dots(body);
  const std::string_view rest = squeezed;
  std::size_t end = 0;
  while (end < rest.size() && !is_blank(rest[end])) ++end;
  const auto module = rest.substr(0, end);
  std::string_view tail = trim(rest.substr(end));
  if (tail.substr(0, 6) != "import") {
    return;
  }
  const std::string_view after = tail.substr(6);
  // `from x import*` and `from x import(a, b)` need no blank after the keyword.
  if (!after.empty() && !is_blank(after.front()) && after.front() != '(' &&
      after.front() != '*') {
    return;
  }
  const std::string_view names = trim(after);
  if (names.empty()) {
    return;
  }
  const auto segs = dotted_segments(module);
  if (segs.empty()) {
    return;
  }
  roots.emplace_back(segs.front());
}

constexpr std::array<std::string_view, 11> kCompoundHeads = {
    "if", "elif", "else", "try", "except", "finally", "with", "for", "while", "def", "class"};

void scan_statement(std::string_view stmt, std::vector<std::string> &roots, int nesting) {
  stmt = trim(stmt);
  if (stmt.empty() || stmt.front() == '%' || stmt.front() == '!') {
    return;
  }
  if (starts_with_keyword(stmt, "import")) {
    scan_import(stmt.substr(6), roots);
    return;
  }
  if (stmt.size() > 4 && stmt.substr(0, 4) == "from" &&
      (is_blank(stmt[4]) || stmt[4] == '.')) {
    scan_from(stmt.substr(4), roots);
    return;
  }
  // One-line compound statements, e.g. `try: import cupy`.
  if (nesting > 8) {
    return;
  }
  for (auto head : kCompoundHeads) {
    if (!starts_with_keyword(stmt, head)) {
      continue;
    }
    int depth = 0;
    for (std::size_t i = head.size(); i < stmt.size(); ++i) {
      const char c = stmt[i];
      if (c == '(' || c == '[' || c == '{') {
        ++depth;
      } else if ((c == ')' || c == ']' || c == '}') && depth > 0) {
        --depth;
      } else if (c == ':' && depth == 0) {
        if (i + 1 < stmt.size() && stmt[i + 1] == '=') {
          ++i;  // walrus
          continue;
        }
        scan_statement(stmt.substr(i + 1), roots, nesting + 1);
        return;
      }
    }
    return;
  }
}

}  // namespace

bool is_identifier(std::string_view name) {
  if (name.empty()) {
    return false;
  }
  const auto first = static_cast<unsigned char>(name.front());
  if (!(std::isalpha(first) || first == '_')) {
    return false;
  }
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (!(std::isalnum(c) || c == '_')) {
      return false;
    }
  }
  return true;
}

std::vector<std::string> scan_import_roots(std::string_view source) {
  std::vector<std::string> roots;
  for (const auto &line : logical_lines(source)) {
    for (auto stmt : split_top_level(line, ';')) {
      scan_statement(stmt, roots, 0);
    }
  }
  return roots;
}

}  // namespace q8s::deps
