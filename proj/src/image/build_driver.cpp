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

#include "q8s/image/build_driver.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <thread>

#include "q8s/common/fs.hpp"

namespace q8s::image {

BuildContext make_build_context(const ImageSpec &spec) {
  BuildContext ctx{{"Dockerfile", spec.dockerfile_text}};
  if (!spec.requirements_text.empty()) {
    ctx.emplace("requirements.txt", spec.requirements_text);
  }
  return ctx;
}

void RecordingDriver::build(const BuildContext &context, const std::string &image_ref) {
  std::chrono::milliseconds delay;
  {
    std::lock_guard lock(mu_);
    delay = build_delay_;
  }
  if (delay.count() > 0) {
    std::this_thread::sleep_for(delay);
  }
  std::lock_guard lock(mu_);
  builds_.push_back({image_ref, context});
  if (build_failure_) {
    auto log = std::move(*build_failure_);
    build_failure_.reset();
    throw ImageError(ImageErrorKind::BuildFailed, "image build failed for " + image_ref, log);
  }
}

void RecordingDriver::push(const std::string &image_ref) {
  std::lock_guard lock(mu_);
  pushes_.push_back(image_ref);
  if (push_failure_) {
    auto log = std::move(*push_failure_);
    push_failure_.reset();
    throw ImageError(ImageErrorKind::PushFailed, "image push failed for " + image_ref, log);
  }
}

std::vector<RecordingDriver::BuildRecord> RecordingDriver::builds() const {
  std::lock_guard lock(mu_);
  return builds_;
}

std::vector<std::string> RecordingDriver::pushes() const {
  std::lock_guard lock(mu_);
  return pushes_;
}

void RecordingDriver::fail_next_build(std::string log) {
  std::lock_guard lock(mu_);
  build_failure_ = std::move(log);
}

void RecordingDriver::fail_next_push(std::string log) {
  std::lock_guard lock(mu_);
  push_failure_ = std::move(log);
}

void RecordingDriver::set_build_delay(std::chrono::milliseconds delay) {
  std::lock_guard lock(mu_);
  build_delay_ = delay;
}

std::string shell_quote(std::string_view arg) {
  std::string out = "'";
  for (char c : arg) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out += "'";
  return out;
}

CommandResult run_command(const std::string &command) {
  CommandResult result;
  const std::string full = command + " 2>&1";
  FILE *pipe = ::popen(full.c_str(), "r");
  if (pipe == nullptr) {
    result.output = "cannot spawn: " + command;
    return result;
  }
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    result.output.append(buf.data(), n);
  }
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

SubprocessDriver::SubprocessDriver(std::string tool) : tool_(std::move(tool)) {}

void SubprocessDriver::build(const BuildContext &context, const std::string &image_ref) {
  common::TempDir dir("q8s-build");
  for (const auto &[name, contents] : context) {
    common::write_file_atomic(dir.path() / name, contents);
  }
  const auto result = run_command(shell_quote(tool_) + " build -t " + shell_quote(image_ref) +
                                  " " + shell_quote(dir.path().string()));
  if (result.exit_code != 0) {
    throw ImageError(ImageErrorKind::BuildFailed,
                     tool_ + " build exited with " + std::to_string(result.exit_code),
                     result.output);
  }
}

void SubprocessDriver::push(const std::string &image_ref) {
  const auto result = run_command(shell_quote(tool_) + " push " + shell_quote(image_ref));
  if (result.exit_code != 0) {
    throw ImageError(ImageErrorKind::PushFailed,
                     tool_ + " push exited with " + std::to_string(result.exit_code),
                     result.output);
  }
}

}  // namespace q8s::image
