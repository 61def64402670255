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

#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "q8s/image/image_spec.hpp"

namespace q8s::image {

// File name -> contents. Always holds a Dockerfile; requirements.txt only
// when the manifest is non-empty.
using BuildContext = std::map<std::string, std::string>;

BuildContext make_build_context(const ImageSpec &spec);

// Produces and publishes container images. Implementations throw
// ImageError(BuildFailed / PushFailed) carrying the tool output.
class BuildDriver {
 public:
  virtual ~BuildDriver() = default;
  virtual void build(const BuildContext &context, const std::string &image_ref) = 0;
  virtual void push(const std::string &image_ref) = 0;
};

// In-memory driver for tests and offline runs; records every call.
class RecordingDriver final : public BuildDriver {
 public:
  struct BuildRecord {
    std::string image_ref;
    BuildContext context;
  };

  void build(const BuildContext &context, const std::string &image_ref) override;
  void push(const std::string &image_ref) override;

  std::vector<BuildRecord> builds() const;
  std::vector<std::string> pushes() const;

  // The next build/push call fails with `log` as its captured output.
  void fail_next_build(std::string log = "scripted build failure");
  void fail_next_push(std::string log = "scripted push failure");
  // Each build blocks this long; used to exercise coalescing and aborts.
  void set_build_delay(std::chrono::milliseconds delay);

 private:
  mutable std::mutex mu_;
  std::vector<BuildRecord> builds_;
  std::vector<std::string> pushes_;
  std::optional<std::string> build_failure_;
  std::optional<std::string> push_failure_;
  std::chrono::milliseconds build_delay_{0};
};

// Shells out to a docker-compatible CLI (`docker`, `podman`, ...).
class SubprocessDriver final : public BuildDriver {
 public:
  explicit SubprocessDriver(std::string tool = "docker");

  void build(const BuildContext &context, const std::string &image_ref) override;
  void push(const std::string &image_ref) override;

 private:
  std::string tool_;
};

// Runs `command` through /bin/sh with stderr folded into stdout.
struct CommandResult {
  int exit_code = -1;
  std::string output;
};
CommandResult run_command(const std::string &command);
std::string shell_quote(std::string_view arg);

}  // namespace q8s::image
