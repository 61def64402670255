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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlohmann/json.hpp"
#include "q8s/image/build_driver.hpp"
#include "q8s/orchestrator/orchestrator.hpp"

namespace q8s::cli {

// Process exit codes besides the payload's own.
inline constexpr int kExitUsage = 64;       // EX_USAGE
inline constexpr int kExitInfra = 70;       // EX_SOFTWARE
inline constexpr int kExitCantCreate = 73;  // EX_CANTCREAT
inline constexpr int kExitTimeout = 124;
inline constexpr int kExitAborted = 130;

enum class OutputFormat { Text, Json };

// Flag > environment > built-in default.
struct CliConfig {
  std::optional<std::filesystem::path> kubeconfig_path;
  std::string base_image{orchestrator::kDefaultBaseImage};
  std::string registry{orchestrator::kDefaultRegistry};
  std::optional<std::string> namespace_name;  // falls back to the kubeconfig context
  int gpu_count = 1;
  std::chrono::milliseconds poll_interval{2'000};
  std::chrono::milliseconds timeout{3'600'000};
  OutputFormat output = OutputFormat::Text;
  std::optional<std::uint64_t> seed;
  std::string build_tool = "docker";  // "none" records builds without running them
  std::optional<std::filesystem::path> cache_file;
};

// Process-level hooks, mostly for tests and embedding.
struct Environment {
  // Replaces the driver chosen by --build-tool.
  image::BuildDriver *driver = nullptr;
  // Signal counters polled while a run, kernel or fake cluster is active.
  // SIGINT aborts a run or the kernel's cell in flight; SIGTERM also exits.
  const std::atomic<int> *interrupts = nullptr;
  const std::atomic<bool> *terminate = nullptr;
  // Binary recorded in the kernel spec; /proc/self/exe when empty.
  std::filesystem::path self_path;
};

// "250ms", "2s", "5m", "1h"; a bare number means seconds. Throws
// std::invalid_argument for anything else or for non-positive values.
std::chrono::milliseconds parse_duration(std::string_view text);

// Payload phase to process exit code.
int exit_code_for(const orchestrator::ExecutionResult &result);

nlohmann::ordered_json result_to_json(const orchestrator::ExecutionResult &result);
nlohmann::ordered_json plan_to_json(const orchestrator::ExecutionPlan &plan, std::string_view ns);

// Default location of the user kernel-spec directory for `name`:
// $JUPYTER_DATA_DIR, else $XDG_DATA_HOME/jupyter, else ~/.local/share/jupyter.
std::filesystem::path default_kernelspec_dir(std::string_view name);

// Entry point; `args` excludes the program name.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err,
            const Environment &env = {});

}  // namespace q8s::cli
