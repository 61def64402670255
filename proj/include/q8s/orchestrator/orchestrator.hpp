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
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "q8s/cluster/cluster_client.hpp"
#include "q8s/cluster/cluster_config.hpp"
#include "q8s/deps/dependency_analyzer.hpp"
#include "q8s/image/image_builder.hpp"
#include "q8s/image/image_spec.hpp"
#include "q8s/orchestrator/manifests.hpp"

namespace q8s::orchestrator {

inline constexpr std::string_view kDefaultRegistry = "registry.com/user";
inline constexpr std::string_view kDefaultBaseImage = "nvcr.io/nvidia/cuquantum-appliance:23.10";

enum class ExecutionState {
  Preparing,
  Building,
  Pushing,
  Submitting,
  Pending,
  Running,
  Collecting,
  CleaningUp,
  Done,
};

enum class TerminalPhase { Succeeded, Failed, TimedOut, Aborted, InfraError };

std::string_view to_string(ExecutionState state);
std::string_view to_string(TerminalPhase phase);

struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5'000};

  std::chrono::milliseconds backoff(int retry) const;  // retry >= 1
};

struct ExecutionOptions {
  std::string base_image{kDefaultBaseImage};
  std::string registry{kDefaultRegistry};
  int gpu_count = 1;
  std::chrono::milliseconds poll_interval{2'000};
  std::chrono::milliseconds timeout{3'600'000};  // Pending + Running combined
  RetryPolicy retry;
  cluster::Timeouts timeouts;
};

struct TimelineEntry {
  ExecutionState state;
  std::chrono::system_clock::time_point at;
};

struct ExecutionResult {
  TerminalPhase phase = TerminalPhase::InfraError;
  std::optional<int> exit_code;
  std::string stdout_text;
  std::string stderr_text;
  std::vector<TimelineEntry> timeline;
  std::string job_name;
  std::string configmap_name;
  std::string image_ref;
  // Set for InfraError: the state that failed.
  std::optional<ExecutionState> failed_state;
  std::string diagnostic;
  int status_polls = 0;
};

// What a run would submit, computed without touching the cluster.
struct ExecutionPlan {
  deps::DependencyManifest dependencies;
  image::ImageSpec image;
  JobManifest job;
  ConfigMapManifest configmap;
};

class Orchestrator;

// One in-flight execution. Shared between the orchestrator's worker thread
// and any number of observers.
class RunHandle {
 public:
  ExecutionState state() const;
  bool done() const;

  // Idempotent; a no-op once the run is terminal.
  void abort();

  const ExecutionResult &wait() const;
  // Blocks until the run has entered `state` (or a later one).
  bool wait_for_state(ExecutionState state, std::chrono::milliseconds limit) const;

 private:
  friend class Orchestrator;
  friend class Run;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  ExecutionState state_ = ExecutionState::Preparing;
  bool aborted_ = false;
  bool done_ = false;
  bool build_finished_ = false;
  ExecutionResult result_;
};

class Orchestrator {
 public:
  // Without a seed, run suffixes come from std::random_device.
  Orchestrator(image::ImageBuilder &builder, deps::DependencyAnalyzer analyzer = deps::DependencyAnalyzer(),
               std::optional<std::uint64_t> seed = std::nullopt);
  ~Orchestrator();
  Orchestrator(const Orchestrator &) = delete;
  Orchestrator &operator=(const Orchestrator &) = delete;

  // Validates `cfg` and `opts` synchronously (throws cluster::ConfigError,
  // image::ImageError or std::invalid_argument), then runs on a worker
  // thread.
  std::shared_ptr<RunHandle> start(const deps::CellSource &cell, const cluster::ClusterConfig &cfg,
                                   const ExecutionOptions &opts);

  ExecutionResult execute_cell(const deps::CellSource &cell, const cluster::ClusterConfig &cfg,
                               const ExecutionOptions &opts);

  static void abort(RunHandle &run) { run.abort(); }

  ExecutionPlan plan(const deps::CellSource &cell, const ExecutionOptions &opts,
                     std::string_view suffix) const;
  std::string next_suffix();

 private:
  friend class Run;

  image::ImageBuilder &builder_;
  deps::DependencyAnalyzer analyzer_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;

  std::mutex threads_mu_;
  std::vector<std::pair<std::shared_ptr<RunHandle>, std::thread>> runs_;
  std::vector<std::pair<std::shared_ptr<RunHandle>, std::thread>> builds_;
};

void validate_options(const ExecutionOptions &opts);

}  // namespace q8s::orchestrator
