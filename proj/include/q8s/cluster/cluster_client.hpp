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
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "nlohmann/json.hpp"
#include "q8s/cluster/cluster_config.hpp"
#include "q8s/orchestrator/manifests.hpp"

namespace q8s::cluster {

enum class ApiErrorKind {
  Unauthorized,  // 401, 403
  NotFound,      // 404
  Conflict,      // 409
  Unavailable,   // network failure, 429, 5xx; retryable
  Rejected,      // any other 4xx, e.g. 422 for an invalid manifest
};

std::string_view to_string(ApiErrorKind kind);

// Carries the server's message text; never credential material.
class ApiError : public std::runtime_error {
 public:
  ApiError(ApiErrorKind kind, int http_status, const std::string &message)
      : std::runtime_error(message), kind_(kind), http_status_(http_status) {}

  ApiErrorKind kind() const { return kind_; }
  int http_status() const { return http_status_; }  // 0 when no response
  bool retryable() const { return kind_ == ApiErrorKind::Unavailable; }

 private:
  ApiErrorKind kind_;
  int http_status_;
};

struct Timeouts {
  std::chrono::milliseconds connect{10'000};
  std::chrono::milliseconds request{30'000};
};

enum class JobPhase { Pending, Active, Succeeded, Failed };

std::string_view to_string(JobPhase phase);

struct JobStatus {
  JobPhase phase = JobPhase::Pending;
  std::optional<int> exit_code;          // present iff Succeeded/Failed
  std::optional<std::string> pod_name;
  std::optional<std::string> waiting_reason;  // e.g. ErrImagePull while Pending

  bool terminal() const { return phase == JobPhase::Succeeded || phase == JobPhase::Failed; }
  bool image_pull_failed() const;
};

// One HTTP request per call, no retries; callers own the retry policy.
// Immutable after construction and safe to share between threads.
class ClusterClient {
 public:
  explicit ClusterClient(ClusterConfig cfg, Timeouts timeouts = {});

  const ClusterConfig &config() const { return cfg_; }

  std::string create_job(const orchestrator::JobManifest &job) const;
  std::string create_configmap(const orchestrator::ConfigMapManifest &cm) const;

  // GETs the Job; lists its Pods as well when the Job is terminal (exit
  // code) or still pending (image pull failures).
  JobStatus get_job_status(std::string_view job_name) const;
  std::string get_pod_logs(std::string_view pod_name) const;
  void delete_job(std::string_view job_name) const;
  void delete_configmap(std::string_view name) const;

  nlohmann::json get_job(std::string_view job_name) const;
  nlohmann::json list_job_pods(std::string_view job_name) const;

  // Endpoint paths, including any base path from the server URL.
  std::string jobs_path() const;
  std::string job_path(std::string_view name) const;
  std::string configmaps_path() const;
  std::string configmap_path(std::string_view name) const;
  std::string pods_for_job_path(std::string_view job_name) const;
  std::string pod_log_path(std::string_view pod) const;

 private:
  struct Response {
    int status = 0;
    std::string body;
  };
  enum class Method { Get, Post, Delete };

  Response send(Method method, const std::string &path, const std::string &body = {}) const;
  std::string post_json(const std::string &path, const nlohmann::ordered_json &body) const;

  ClusterConfig cfg_;
  ServerUrl url_;
  Timeouts timeouts_;
};

// Derives a JobStatus from a batch/v1 Job object and (optionally) the
// PodList selected by its job-name label.
JobStatus derive_job_status(const nlohmann::json &job, const nlohmann::json *pods);

}  // namespace q8s::cluster
