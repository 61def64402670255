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

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nlohmann/json.hpp"

namespace q8s::orchestrator {

inline constexpr std::string_view kJobNamePrefix = "quantum-job-";
inline constexpr std::string_view kConfigMapNamePrefix = "task-files-";
inline constexpr std::string_view kPodTemplateName = "quantum-pod";
inline constexpr std::string_view kContainerName = "quantum-task";
inline constexpr std::string_view kVolumeName = "config-volume";
inline constexpr std::string_view kMountPath = "/app";
inline constexpr std::string_view kCodeKey = "main.py";
inline constexpr std::string_view kGpuResource = "nvidia.com/gpu";

enum class RestartPolicy { Never };

// batch/v1 Job running the cell with the ConfigMap mounted at /app.
struct JobManifest {
  std::string name;
  std::string image;
  std::vector<std::string> command{"python", "/app/main.py"};
  int gpu_count = 1;  // 0 omits the resource request entirely
  std::string configmap_name;
  std::string mount_path{kMountPath};
  RestartPolicy restart_policy = RestartPolicy::Never;

  bool operator==(const JobManifest &) const = default;
};

// v1 ConfigMap with exactly one key, "main.py" -> cell source.
struct ConfigMapManifest {
  std::string name;
  std::map<std::string, std::string> data;

  bool operator==(const ConfigMapManifest &) const = default;
};

// Field-ordered JSON bodies as posted to the API server.
nlohmann::ordered_json to_json(const JobManifest &job);
nlohmann::ordered_json to_json(const ConfigMapManifest &cm);

// Lowercase alphanumerics and '-', starting and ending alphanumeric, <= 63.
bool is_dns_label(std::string_view name);

// Job/ConfigMap pair sharing `suffix` (8 lowercase hex chars).
std::pair<JobManifest, ConfigMapManifest> make_manifests(std::string_view cell_text,
                                                         std::string_view image_ref,
                                                         int gpu_count, std::string_view suffix);

}  // namespace q8s::orchestrator
