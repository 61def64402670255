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

#include "q8s/orchestrator/manifests.hpp"

#include <cctype>

namespace q8s::orchestrator {

nlohmann::ordered_json to_json(const JobManifest &job) {
  using nlohmann::ordered_json;
  ordered_json container;
  container["name"] = kContainerName;
  container["image"] = job.image;
  container["command"] = job.command;
  if (job.gpu_count > 0) {
    container["resources"]["requests"][std::string(kGpuResource)] = std::to_string(job.gpu_count);
  }
  container["volumeMounts"] = ordered_json::array(
      {ordered_json{{"name", kVolumeName}, {"mountPath", job.mount_path}}});

  ordered_json pod_spec;
  pod_spec["containers"] = ordered_json::array({container});
  pod_spec["volumes"] = ordered_json::array(
      {ordered_json{{"name", kVolumeName}, {"configMap", {{"name", job.configmap_name}}}}});
  pod_spec["restartPolicy"] = "Never";

  ordered_json out;
  out["apiVersion"] = "batch/v1";
  out["kind"] = "Job";
  out["metadata"]["name"] = job.name;
  out["spec"]["template"]["metadata"]["name"] = kPodTemplateName;
  out["spec"]["template"]["spec"] = std::move(pod_spec);
  return out;
}

nlohmann::ordered_json to_json(const ConfigMapManifest &cm) {
  nlohmann::ordered_json out;
  out["apiVersion"] = "v1";
  out["kind"] = "ConfigMap";
  out["metadata"]["name"] = cm.name;
  out["data"] = nlohmann::ordered_json::object();
  for (const auto &[key, value] : cm.data) {
    out["data"][key] = value;
  }
  return out;
}

bool is_dns_label(std::string_view name) {
  if (name.empty() || name.size() > 63) {
    return false;
  }
  const auto alnum = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
  };
  if (!alnum(name.front()) || !alnum(name.back())) {
    return false;
  }
  for (char c : name) {
    if (!alnum(c) && c != '-') {
      return false;
    }
  }
  return true;
}

std::pair<JobManifest, ConfigMapManifest> make_manifests(std::string_view cell_text,
                                                         std::string_view image_ref,
                                                         int gpu_count, std::string_view suffix) {
  JobManifest job;
  job.name = std::string(kJobNamePrefix) + std::string(suffix);
  job.image = std::string(image_ref);
  job.gpu_count = gpu_count;
  job.configmap_name = std::string(kConfigMapNamePrefix) + std::string(suffix);

  ConfigMapManifest cm;
  cm.name = job.configmap_name;
  cm.data.emplace(std::string(kCodeKey), std::string(cell_text));
  return {std::move(job), std::move(cm)};
}

}  // namespace q8s::orchestrator
