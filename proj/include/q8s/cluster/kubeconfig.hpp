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

#include <filesystem>
#include <optional>
#include <string_view>

#include "q8s/cluster/cluster_config.hpp"

namespace q8s::cluster {

// Reads the clusters/users/contexts/current-context subset of a kubeconfig
// and resolves the current context. Relative certificate paths resolve
// against the file's directory.
//
// Throws ConfigError(NotFound) when the file is missing, and
// ConfigError(Malformed) for YAML errors, a missing current-context,
// dangling references, undecodable base64, unsupported auth, or a config
// that breaks the ClusterConfig invariants.
ClusterConfig load_kubeconfig(const std::filesystem::path &path);

ClusterConfig parse_kubeconfig(std::string_view yaml_text,
                               const std::filesystem::path &base_dir = {});

// Path named by $KUBECONFIG, if set and non-empty.
std::optional<std::filesystem::path> kubeconfig_path_from_env();

}  // namespace q8s::cluster
