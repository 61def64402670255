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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace q8s::cluster {

inline constexpr std::string_view kDefaultNamespace = "default";
inline constexpr std::string_view kKubeconfigEnv = "KUBECONFIG";

struct BearerToken {
  std::string token;
};

struct ClientCertificate {
  std::string certificate_pem;
  std::string key_pem;
};

using Credential = std::variant<BearerToken, ClientCertificate>;

// Everything needed to reach one namespace of one cluster.
struct ClusterConfig {
  std::string server_url;
  std::optional<std::string> ca_bundle;  // PEM
  Credential credential;
  std::string namespace_name{kDefaultNamespace};
  std::string context_name;
  // Honoured for loopback servers only (the in-process fake).
  bool insecure_skip_tls_verify = false;
};

enum class ConfigErrorKind { NotFound, Malformed };

class ConfigError : public std::runtime_error {
 public:
  ConfigError(ConfigErrorKind kind, const std::string &message)
      : std::runtime_error(message), kind_(kind) {}
  ConfigErrorKind kind() const { return kind_; }

 private:
  ConfigErrorKind kind_;
};

struct ServerUrl {
  std::string scheme;  // "https" or "http"
  std::string host;    // brackets stripped for IPv6
  std::uint16_t port = 0;
  std::string base_path;  // no trailing slash; may be empty

  bool is_loopback() const;
};

// Throws ConfigError(Malformed).
ServerUrl parse_server_url(std::string_view url);

// Enforces the ClusterConfig invariants; throws ConfigError(Malformed).
void validate(const ClusterConfig &cfg);

bool is_dns_label(std::string_view s);

// One-line summary without credential material.
std::string describe(const ClusterConfig &cfg);

}  // namespace q8s::cluster
