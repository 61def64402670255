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

#include "q8s/cluster/kubeconfig.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>

#include "q8s/common/crypto.hpp"
#include "q8s/common/fs.hpp"

namespace q8s::cluster {

namespace {

[[noreturn]] void malformed(const std::string &msg) {
  throw ConfigError(ConfigErrorKind::Malformed, "malformed kubeconfig: " + msg);
}

// Finds `name` in a list of {name: ..., <field>: {...}} entries.
YAML::Node find_named(const YAML::Node &root, const char *list, const char *field,
                      const std::string &name) {
  const YAML::Node entries = root[list];
  if (entries && !entries.IsSequence()) {
    malformed(std::string(list) + " must be a list");
  }
  if (entries) {
    for (const auto &entry : entries) {
      if (entry["name"] && entry["name"].as<std::string>() == name) {
        const YAML::Node body = entry[field];
        if (!body || !body.IsMap()) {
          malformed(std::string(list) + " entry '" + name + "' has no " + field + " map");
        }
        return body;
      }
    }
  }
  malformed(std::string(field) + " '" + name + "' is not defined in " + list);
}

std::string scalar(const YAML::Node &node, const char *key) {
  const YAML::Node v = node[key];
  if (!v) return {};
  if (!v.IsScalar()) malformed(std::string(key) + " must be a string");
  return v.as<std::string>();
}

std::string decode_field(const YAML::Node &node, const char *key) {
  try {
    return common::base64_decode(scalar(node, key));
  } catch (const std::invalid_argument &) {
    malformed(std::string(key) + " is not valid base64");
  }
}

std::string read_referenced_file(const std::filesystem::path &base_dir, const std::string &ref,
                                 const char *what) {
  std::filesystem::path p(ref);
  if (p.is_relative() && !base_dir.empty()) {
    p = base_dir / p;
  }
  auto text = common::read_file(p);
  if (!text) {
    malformed(std::string(what) + " file '" + p.string() + "' cannot be read");
  }
  return *text;
}

// Inline *-data wins over the path form, as in kubectl.
std::optional<std::string> data_or_file(const YAML::Node &node, const char *data_key,
                                        const char *file_key,
                                        const std::filesystem::path &base_dir) {
  if (node[data_key]) {
    return decode_field(node, data_key);
  }
  if (node[file_key]) {
    return read_referenced_file(base_dir, scalar(node, file_key), file_key);
  }
  return std::nullopt;
}

}  // namespace

ClusterConfig parse_kubeconfig(std::string_view yaml_text, const std::filesystem::path &base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception &e) {
    malformed(std::string("YAML parse error: ") + e.what());
  }
  if (!root.IsMap()) {
    malformed("top level must be a mapping");
  }

  ClusterConfig cfg;
  try {
    cfg.context_name = scalar(root, "current-context");
    if (cfg.context_name.empty()) {
      malformed("current-context is not set");
    }
    const YAML::Node context = find_named(root, "contexts", "context", cfg.context_name);
    const std::string cluster_name = scalar(context, "cluster");
    const std::string user_name = scalar(context, "user");
    if (cluster_name.empty() || user_name.empty()) {
      malformed("context '" + cfg.context_name + "' must name a cluster and a user");
    }
    if (const auto ns = scalar(context, "namespace"); !ns.empty()) {
      cfg.namespace_name = ns;
    }

    const YAML::Node cluster = find_named(root, "clusters", "cluster", cluster_name);
    cfg.server_url = scalar(cluster, "server");
    if (cfg.server_url.empty()) {
      malformed("cluster '" + cluster_name + "' has no server");
    }
    cfg.ca_bundle =
        data_or_file(cluster, "certificate-authority-data", "certificate-authority", base_dir);
    if (cluster["insecure-skip-tls-verify"]) {
      cfg.insecure_skip_tls_verify = cluster["insecure-skip-tls-verify"].as<bool>();
    }

    const YAML::Node user = find_named(root, "users", "user", user_name);
    if (user["exec"] || user["auth-provider"]) {
      malformed("user '" + user_name + "' uses an exec/auth-provider plugin, which is not supported");
    }
    std::string token = scalar(user, "token");
    if (token.empty() && user["tokenFile"]) {
      token = read_referenced_file(base_dir, scalar(user, "tokenFile"), "tokenFile");
      while (!token.empty() && (token.back() == '\n' || token.back() == '\r')) token.pop_back();
    }
    auto cert = data_or_file(user, "client-certificate-data", "client-certificate", base_dir);
    auto key = data_or_file(user, "client-key-data", "client-key", base_dir);
    const bool has_token = !token.empty();
    const bool has_cert = cert.has_value() || key.has_value();
    if (has_token == has_cert) {
      malformed("user '" + user_name +
                "' must define exactly one of token or client certificate+key");
    }
    if (has_token) {
      cfg.credential = BearerToken{std::move(token)};
    } else {
      if (!cert || !key) {
        malformed("user '" + user_name + "' needs both client certificate and client key");
      }
      cfg.credential = ClientCertificate{std::move(*cert), std::move(*key)};
    }
  } catch (const YAML::Exception &e) {
    malformed(std::string("unexpected structure: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

ClusterConfig load_kubeconfig(const std::filesystem::path &path) {
  auto text = common::read_file(path);
  if (!text) {
    throw ConfigError(ConfigErrorKind::NotFound, "kubeconfig not found: " + path.string());
  }
  try {
    return parse_kubeconfig(*text, path.parent_path());
  } catch (const ConfigError &e) {
    throw ConfigError(e.kind(), std::string(e.what()) + " (" + path.string() + ")");
  }
}

std::optional<std::filesystem::path> kubeconfig_path_from_env() {
  const char *value = std::getenv(std::string(kKubeconfigEnv).c_str());
  if (value == nullptr || *value == '\0') {
    return std::nullopt;
  }
  return std::filesystem::path(value);
}

}  // namespace q8s::cluster
