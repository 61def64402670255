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

#include "q8s/cluster/cluster_config.hpp"

#include <arpa/inet.h>

#include <charconv>

#include "q8s/orchestrator/manifests.hpp"

namespace q8s::cluster {

namespace {

[[noreturn]] void malformed(const std::string &msg) {
  throw ConfigError(ConfigErrorKind::Malformed, msg);
}

}  // namespace

bool ServerUrl::is_loopback() const {
  if (host == "localhost" || host == "::1") return true;
  in_addr addr{};
  return ::inet_pton(AF_INET, host.c_str(), &addr) == 1 &&
         (ntohl(addr.s_addr) >> 24) == 127;
}

ServerUrl parse_server_url(std::string_view url) {
  ServerUrl out;
  const auto sep = url.find("://");
  if (sep == std::string_view::npos) {
    malformed("server URL '" + std::string(url) + "' has no scheme");
  }
  out.scheme = std::string(url.substr(0, sep));
  if (out.scheme != "https" && out.scheme != "http") {
    malformed("server URL scheme must be https, got '" + out.scheme + "'");
  }
  std::string_view rest = url.substr(sep + 3);
  if (rest.find_first_of("?#@ ") != std::string_view::npos) {
    malformed("server URL must not carry a query, fragment, or userinfo");
  }
  const auto slash = rest.find('/');
  const std::string authority(slash == std::string_view::npos ? rest : rest.substr(0, slash));
  if (slash != std::string_view::npos) {
    std::string_view path = rest.substr(slash);
    while (!path.empty() && path.back() == '/') path.remove_suffix(1);
    out.base_path = std::string(path);
  }
  std::string_view port_text;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string::npos) {
      malformed("server URL has an unterminated IPv6 literal");
    }
    out.host = authority.substr(1, close - 1);
    if (close + 1 < authority.size()) {
      if (authority[close + 1] != ':') malformed("server URL has a malformed port");
      port_text = std::string_view(authority).substr(close + 2);
    }
  } else {
    const auto colon = authority.rfind(':');
    out.host = authority.substr(0, colon);
    if (colon != std::string::npos) {
      port_text = std::string_view(authority).substr(colon + 1);
    }
  }
  if (out.host.empty()) {
    malformed("server URL '" + std::string(url) + "' has no host");
  }
  if (port_text.empty()) {
    out.port = out.scheme == "https" ? 443 : 80;
  } else {
    unsigned value = 0;
    const auto [ptr, ec] =
        std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || value == 0 ||
        value > 65535) {
      malformed("server URL has an invalid port '" + std::string(port_text) + "'");
    }
    out.port = static_cast<std::uint16_t>(value);
  }
  return out;
}

bool is_dns_label(std::string_view s) { return orchestrator::is_dns_label(s); }

void validate(const ClusterConfig &cfg) {
  const auto url = parse_server_url(cfg.server_url);
  if (url.scheme == "http" && !url.is_loopback()) {
    malformed("plain http is only allowed for loopback servers, got " + cfg.server_url);
  }
  if (cfg.insecure_skip_tls_verify && !url.is_loopback()) {
    malformed("insecure-skip-tls-verify is only allowed for loopback servers");
  }
  if (!is_dns_label(cfg.namespace_name)) {
    malformed("namespace '" + cfg.namespace_name + "' is not a DNS label");
  }
  std::visit(
      [](const auto &cred) {
        using T = std::decay_t<decltype(cred)>;
        if constexpr (std::is_same_v<T, BearerToken>) {
          if (cred.token.empty()) malformed("bearer token is empty");
        } else {
          if (cred.certificate_pem.empty() || cred.key_pem.empty()) {
            malformed("client certificate and key must both be present");
          }
        }
      },
      cfg.credential);
}

std::string describe(const ClusterConfig &cfg) {
  const char *auth =
      std::holds_alternative<BearerToken>(cfg.credential) ? "bearer-token" : "client-certificate";
  return "context=" + cfg.context_name + " server=" + cfg.server_url +
         " namespace=" + cfg.namespace_name + " auth=" + auth +
         " ca=" + (cfg.ca_bundle ? "inline" : "system");
}

}  // namespace q8s::cluster
