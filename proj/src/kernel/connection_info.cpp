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

#include "q8s/kernel/connection_info.hpp"

#include <set>

#include "q8s/common/crypto.hpp"
#include "q8s/common/fs.hpp"

namespace q8s::kernel {

void validate(const ConnectionInfo &info) {
  if (info.transport != "tcp") {
    throw ConnectionError("unsupported transport '" + info.transport + "'");
  }
  if (info.ip.empty()) throw ConnectionError("ip is empty");
  const std::set<std::uint16_t> ports = {info.shell_port, info.iopub_port, info.stdin_port,
                                         info.control_port, info.hb_port};
  if (ports.size() != 5 || ports.count(0) != 0) {
    throw ConnectionError("the five channel ports must be distinct and non-zero");
  }
  if (info.key.empty()) throw ConnectionError("signing key is empty");
  if (info.signature_scheme != "hmac-sha256") {
    throw ConnectionError("unsupported signature scheme '" + info.signature_scheme + "'");
  }
}

ConnectionInfo parse_connection_info(const nlohmann::json &j) {
  ConnectionInfo info;
  try {
    info.transport = j.value("transport", "tcp");
    info.ip = j.at("ip").get<std::string>();
    auto port = [&](const char *name) {
      const int v = j.at(name).get<int>();
      if (v < 0 || v > 65535) throw ConnectionError(std::string(name) + " out of range");
      return static_cast<std::uint16_t>(v);
    };
    info.shell_port = port("shell_port");
    info.iopub_port = port("iopub_port");
    info.stdin_port = port("stdin_port");
    info.control_port = port("control_port");
    info.hb_port = port("hb_port");
    info.key = j.at("key").get<std::string>();
    info.signature_scheme = j.at("signature_scheme").get<std::string>();
    info.kernel_name = j.value("kernel_name", "");
  } catch (const nlohmann::json::exception &e) {
    throw ConnectionError(std::string("malformed connection info: ") + e.what());
  }
  validate(info);
  return info;
}

ConnectionInfo load_connection_file(const std::filesystem::path &path) {
  const auto text = common::read_file(path);
  if (!text) throw ConnectionError("cannot read connection file " + path.string());
  try {
    return parse_connection_info(nlohmann::json::parse(*text));
  } catch (const nlohmann::json::exception &e) {
    throw ConnectionError("connection file " + path.string() + " is not JSON: " + e.what());
  }
}

nlohmann::json to_json(const ConnectionInfo &info) {
  return {{"transport", info.transport},         {"ip", info.ip},
          {"shell_port", info.shell_port},       {"iopub_port", info.iopub_port},
          {"stdin_port", info.stdin_port},       {"control_port", info.control_port},
          {"hb_port", info.hb_port},             {"key", info.key},
          {"signature_scheme", info.signature_scheme}, {"kernel_name", info.kernel_name}};
}

void write_connection_file(const std::filesystem::path &path, const ConnectionInfo &info) {
  common::write_file_atomic(path, to_json(info).dump(2) + "\n");
  std::filesystem::permissions(path, std::filesystem::perms::owner_read |
                                         std::filesystem::perms::owner_write);
}

ConnectionInfo generate_connection_info() {
  ConnectionInfo info;
  info.key = common::random_hex(16);
  return info;
}

}  // namespace q8s::kernel
