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
#include <stdexcept>
#include <string>

#include "nlohmann/json.hpp"

namespace q8s::kernel {

class ConnectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Contents of a kernel connection file.
struct ConnectionInfo {
  std::string transport = "tcp";
  std::string ip = "127.0.0.1";
  std::uint16_t shell_port = 0;
  std::uint16_t iopub_port = 0;
  std::uint16_t stdin_port = 0;
  std::uint16_t control_port = 0;
  std::uint16_t hb_port = 0;
  std::string key;
  std::string signature_scheme = "hmac-sha256";
  std::string kernel_name = "q8s";

  bool operator==(const ConnectionInfo &) const = default;
};

// Throws ConnectionError: transport other than tcp, ports not five distinct
// non-zero values, empty key, or a scheme other than hmac-sha256.
void validate(const ConnectionInfo &info);

ConnectionInfo parse_connection_info(const nlohmann::json &j);
ConnectionInfo load_connection_file(const std::filesystem::path &path);
nlohmann::json to_json(const ConnectionInfo &info);
void write_connection_file(const std::filesystem::path &path, const ConnectionInfo &info);

// Loopback info with zero ports (bind picks them) and a fresh random key.
ConnectionInfo generate_connection_info();

}  // namespace q8s::kernel
