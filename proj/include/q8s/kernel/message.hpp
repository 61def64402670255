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

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nlohmann/json.hpp"
#include "q8s/kernel/zmtp.hpp"

namespace q8s::kernel {

inline constexpr std::string_view kProtocolVersion = "5.3";
inline constexpr std::string_view kDelimiter = "<IDS|MSG>";

class SignatureInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedMessage : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Message {
  std::vector<std::string> identities;
  nlohmann::json header = nlohmann::json::object();
  nlohmann::json parent_header = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();
  nlohmann::json content = nlohmann::json::object();
  std::vector<std::string> buffers;

  std::string msg_type() const { return header.value("msg_type", ""); }
};

// HMAC-SHA256 over header, parent_header, metadata and content.
class Signer {
 public:
  explicit Signer(std::string key) : key_(std::move(key)) {}
  std::string sign(std::string_view header, std::string_view parent, std::string_view metadata,
                   std::string_view content) const;

 private:
  std::string key_;
};

// ISO 8601 UTC with microseconds, e.g. 2024-01-01T00:00:00.000000Z.
std::string utc_timestamp();
std::string new_msg_id();

nlohmann::json make_header(std::string_view msg_type, std::string_view session,
                           std::string_view username = "q8s");

// Reply/broadcast scaffold: fresh header, parent_header = parent.header.
Message make_child(const Message &parent, std::string_view msg_type, std::string_view session,
                   nlohmann::json content);

zmtp::Multipart encode(const Message &msg, const Signer &signer);
// Verifies the signature before parsing any JSON part.
Message decode(const zmtp::Multipart &frames, const Signer &signer);

}  // namespace q8s::kernel
