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

#include "q8s/kernel/message.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "q8s/common/crypto.hpp"

namespace q8s::kernel {

std::string Signer::sign(std::string_view header, std::string_view parent,
                         std::string_view metadata, std::string_view content) const {
  return common::hmac_sha256_hex(key_, {header, parent, metadata, content});
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto micros =
      std::chrono::duration_cast<std::chrono::microseconds>(now.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(micros / 1'000'000);
  std::tm tm{};
  ::gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(micros % 1'000'000));
  return buf;
}

std::string new_msg_id() {
  auto h = common::random_hex(16);
  // UUID4 layout.
  h[12] = '4';
  h[16] = "89ab"[std::stoi(h.substr(16, 1), nullptr, 16) & 3];
  return h.substr(0, 8) + "-" + h.substr(8, 4) + "-" + h.substr(12, 4) + "-" + h.substr(16, 4) +
         "-" + h.substr(20);
}

nlohmann::json make_header(std::string_view msg_type, std::string_view session,
                           std::string_view username) {
  return {{"msg_id", new_msg_id()},
          {"session", session},
          {"username", username},
          {"date", utc_timestamp()},
          {"msg_type", msg_type},
          {"version", kProtocolVersion}};
}

Message make_child(const Message &parent, std::string_view msg_type, std::string_view session,
                   nlohmann::json content) {
  Message m;
  m.identities = parent.identities;
  m.header = make_header(msg_type, session);
  m.parent_header = parent.header;
  m.content = std::move(content);
  return m;
}

zmtp::Multipart encode(const Message &msg, const Signer &signer) {
  const auto header = msg.header.dump();
  const auto parent = msg.parent_header.dump();
  const auto metadata = msg.metadata.dump();
  const auto content = msg.content.dump();
  zmtp::Multipart out = msg.identities;
  out.emplace_back(kDelimiter);
  out.push_back(signer.sign(header, parent, metadata, content));
  out.push_back(header);
  out.push_back(parent);
  out.push_back(metadata);
  out.push_back(content);
  out.insert(out.end(), msg.buffers.begin(), msg.buffers.end());
  return out;
}

Message decode(const zmtp::Multipart &frames, const Signer &signer) {
  std::size_t delim = 0;
  while (delim < frames.size() && frames[delim] != kDelimiter) ++delim;
  if (delim == frames.size()) throw MalformedMessage("missing <IDS|MSG> delimiter");
  if (frames.size() < delim + 6) throw MalformedMessage("too few message parts");
  const auto &sig = frames[delim + 1];
  const auto expected = signer.sign(frames[delim + 2], frames[delim + 3], frames[delim + 4],
                                    frames[delim + 5]);
  if (!common::constant_time_equal(sig, expected)) throw SignatureInvalid("bad message signature");
  Message m;
  m.identities.assign(frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(delim));
  try {
    m.header = nlohmann::json::parse(frames[delim + 2]);
    m.parent_header = nlohmann::json::parse(frames[delim + 3]);
    m.metadata = nlohmann::json::parse(frames[delim + 4]);
    m.content = nlohmann::json::parse(frames[delim + 5]);
  } catch (const nlohmann::json::exception &e) {
    throw MalformedMessage(std::string("invalid JSON part: ") + e.what());
  }
  if (!m.header.is_object() || !m.header.contains("msg_type")) {
    throw MalformedMessage("header lacks msg_type");
  }
  m.buffers.assign(frames.begin() + static_cast<std::ptrdiff_t>(delim) + 6, frames.end());
  return m;
}

}  // namespace q8s::kernel
