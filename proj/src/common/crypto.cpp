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

#include "q8s/common/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include <array>
#include <cctype>
#include <stdexcept>

namespace q8s::common {

namespace {

std::string to_hex(const unsigned char *data, std::size_t len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0x0f]);
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int md_len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &md_len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  return to_hex(md.data(), md_len);
}

std::string hmac_sha256_hex(std::string_view key,
                            std::initializer_list<std::string_view> parts) {
  std::string message;
  for (auto part : parts) {
    message.append(part);
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int md_len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
           reinterpret_cast<const unsigned char *>(message.data()), message.size(),
           md.data(), &md_len) == nullptr) {
    throw std::runtime_error("hmac-sha256 failed");
  }
  return to_hex(md.data(), md_len);
}

bool constant_time_equal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) {
    return false;
  }
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::string base64_decode(std::string_view encoded) {
  std::string compact;
  compact.reserve(encoded.size());
  for (char c : encoded) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      compact.push_back(c);
    }
  }
  if (compact.size() % 4 != 0) {
    throw std::invalid_argument("base64 input length is not a multiple of 4");
  }
  for (std::size_t i = 0; i < compact.size(); ++i) {
    const char c = compact[i];
    const bool alpha = std::isalnum(static_cast<unsigned char>(c)) || c == '+' ||
                       c == '/';
    const bool pad = c == '=' && i + 2 >= compact.size();
    if (!alpha && !pad) {
      throw std::invalid_argument("invalid base64 character");
    }
  }
  if (compact.empty()) {
    return {};
  }
  std::string out(compact.size() / 4 * 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char *>(out.data()),
                                reinterpret_cast<const unsigned char *>(compact.data()),
                                static_cast<int>(compact.size()));
  if (n < 0) {
    throw std::invalid_argument("invalid base64 data");
  }
  // EVP_DecodeBlock does not strip the bytes produced by padding.
  std::size_t padding = 0;
  if (compact.back() == '=') ++padding;
  if (compact.size() >= 2 && compact[compact.size() - 2] == '=') ++padding;
  if (padding == 1 && compact[compact.size() - 2] == '=') {
    throw std::invalid_argument("invalid base64 padding");
  }
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::string base64_encode(std::string_view raw) {
  std::string out(4 * ((raw.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()),
                                reinterpret_cast<const unsigned char *>(raw.data()),
                                static_cast<int>(raw.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string random_hex(std::size_t num_bytes) {
  std::string buf(num_bytes, '\0');
  if (RAND_bytes(reinterpret_cast<unsigned char *>(buf.data()),
                 static_cast<int>(num_bytes)) != 1) {
    throw std::runtime_error("RAND_bytes failed");
  }
  return to_hex(reinterpret_cast<const unsigned char *>(buf.data()), num_bytes);
}

}  // namespace q8s::common
