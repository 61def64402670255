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

#include <string>
#include <string_view>

namespace q8s::common {

// Lowercase hex SHA-256 of `data` (64 chars).
std::string sha256_hex(std::string_view data);

// Lowercase hex HMAC-SHA256 of the concatenation of `parts`.
std::string hmac_sha256_hex(std::string_view key,
                            std::initializer_list<std::string_view> parts);

// Compares in time independent of where the inputs differ.
bool constant_time_equal(std::string_view a, std::string_view b);

// Standard base64 decoding; embedded whitespace/newlines are tolerated.
// Throws std::invalid_argument on characters outside the alphabet or bad
// padding.
std::string base64_decode(std::string_view encoded);
std::string base64_encode(std::string_view raw);

// Cryptographically random bytes rendered as lowercase hex.
std::string random_hex(std::size_t num_bytes);

}  // namespace q8s::common
