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
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "q8s/image/build_driver.hpp"
#include "q8s/image/image_spec.hpp"

namespace q8s::image {

// Digests of images already built and pushed. Optionally backed by a text
// file holding one digest per line.
class DigestCache {
 public:
  DigestCache() = default;
  explicit DigestCache(std::filesystem::path persist_file);

  bool contains(std::string_view digest) const;
  void insert(const std::string &digest);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::set<std::string, std::less<>> digests_;
  std::optional<std::filesystem::path> persist_file_;
};

bool needs_rebuild(const ImageSpec &spec, const DigestCache &cache);

// Builds and pushes images through a driver, recording successes in the
// cache. Concurrent requests for one digest share a single build; distinct
// digests build in parallel.
class ImageBuilder {
 public:
  ImageBuilder(BuildDriver &driver, DigestCache &cache) : driver_(driver), cache_(cache) {}

  bool needs_rebuild(const ImageSpec &spec) const { return image::needs_rebuild(spec, cache_); }

  // Returns the published image reference. `on_pushing` fires between the
  // build and the push when this call performs them. If the digest was
  // published after the caller's needs_rebuild check, the driver is not
  // invoked again.
  std::string build_and_push(const ImageSpec &spec, const std::function<void()> &on_pushing = {});

 private:
  BuildDriver &driver_;
  DigestCache &cache_;
  std::mutex mu_;
  std::map<std::string, std::shared_future<void>> in_flight_;
};

}  // namespace q8s::image
