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

#include "q8s/image/image_builder.hpp"

#include <fstream>

#include "q8s/common/fs.hpp"

namespace q8s::image {

namespace {

bool looks_like_digest(std::string_view s) {
  return s.size() == 64 && s.find_first_not_of("0123456789abcdef") == std::string_view::npos;
}

}  // namespace

DigestCache::DigestCache(std::filesystem::path persist_file)
    : persist_file_(std::move(persist_file)) {
  if (auto text = common::read_file(*persist_file_)) {
    std::size_t pos = 0;
    while (pos < text->size()) {
      auto nl = text->find('\n', pos);
      if (nl == std::string::npos) nl = text->size();
      const std::string_view line(text->data() + pos, nl - pos);
      if (looks_like_digest(line)) {
        digests_.emplace(line);
      }
      pos = nl + 1;
    }
  }
}

bool DigestCache::contains(std::string_view digest) const {
  std::lock_guard lock(mu_);
  return digests_.contains(digest);
}

void DigestCache::insert(const std::string &digest) {
  std::lock_guard lock(mu_);
  if (!digests_.insert(digest).second || !persist_file_) {
    return;
  }
  std::ofstream out(*persist_file_, std::ios::app);
  out << digest << '\n';
}

std::size_t DigestCache::size() const {
  std::lock_guard lock(mu_);
  return digests_.size();
}

bool needs_rebuild(const ImageSpec &spec, const DigestCache &cache) {
  return !cache.contains(spec.digest);
}

std::string ImageBuilder::build_and_push(const ImageSpec &spec,
                                         const std::function<void()> &on_pushing) {
  std::promise<void> promise;
  {
    std::unique_lock lock(mu_);
    if (auto it = in_flight_.find(spec.digest); it != in_flight_.end()) {
      auto pending = it->second;
      lock.unlock();
      pending.get();  // rethrows the leader's failure
      return spec.image_ref;
    }
    if (cache_.contains(spec.digest)) {
      return spec.image_ref;
    }
    in_flight_.emplace(spec.digest, promise.get_future().share());
  }

  const auto finish = [&] {
    std::lock_guard lock(mu_);
    in_flight_.erase(spec.digest);
  };
  try {
    driver_.build(make_build_context(spec), spec.image_ref);
    if (on_pushing) {
      on_pushing();
    }
    driver_.push(spec.image_ref);
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish();
    throw;
  }
  cache_.insert(spec.digest);
  promise.set_value();
  finish();
  return spec.image_ref;
}

}  // namespace q8s::image
