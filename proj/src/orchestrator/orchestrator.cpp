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

#include "q8s/orchestrator/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

namespace q8s::orchestrator {

using cluster::ApiError;
using cluster::ApiErrorKind;
using cluster::ClusterClient;
using cluster::JobPhase;
using cluster::JobStatus;
using Clock = std::chrono::steady_clock;

std::string_view to_string(ExecutionState state) {
  switch (state) {
    case ExecutionState::Preparing: return "Preparing";
    case ExecutionState::Building: return "Building";
    case ExecutionState::Pushing: return "Pushing";
    case ExecutionState::Submitting: return "Submitting";
    case ExecutionState::Pending: return "Pending";
    case ExecutionState::Running: return "Running";
    case ExecutionState::Collecting: return "Collecting";
    case ExecutionState::CleaningUp: return "CleaningUp";
    case ExecutionState::Done: return "Done";
  }
  return "Unknown";
}

std::string_view to_string(TerminalPhase phase) {
  switch (phase) {
    case TerminalPhase::Succeeded: return "Succeeded";
    case TerminalPhase::Failed: return "Failed";
    case TerminalPhase::TimedOut: return "TimedOut";
    case TerminalPhase::Aborted: return "Aborted";
    case TerminalPhase::InfraError: return "InfraError";
  }
  return "Unknown";
}

std::chrono::milliseconds RetryPolicy::backoff(int retry) const {
  const double ms = static_cast<double>(initial_backoff.count()) *
                    std::pow(multiplier, std::max(0, retry - 1));
  return std::min(max_backoff, std::chrono::milliseconds(static_cast<std::int64_t>(
                                   std::min(ms, static_cast<double>(max_backoff.count())))));
}

void validate_options(const ExecutionOptions &opts) {
  if (opts.gpu_count < 0) throw std::invalid_argument("gpu count must be >= 0");
  if (opts.poll_interval <= std::chrono::milliseconds::zero()) {
    throw std::invalid_argument("poll interval must be positive");
  }
  if (opts.timeout <= std::chrono::milliseconds::zero()) {
    throw std::invalid_argument("timeout must be positive");
  }
  if (opts.retry.max_retries < 0 || opts.retry.multiplier < 1.0 ||
      opts.retry.initial_backoff < std::chrono::milliseconds::zero()) {
    throw std::invalid_argument("invalid retry policy");
  }
  if (!image::is_valid_image_reference(opts.base_image)) {
    throw image::ImageError(image::ImageErrorKind::InvalidReference,
                            "invalid base image '" + opts.base_image + "'");
  }
  if (!image::is_valid_registry_prefix(opts.registry)) {
    throw image::ImageError(image::ImageErrorKind::InvalidReference,
                            "invalid registry '" + opts.registry + "'");
  }
}

// ---- RunHandle ----

ExecutionState RunHandle::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

bool RunHandle::done() const {
  std::lock_guard lock(mu_);
  return done_;
}

void RunHandle::abort() {
  std::lock_guard lock(mu_);
  if (done_) return;
  aborted_ = true;
  cv_.notify_all();
}

const ExecutionResult &RunHandle::wait() const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return done_; });
  return result_;
}

bool RunHandle::wait_for_state(ExecutionState state, std::chrono::milliseconds limit) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, limit, [&] { return state_ >= state; });
}

// ---- Run ----

namespace {

struct Outcome {
  TerminalPhase phase;
  std::string diagnostic;
  std::optional<ExecutionState> failed_state;
};

class Stop {
 public:
  explicit Stop(Outcome o) : outcome(std::move(o)) {}
  Outcome outcome;
};

}  // namespace

class Run {
 public:
  Run(Orchestrator &orch, std::shared_ptr<RunHandle> handle, cluster::ClusterConfig cfg,
      ExecutionOptions opts, ExecutionPlan plan)
      : orch_(orch),
        h_(std::move(handle)),
        client_(std::move(cfg), opts.timeouts),
        opts_(std::move(opts)),
        plan_(std::move(plan)) {}

  void operator()() {
    std::optional<Outcome> outcome;
    try {
      build();
      submit();
      poll();
      collect();
    } catch (const Stop &s) {
      outcome = s.outcome;
    }
    cleanup(outcome);
    finish();
  }

 private:
  // ---- state bookkeeping ----

  void enter(ExecutionState next) {
    std::lock_guard lock(h_->mu_);
    enter_locked(next);
  }

  void enter_locked(ExecutionState next) {
    if (next <= h_->state_ && !h_->result_.timeline.empty()) return;
    h_->state_ = next;
    h_->result_.timeline.push_back({next, std::chrono::system_clock::now()});
    h_->cv_.notify_all();
  }

  ExecutionState current() const { return h_->state(); }

  bool aborted() const {
    std::lock_guard lock(h_->mu_);
    return h_->aborted_;
  }

  void check_abort() const {
    if (aborted()) throw Stop({TerminalPhase::Aborted, "execution aborted by user", std::nullopt});
  }

  // Sleeps up to `d`; returns early (true) if the run is aborted meanwhile.
  bool sleep_or_abort(std::chrono::milliseconds d) const {
    std::unique_lock lock(h_->mu_);
    return h_->cv_.wait_for(lock, d, [&] { return h_->aborted_; });
  }

  [[noreturn]] void infra(const std::string &what) const {
    throw Stop({TerminalPhase::InfraError, what, current()});
  }

  // Retries Unavailable errors per the policy; aborts interrupt backoff.
  template <typename Fn>
  auto with_retry(const Fn &fn, int *attempts = nullptr) const -> decltype(fn()) {
    for (int retry = 0;; ++retry) {
      if (attempts) ++*attempts;
      try {
        return fn();
      } catch (const ApiError &e) {
        if (!e.retryable() || retry >= opts_.retry.max_retries) throw;
      }
      if (sleep_or_abort(opts_.retry.backoff(retry + 1))) check_abort();
    }
  }

  // ---- phases ----

  void build() {
    check_abort();
    h_->result_.image_ref = plan_.image.image_ref;
    if (!orch_.builder_.needs_rebuild(plan_.image)) return;

    enter(ExecutionState::Building);
    auto error = std::make_shared<std::exception_ptr>();
    auto handle = h_;
    auto &builder = orch_.builder_;
    auto spec = plan_.image;
    std::thread worker([handle, error, &builder, spec] {
      std::exception_ptr failure;
      try {
        builder.build_and_push(spec, [&handle] {
          std::lock_guard lock(handle->mu_);
          if (!handle->aborted_ && handle->state_ == ExecutionState::Building) {
            handle->state_ = ExecutionState::Pushing;
            handle->result_.timeline.push_back(
                {ExecutionState::Pushing, std::chrono::system_clock::now()});
            handle->cv_.notify_all();
          }
        });
      } catch (...) {
        failure = std::current_exception();
      }
      std::lock_guard lock(handle->mu_);
      *error = failure;
      handle->build_finished_ = true;
      handle->cv_.notify_all();
    });
    {
      std::lock_guard lock(orch_.threads_mu_);
      orch_.builds_.emplace_back(h_, std::move(worker));
    }

    std::unique_lock lock(h_->mu_);
    h_->cv_.wait(lock, [&] { return h_->aborted_ || h_->build_finished_; });
    if (h_->aborted_) {
      lock.unlock();
      check_abort();
    }
    if (*error) {
      const auto failed_state = h_->state_;
      lock.unlock();
      try {
        std::rethrow_exception(*error);
      } catch (const image::ImageError &e) {
        std::string msg = e.what();
        if (!e.log().empty()) msg += "\n" + e.log();
        throw Stop({TerminalPhase::InfraError, msg, failed_state});
      } catch (const std::exception &e) {
        throw Stop({TerminalPhase::InfraError, e.what(), failed_state});
      }
    }
  }

  // Conflict after a retried attempt means an earlier attempt landed.
  template <typename Fn>
  void create(const Fn &fn, bool &created, const char *what) {
    int attempts = 0;
    try {
      with_retry(
          [&] {
            try {
              fn();
            } catch (const ApiError &e) {
              if (e.kind() == ApiErrorKind::Unavailable) created = true;  // may have landed
              throw;
            }
          },
          &attempts);
      created = true;
    } catch (const ApiError &e) {
      if (e.kind() == ApiErrorKind::Conflict && attempts > 1) {
        created = true;
        return;
      }
      infra(std::string("creating ") + what + " failed: " + e.what());
    }
  }

  void submit() {
    check_abort();
    enter(ExecutionState::Submitting);
    create([&] { client_.create_configmap(plan_.configmap); }, configmap_created_, "ConfigMap");
    check_abort();
    create([&] { client_.create_job(plan_.job); }, job_created_, "Job");
  }

  void poll() {
    check_abort();
    enter(ExecutionState::Pending);
    const auto deadline = Clock::now() + opts_.timeout;
    for (;;) {
      check_abort();
      JobStatus status;
      try {
        status = with_retry([&] {
          {
            std::lock_guard lock(h_->mu_);
            ++h_->result_.status_polls;
          }
          return client_.get_job_status(plan_.job.name);
        });
      } catch (const ApiError &e) {
        infra(std::string("polling job status failed: ") + e.what());
      }
      if (status.phase == JobPhase::Pending && status.image_pull_failed()) {
        infra("image pull failed for " + plan_.image.image_ref + ": " + *status.waiting_reason);
      }
      if (status.phase == JobPhase::Active) enter(ExecutionState::Running);
      if (status.terminal()) {
        final_status_ = status;
        return;
      }
      const auto now = Clock::now();
      if (now >= deadline) timed_out();
      const auto wait = std::min<Clock::duration>(opts_.poll_interval, deadline - now);
      if (sleep_or_abort(std::chrono::duration_cast<std::chrono::milliseconds>(wait))) {
        check_abort();
      }
      if (Clock::now() >= deadline) timed_out();
    }
  }

  [[noreturn]] void timed_out() const {
    throw Stop({TerminalPhase::TimedOut,
                "job did not finish within " + std::to_string(opts_.timeout.count()) + " ms",
                std::nullopt});
  }

  void collect() {
    check_abort();
    enter(ExecutionState::Collecting);
    std::string logs;
    if (final_status_.pod_name) {
      try {
        logs = with_retry([&] { return client_.get_pod_logs(*final_status_.pod_name); });
      } catch (const ApiError &e) {
        if (e.kind() != ApiErrorKind::NotFound && e.kind() != ApiErrorKind::Rejected) {
          infra(std::string("collecting logs failed: ") + e.what());
        }
        note_ = std::string("logs unavailable: ") + e.what();
      }
    } else {
      note_ = "no pod found for job " + plan_.job.name;
    }
    const int code = final_status_.exit_code.value_or(1);
    std::lock_guard lock(h_->mu_);
    auto &r = h_->result_;
    r.exit_code = code;
    if (code == 0) {
      r.phase = TerminalPhase::Succeeded;
      r.stdout_text = std::move(logs);
    } else {
      r.phase = TerminalPhase::Failed;
      r.stderr_text = std::move(logs);
    }
  }

  void cleanup(const std::optional<Outcome> &outcome) {
    if (outcome) {
      std::lock_guard lock(h_->mu_);
      auto &r = h_->result_;
      r.phase = outcome->phase;
      r.diagnostic = outcome->diagnostic;
      r.failed_state = outcome->failed_state;
      r.exit_code.reset();
      r.stdout_text.clear();
      r.stderr_text.clear();
    } else if (!note_.empty()) {
      std::lock_guard lock(h_->mu_);
      h_->result_.diagnostic = note_;
    }
    enter(ExecutionState::CleaningUp);

    std::vector<std::string> leftovers;
    auto remove = [&](bool created, const std::function<void()> &fn, const std::string &name) {
      if (!created) return;
      try {
        with_retry_ignoring_abort(fn);
      } catch (const ApiError &e) {
        if (e.kind() != ApiErrorKind::NotFound) leftovers.push_back(name + " (" + e.what() + ")");
      }
    };
    remove(job_created_, [&] { client_.delete_job(plan_.job.name); }, "job " + plan_.job.name);
    remove(configmap_created_, [&] { client_.delete_configmap(plan_.configmap.name); },
           "configmap " + plan_.configmap.name);

    if (!leftovers.empty()) {
      std::string msg = "cleanup failed, left behind:";
      for (const auto &l : leftovers) msg += " " + l + ";";
      std::lock_guard lock(h_->mu_);
      auto &r = h_->result_;
      if (r.phase == TerminalPhase::Succeeded || r.phase == TerminalPhase::Failed) {
        r.phase = TerminalPhase::InfraError;
        r.failed_state = ExecutionState::CleaningUp;
        r.diagnostic = msg;
      } else {
        r.diagnostic += r.diagnostic.empty() ? msg : "; " + msg;
      }
    }
  }

  // Cleanup must run to completion even after an abort.
  void with_retry_ignoring_abort(const std::function<void()> &fn) const {
    for (int retry = 0;; ++retry) {
      try {
        return fn();
      } catch (const ApiError &e) {
        if (!e.retryable() || retry >= opts_.retry.max_retries) throw;
      }
      std::this_thread::sleep_for(opts_.retry.backoff(retry + 1));
    }
  }

  void finish() {
    std::lock_guard lock(h_->mu_);
    enter_locked(ExecutionState::Done);
    h_->done_ = true;
    h_->cv_.notify_all();
  }

  Orchestrator &orch_;
  std::shared_ptr<RunHandle> h_;
  ClusterClient client_;
  ExecutionOptions opts_;
  ExecutionPlan plan_;
  bool configmap_created_ = false;
  bool job_created_ = false;
  JobStatus final_status_;
  std::string note_;
};

// ---- Orchestrator ----

Orchestrator::Orchestrator(image::ImageBuilder &builder, deps::DependencyAnalyzer analyzer,
                           std::optional<std::uint64_t> seed)
    : builder_(builder),
      analyzer_(std::move(analyzer)),
      rng_(seed ? *seed : (std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}()) {}

Orchestrator::~Orchestrator() {
  std::vector<std::pair<std::shared_ptr<RunHandle>, std::thread>> runs, builds;
  {
    std::lock_guard lock(threads_mu_);
    runs.swap(runs_);
  }
  for (auto &[h, t] : runs) {
    h->abort();
    t.join();
  }
  {
    std::lock_guard lock(threads_mu_);
    builds.swap(builds_);
  }
  for (auto &[h, t] : builds) t.join();
}

std::string Orchestrator::next_suffix() {
  std::lock_guard lock(rng_mu_);
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(rng_() & 0xffffffffu));
  return buf;
}

ExecutionPlan Orchestrator::plan(const deps::CellSource &cell, const ExecutionOptions &opts,
                                 std::string_view suffix) const {
  ExecutionPlan p;
  p.dependencies = analyzer_.analyze(cell);
  p.image = image::build_spec(p.dependencies, opts.base_image, opts.registry);
  auto [job, cm] = make_manifests(cell.text, p.image.image_ref, opts.gpu_count, suffix);
  p.job = std::move(job);
  p.configmap = std::move(cm);
  return p;
}

std::shared_ptr<RunHandle> Orchestrator::start(const deps::CellSource &cell,
                                               const cluster::ClusterConfig &cfg,
                                               const ExecutionOptions &opts) {
  cluster::validate(cfg);
  validate_options(opts);
  auto handle = std::make_shared<RunHandle>();
  auto p = plan(cell, opts, next_suffix());
  handle->result_.job_name = p.job.name;
  handle->result_.configmap_name = p.configmap.name;
  handle->result_.timeline.push_back({ExecutionState::Preparing, std::chrono::system_clock::now()});

  auto run = std::make_shared<Run>(*this, handle, cfg, opts, std::move(p));
  std::lock_guard lock(threads_mu_);
  // Reap finished workers so long sessions do not accumulate threads.
  auto reap = [](auto &list, auto finished) {
    for (auto it = list.begin(); it != list.end();) {
      if (finished(*it->first)) {
        it->second.join();
        it = list.erase(it);
      } else {
        ++it;
      }
    }
  };
  reap(runs_, [](const RunHandle &h) { return h.done(); });
  reap(builds_, [](const RunHandle &h) {
    std::lock_guard l(h.mu_);
    return h.build_finished_;
  });
  runs_.emplace_back(handle, std::thread([run] { (*run)(); }));
  return handle;
}

ExecutionResult Orchestrator::execute_cell(const deps::CellSource &cell,
                                           const cluster::ClusterConfig &cfg,
                                           const ExecutionOptions &opts) {
  return start(cell, cfg, opts)->wait();
}

}  // namespace q8s::orchestrator
