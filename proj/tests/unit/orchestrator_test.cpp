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

#include <gtest/gtest.h>

#include <cmath>

#include "q8s/fake/fake_cluster.hpp"
#include "q8s/image/build_driver.hpp"

namespace q8s::orchestrator {
namespace {

using namespace std::chrono_literals;
using fake::FakeCluster;
using fake::FaultKind;
using fake::LifecycleScript;
using fake::Operation;
using S = ExecutionState;

ExecutionOptions fast_options() {
  ExecutionOptions opts;
  opts.poll_interval = 5ms;
  opts.timeout = 10s;
  opts.retry.initial_backoff = 1ms;
  opts.retry.max_backoff = 4ms;
  return opts;
}

deps::CellSource cell(std::string text, std::string id = "cell-1") {
  return {std::move(text), std::move(id)};
}

struct Harness {
  explicit Harness(std::map<std::string, LifecycleScript> scripts = {})
      : fake(FakeCluster::start(std::move(scripts))),
        builder(driver, cache),
        orch(builder, deps::DependencyAnalyzer(), 42) {}

  ExecutionResult run(const std::string &code, ExecutionOptions opts = fast_options()) {
    return orch.execute_cell(cell(code), fake->cluster_config(), opts);
  }

  void expect_no_leftovers() const {
    const auto snap = fake->snapshot();
    EXPECT_TRUE(snap.jobs.empty()) << ::testing::PrintToString(snap.jobs);
    EXPECT_TRUE(snap.configmaps.empty()) << ::testing::PrintToString(snap.configmaps);
    EXPECT_TRUE(snap.pods.empty()) << ::testing::PrintToString(snap.pods);
  }

  std::unique_ptr<FakeCluster> fake;
  image::RecordingDriver driver;
  image::DigestCache cache;
  image::ImageBuilder builder;
  Orchestrator orch;
};

std::vector<S> states(const ExecutionResult &r) {
  std::vector<S> out;
  for (const auto &e : r.timeline) out.push_back(e.state);
  return out;
}

void expect_well_formed(const ExecutionResult &r) {
  ASSERT_FALSE(r.timeline.empty());
  EXPECT_EQ(r.timeline.front().state, S::Preparing);
  EXPECT_EQ(r.timeline.back().state, S::Done);
  for (std::size_t i = 1; i < r.timeline.size(); ++i) {
    EXPECT_LT(r.timeline[i - 1].state, r.timeline[i].state) << "timeline not strictly ordered";
    EXPECT_LE(r.timeline[i - 1].at, r.timeline[i].at);
  }
  EXPECT_EQ(r.timeline[r.timeline.size() - 2].state, S::CleaningUp);
  // Routing exclusivity.
  EXPECT_TRUE(r.stdout_text.empty() || r.stderr_text.empty());
  if (r.phase == TerminalPhase::Succeeded) {
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_TRUE(r.stderr_text.empty());
  }
  if (r.phase == TerminalPhase::Failed) {
    ASSERT_TRUE(r.exit_code.has_value());
    EXPECT_NE(*r.exit_code, 0);
    EXPECT_TRUE(r.stdout_text.empty());
  }
  const bool cleanup_failure = r.failed_state == ExecutionState::CleaningUp;
  if (r.phase != TerminalPhase::Succeeded && r.phase != TerminalPhase::Failed && !cleanup_failure) {
    EXPECT_FALSE(r.exit_code.has_value());
    EXPECT_TRUE(r.stdout_text.empty());
    EXPECT_TRUE(r.stderr_text.empty());
  }
  EXPECT_EQ(r.failed_state.has_value(), r.phase == TerminalPhase::InfraError);
}

TEST(Orchestrator, ScheduledJobSucceedsWithLogsOnStdout) {
  Harness h({{"*", {2, 3, 0, "counts: {'00': 512, '11': 512}", {}}}});
  const auto r = h.run("from qiskit import QuantumCircuit\n");
  expect_well_formed(r);
  EXPECT_EQ(r.phase, TerminalPhase::Succeeded);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.stdout_text, "counts: {'00': 512, '11': 512}");
  EXPECT_EQ(r.stderr_text, "");
  EXPECT_EQ(states(r), (std::vector<S>{S::Preparing, S::Building, S::Pushing, S::Submitting,
                                       S::Pending, S::Running, S::Collecting, S::CleaningUp,
                                       S::Done}));
  EXPECT_EQ(r.status_polls, 6);
  h.expect_no_leftovers();
}

TEST(Orchestrator, FailingPayloadRoutesLogsToStderr) {
  const std::string trace = "Traceback (most recent call last):\nValueError: bad\n";
  Harness h({{"*", {0, 1, 1, trace, {}}}});
  const auto r = h.run("raise ValueError('bad')\n");
  expect_well_formed(r);
  EXPECT_EQ(r.phase, TerminalPhase::Failed);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.stderr_text, trace);
  EXPECT_EQ(r.stdout_text, "");
  h.expect_no_leftovers();
}

TEST(Orchestrator, ExitCodeRoutingOverScriptedCodes) {
  for (int code : {0, 1, 2, 137, 255}) {
    Harness h({{"*", {0, 0, code, "payload output " + std::to_string(code), {}}}});
    const auto r = h.run("print(1)\n");
    expect_well_formed(r);
    EXPECT_EQ(r.exit_code, code);
    if (code == 0) {
      EXPECT_EQ(r.stdout_text, "payload output 0");
      EXPECT_EQ(r.stderr_text, "");
    } else {
      EXPECT_EQ(r.stderr_text, "payload output " + std::to_string(code));
      EXPECT_EQ(r.stdout_text, "");
    }
  }
}

TEST(Orchestrator, JobStuckPendingTimesOutAndCleansUp) {
  Harness h({{"*", {1'000'000, 0, 0, "", {}}}});
  auto opts = fast_options();
  opts.poll_interval = 10ms;
  opts.timeout = 50ms;
  const auto r = h.run("print(1)\n", opts);
  expect_well_formed(r);
  EXPECT_EQ(r.phase, TerminalPhase::TimedOut);
  EXPECT_LE(r.status_polls, 7);
  EXPECT_GE(r.status_polls, 2);
  h.expect_no_leftovers();
}

TEST(Orchestrator, SchedulingDelayIsNotAnError) {
  Harness h({{"*", {20, 1, 0, "ran", {}}}});
  const auto r = h.run("print(1)\n");
  EXPECT_EQ(r.phase, TerminalPhase::Succeeded);
  EXPECT_EQ(r.stdout_text, "ran");
  EXPECT_EQ(r.status_polls, 22);
}

TEST(Orchestrator, JobFinishingBeforeObservedRunningSkipsRunning) {
  Harness h({{"*", {1, 0, 0, "", {}}}});
  const auto r = h.run("print(1)\n");
  expect_well_formed(r);
  EXPECT_EQ(states(r), (std::vector<S>{S::Preparing, S::Building, S::Pushing, S::Submitting,
                                       S::Pending, S::Collecting, S::CleaningUp, S::Done}));
}

TEST(Orchestrator, PollCountStaysWithinBound) {
  for (auto [pending, running] : std::vector<std::pair<int, int>>{{0, 1}, {2, 3}, {5, 0}, {0, 0}, {7, 7}}) {
    Harness h({{"*", {pending, running, 0, "", {}}}});
    const auto r = h.run("print(1)\n");
    ASSERT_EQ(r.phase, TerminalPhase::Succeeded);
    const auto gets = h.fake->snapshot().status_gets(r.job_name);
    EXPECT_EQ(static_cast<int>(gets), r.status_polls);
    EXPECT_LE(static_cast<int>(gets), pending + running + 2) << pending << "," << running;
  }
}

TEST(Orchestrator, SubmitsConfigMapBeforeJobAndDeletesBoth) {
  Harness h;
  const auto r = h.run("print(1)\n");
  ASSERT_EQ(r.phase, TerminalPhase::Succeeded);
  const auto log = h.fake->snapshot().request_log;
  std::vector<std::string> mutations;
  for (const auto &rec : log) {
    if (rec.method != "GET") mutations.push_back(rec.method + " " + rec.path);
  }
  EXPECT_EQ(mutations,
            (std::vector<std::string>{
                "POST /api/v1/namespaces/default/configmaps",
                "POST /apis/batch/v1/namespaces/default/jobs",
                "DELETE /apis/batch/v1/namespaces/default/jobs/" + r.job_name +
                    "?propagationPolicy=Background",
                "DELETE /api/v1/namespaces/default/configmaps/" + r.configmap_name}));
  EXPECT_EQ(r.job_name.substr(12), r.configmap_name.substr(11));
}

TEST(Orchestrator, CacheSessionBuildsOncePerManifest) {
  Harness h;
  std::vector<std::string> cells(5, "import qiskit\nprint('x')\n");
  std::set<std::string> jobs;
  for (const auto &code : cells) {
    const auto r = h.run(code);
    ASSERT_EQ(r.phase, TerminalPhase::Succeeded);
    jobs.insert(r.job_name);
  }
  EXPECT_EQ(h.driver.builds().size(), 1u);
  EXPECT_EQ(h.driver.pushes().size(), 1u);
  EXPECT_EQ(h.fake->snapshot().count("POST", "/apis/batch/v1/"), 5u);
  EXPECT_EQ(jobs.size(), 5u);

  const auto changed = h.run("import qiskit\nimport numpy\n");
  EXPECT_EQ(changed.phase, TerminalPhase::Succeeded);
  EXPECT_EQ(h.driver.builds().size(), 2u);
}

TEST(Orchestrator, CacheHitSkipsBuildingAndPushing) {
  Harness h;
  h.run("import numpy\n");
  const auto r = h.run("import numpy as np\n");
  EXPECT_EQ(states(r), (std::vector<S>{S::Preparing, S::Submitting, S::Pending, S::Collecting,
                                       S::CleaningUp, S::Done}));
}

TEST(Orchestrator, TransientCreateFailureIsRetried) {
  Harness h;
  h.fake->inject({Operation::CreateJob, 1, FaultKind::Http500});
  const auto r = h.run("print(1)\n");
  EXPECT_EQ(r.phase, TerminalPhase::Succeeded);
  EXPECT_EQ(h.fake->snapshot().count("POST", "/apis/batch/v1/"), 2u);
  h.expect_no_leftovers();
}

TEST(Orchestrator, TransientPollFailuresAreRetriedUpToLimit) {
  Harness ok({{"*", {0, 1, 0, "", {}}}});
  for (int i = 1; i <= 5; ++i) ok.fake->inject({Operation::GetJob, i, FaultKind::Http500});
  EXPECT_EQ(ok.run("print(1)\n").phase, TerminalPhase::Succeeded);

  Harness bad({{"*", {0, 1, 0, "", {}}}});
  for (int i = 1; i <= 6; ++i) bad.fake->inject({Operation::GetJob, i, FaultKind::Http500});
  const auto r = bad.run("print(1)\n");
  expect_well_formed(r);
  EXPECT_EQ(r.phase, TerminalPhase::InfraError);
  EXPECT_EQ(r.failed_state, S::Pending);
  EXPECT_EQ(r.status_polls, 6);
  bad.expect_no_leftovers();
}

TEST(Orchestrator, ConflictOnFirstCreateIsNotOurs) {
  Harness h;
  Orchestrator twin(h.builder, deps::DependencyAnalyzer(), 42);
  const auto suffix = twin.next_suffix();
  cluster::ClusterClient other(h.fake->cluster_config());
  auto [job, cm] = make_manifests("someone else", "registry.com/user/job-dependencies:abc", 1, suffix);
  other.create_configmap(cm);

  const auto r = h.run("print(1)\n");
  expect_well_formed(r);
  EXPECT_EQ(r.phase, TerminalPhase::InfraError);
  EXPECT_EQ(r.failed_state, S::Submitting);
  EXPECT_EQ(r.configmap_name, cm.name);
  EXPECT_EQ(h.fake->snapshot().configmaps, std::vector<std::string>{"default/" + cm.name});
  EXPECT_TRUE(h.fake->snapshot().jobs.empty());
}

TEST(Orchestrator, AbortDuringPendingCleansUp) {
  Harness h({{"*", {1'000'000, 0, 0, "", {}}}});
  auto run = h.orch.start(cell("print(1)\n"), h.fake->cluster_config(), fast_options());
  ASSERT_TRUE(run->wait_for_state(S::Pending, 5s));
  std::this_thread::sleep_for(20ms);
  Orchestrator::abort(*run);
  const auto &r = run->wait();
  expect_well_formed(r);
  EXPECT_EQ(r.phase, TerminalPhase::Aborted);
  EXPECT_NE(r.diagnostic.find("abort"), std::string::npos);
  h.expect_no_leftovers();
}

TEST(Orchestrator, AbortDuringRunningCleansUp) {
  Harness h({{"*", {0, 1'000'000, 0, "", {}}}});
  auto run = h.orch.start(cell("print(1)\n"), h.fake->cluster_config(), fast_options());
  ASSERT_TRUE(run->wait_for_state(S::Running, 5s));
  run->abort();
  EXPECT_EQ(run->wait().phase, TerminalPhase::Aborted);
  h.expect_no_leftovers();
}

TEST(Orchestrator, AbortInterruptsLongPollWait) {
  Harness h({{"*", {1'000'000, 0, 0, "", {}}}});
  auto opts = fast_options();
  opts.poll_interval = 60s;
  auto run = h.orch.start(cell("print(1)\n"), h.fake->cluster_config(), opts);
  ASSERT_TRUE(run->wait_for_state(S::Pending, 5s));
  const auto t0 = std::chrono::steady_clock::now();
  run->abort();
  EXPECT_EQ(run->wait().phase, TerminalPhase::Aborted);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 2s);
}

TEST(Orchestrator, AbortDuringBuildingCreatesNothing) {
  Harness h;
  h.driver.set_build_delay(300ms);
  auto run = h.orch.start(cell("import qiskit\n"), h.fake->cluster_config(), fast_options());
  ASSERT_TRUE(run->wait_for_state(S::Building, 5s));
  run->abort();
  const auto &r = run->wait();
  expect_well_formed(r);
  EXPECT_EQ(r.phase, TerminalPhase::Aborted);
  EXPECT_TRUE(h.fake->snapshot().request_log.empty());
}

TEST(Orchestrator, AbortAfterDoneIsNoOp) {
  Harness h;
  auto run = h.orch.start(cell("print(1)\n"), h.fake->cluster_config(), fast_options());
  const auto before = run->wait();
  run->abort();
  run->abort();
  EXPECT_EQ(run->wait().phase, TerminalPhase::Succeeded);
  EXPECT_EQ(run->wait().timeline.size(), before.timeline.size());
}

TEST(Orchestrator, BuildAndPushFailuresAreInfraErrors) {
  {
    Harness h;
    h.driver.fail_next_build("pip: could not find qiskit");
    const auto r = h.run("import qiskit\n");
    expect_well_formed(r);
    EXPECT_EQ(r.phase, TerminalPhase::InfraError);
    EXPECT_EQ(r.failed_state, S::Building);
    EXPECT_NE(r.diagnostic.find("could not find qiskit"), std::string::npos);
    EXPECT_TRUE(h.fake->snapshot().request_log.empty());
  }
  {
    Harness h;
    h.driver.fail_next_push("denied: requested access to the resource is denied");
    const auto r = h.run("import qiskit\n");
    EXPECT_EQ(r.phase, TerminalPhase::InfraError);
    EXPECT_EQ(r.failed_state, S::Pushing);
    EXPECT_EQ(h.cache.size(), 0u);
  }
}

TEST(Orchestrator, ImagePullFailureIsInfraErrorAtPending) {
  Harness h({{"*", {3, 0, 0, "", {}}}});
  h.fake->inject({Operation::GetJob, 1, FaultKind::PullError});
  const auto r = h.run("print(1)\n");
  expect_well_formed(r);
  EXPECT_EQ(r.phase, TerminalPhase::InfraError);
  EXPECT_EQ(r.failed_state, S::Pending);
  EXPECT_NE(r.diagnostic.find("ErrImagePull"), std::string::npos);
  h.expect_no_leftovers();
}

TEST(Orchestrator, CleanupToleratesNotFound) {
  Harness h;
  h.fake->inject({Operation::DeleteConfigMap, 1, FaultKind::Http500});
  const auto r = h.run("print(1)\n");
  EXPECT_EQ(r.phase, TerminalPhase::Succeeded);
  h.expect_no_leftovers();
}

TEST(Orchestrator, PersistentCleanupFailureIsReported) {
  Harness h;
  h.fake->inject({Operation::DeleteJob, 1, FaultKind::Forbidden});
  const auto r = h.run("print(1)\n");
  expect_well_formed(r);
  EXPECT_EQ(r.phase, TerminalPhase::InfraError);
  EXPECT_EQ(r.failed_state, S::CleaningUp);
  EXPECT_NE(r.diagnostic.find(r.job_name), std::string::npos);
  EXPECT_EQ(h.fake->snapshot().jobs.size(), 1u);
  EXPECT_TRUE(h.fake->snapshot().configmaps.empty());
  // The payload's own outcome is still reported.
  EXPECT_EQ(r.exit_code, 0);
}

struct Scenario {
  std::string name;
  LifecycleScript script;
  std::vector<fake::Fault> faults;
  TerminalPhase expected;
  std::optional<ExecutionState> failed_state;
  std::function<void(Harness &)> setup = {};
  std::optional<S> abort_at = std::nullopt;
};

std::vector<Scenario> parity_matrix() {
  return {
      {"succeeded", {1, 1, 0, "ok", {}}, {}, TerminalPhase::Succeeded, std::nullopt},
      {"failed", {1, 1, 3, "err", {}}, {}, TerminalPhase::Failed, std::nullopt},
      {"timed-out", {1'000'000, 0, 0, "", {}}, {}, TerminalPhase::TimedOut, std::nullopt},
      {"aborted-pending", {1'000'000, 0, 0, "", {}}, {}, TerminalPhase::Aborted, std::nullopt, {}, S::Pending},
      {"aborted-running", {0, 1'000'000, 0, "", {}}, {}, TerminalPhase::Aborted, std::nullopt, {}, S::Running},
      {"aborted-building", {0, 0, 0, "", {}}, {}, TerminalPhase::Aborted, std::nullopt,
       [](Harness &h) { h.driver.set_build_delay(200ms); }, S::Building},
      {"infra-building", {0, 0, 0, "", {}}, {}, TerminalPhase::InfraError, S::Building,
       [](Harness &h) { h.driver.fail_next_build(); }},
      {"infra-pushing", {0, 0, 0, "", {}}, {}, TerminalPhase::InfraError, S::Pushing,
       [](Harness &h) { h.driver.fail_next_push(); }},
      {"infra-submitting-configmap", {0, 0, 0, "", {}},
       {{Operation::CreateConfigMap, 1, FaultKind::Forbidden}}, TerminalPhase::InfraError, S::Submitting},
      {"infra-submitting-job", {0, 0, 0, "", {}},
       {{Operation::CreateJob, 1, FaultKind::Forbidden}}, TerminalPhase::InfraError, S::Submitting},
      {"infra-submitting-job-dropped", {0, 0, 0, "", {}},
       {{Operation::CreateJob, 1, FaultKind::DropConnection},
        {Operation::CreateJob, 2, FaultKind::DropConnection},
        {Operation::CreateJob, 3, FaultKind::DropConnection},
        {Operation::CreateJob, 4, FaultKind::DropConnection},
        {Operation::CreateJob, 5, FaultKind::DropConnection},
        {Operation::CreateJob, 6, FaultKind::DropConnection}},
       TerminalPhase::InfraError, S::Submitting},
      {"infra-pending-pull", {2, 0, 0, "", {}}, {{Operation::GetJob, 1, FaultKind::PullError}},
       TerminalPhase::InfraError, S::Pending},
      {"infra-pending-forbidden", {2, 0, 0, "", {}}, {{Operation::GetJob, 1, FaultKind::Forbidden}},
       TerminalPhase::InfraError, S::Pending},
      {"infra-running", {0, 3, 0, "", {}},
       {{Operation::GetJob, 2, FaultKind::Forbidden}}, TerminalPhase::InfraError, S::Running},
      {"infra-collecting", {0, 0, 0, "", {}}, {{Operation::GetLog, 1, FaultKind::Forbidden}},
       TerminalPhase::InfraError, S::Collecting},
      {"transient-everywhere", {1, 1, 0, "ok", {}},
       {{Operation::CreateConfigMap, 1, FaultKind::DropConnection},
        {Operation::CreateJob, 1, FaultKind::Http500},
        {Operation::GetJob, 2, FaultKind::Http500},
        {Operation::ListPods, 1, FaultKind::Http500},
        {Operation::GetLog, 1, FaultKind::DropConnection},
        {Operation::DeleteJob, 1, FaultKind::Http500},
        {Operation::DeleteConfigMap, 1, FaultKind::DropConnection}},
       TerminalPhase::Succeeded, std::nullopt},
      {"create-response-lost", {0, 0, 0, "", {}},
       {{Operation::CreateJob, 1, FaultKind::DropConnection}}, TerminalPhase::Succeeded, std::nullopt},
  };
}

TEST(Orchestrator, ResourceParityAcrossFaultMatrix) {
  const auto matrix = parity_matrix();
  ASSERT_GE(matrix.size(), 10u);
  for (const auto &sc : matrix) {
    SCOPED_TRACE(sc.name);
    Harness h({{"*", sc.script}});
    for (const auto &f : sc.faults) h.fake->inject(f);
    if (sc.setup) sc.setup(h);
    auto opts = fast_options();
    if (sc.expected == TerminalPhase::TimedOut) opts.timeout = 40ms;
    auto run = h.orch.start(cell("import qiskit\n"), h.fake->cluster_config(), opts);
    if (sc.abort_at) {
      ASSERT_TRUE(run->wait_for_state(*sc.abort_at, 5s));
      run->abort();
    }
    const auto &r = run->wait();
    expect_well_formed(r);
    EXPECT_EQ(r.phase, sc.expected) << r.diagnostic;
    EXPECT_EQ(r.failed_state, sc.failed_state) << r.diagnostic;
    h.expect_no_leftovers();
  }
}

TEST(Orchestrator, ConcurrentRunsAreIndependent) {
  Harness h({{"*", {2, 2, 0, "same", {}}}});
  std::vector<std::shared_ptr<RunHandle>> runs;
  for (int i = 0; i < 6; ++i) {
    runs.push_back(h.orch.start(cell("import qiskit\n", "c" + std::to_string(i)),
                                h.fake->cluster_config(), fast_options()));
  }
  std::set<std::string> names;
  for (auto &r : runs) {
    const auto &res = r->wait();
    EXPECT_EQ(res.phase, TerminalPhase::Succeeded);
    names.insert(res.job_name);
  }
  EXPECT_EQ(names.size(), 6u);
  EXPECT_EQ(h.driver.builds().size(), 1u);
  h.expect_no_leftovers();
}

TEST(Orchestrator, SeededSuffixesAreReproducibleAndDistinct) {
  image::RecordingDriver d;
  image::DigestCache c;
  image::ImageBuilder b(d, c);
  Orchestrator a(b, deps::DependencyAnalyzer(), 7), same(b, deps::DependencyAnalyzer(), 7);
  std::set<std::string> seen;
  for (int i = 0; i < 100; ++i) {
    const auto s = a.next_suffix();
    EXPECT_EQ(s, same.next_suffix());
    EXPECT_EQ(s.size(), 8u);
    EXPECT_EQ(s.find_first_not_of("0123456789abcdef"), std::string::npos);
    seen.insert(s);
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Orchestrator, PlanUsesContentAddressedImage) {
  image::RecordingDriver d;
  image::DigestCache c;
  image::ImageBuilder b(d, c);
  Orchestrator o(b, deps::DependencyAnalyzer(), 1);
  ExecutionOptions opts;
  const auto p = o.plan(cell("import qiskit_aer\n"), opts, "0badcafe");
  EXPECT_EQ(p.dependencies.packages, (std::vector<std::string>{"qiskit-aer"}));
  EXPECT_EQ(p.job.name, "quantum-job-0badcafe");
  EXPECT_EQ(p.configmap.name, "task-files-0badcafe");
  EXPECT_EQ(p.job.image, p.image.image_ref);
  EXPECT_EQ(p.image.image_ref.rfind("registry.com/user/job-dependencies:", 0), 0u);
  EXPECT_EQ(p.configmap.data.at("main.py"), "import qiskit_aer\n");
}

TEST(Orchestrator, RejectsInvalidInputsUpFront) {
  Harness h;
  auto opts = fast_options();
  opts.gpu_count = -1;
  EXPECT_THROW(h.orch.start(cell(""), h.fake->cluster_config(), opts), std::invalid_argument);
  opts = fast_options();
  opts.registry = "Registry/With Space";
  EXPECT_THROW(h.orch.start(cell(""), h.fake->cluster_config(), opts), image::ImageError);
  auto cfg = h.fake->cluster_config();
  cfg.namespace_name = "Bad_NS";
  EXPECT_THROW(h.orch.start(cell(""), cfg, fast_options()), cluster::ConfigError);
  EXPECT_TRUE(h.fake->snapshot().request_log.empty());
}

TEST(RetryPolicy, BackoffIsExponentialAndCapped) {
  RetryPolicy p;
  EXPECT_EQ(p.backoff(1), 200ms);
  EXPECT_EQ(p.backoff(2), 400ms);
  EXPECT_EQ(p.backoff(3), 800ms);
  EXPECT_EQ(p.backoff(5), 3200ms);
  EXPECT_EQ(p.backoff(6), 5000ms);
  EXPECT_EQ(p.backoff(60), 5000ms);
}

}  // namespace
}  // namespace q8s::orchestrator
