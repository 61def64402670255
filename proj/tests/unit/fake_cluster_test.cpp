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

#include "q8s/fake/fake_cluster.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "httplib.h"
#include "q8s/cluster/cluster_client.hpp"
#include "q8s/cluster/kubeconfig.hpp"
#include "q8s/orchestrator/manifests.hpp"

namespace q8s::fake {
namespace {

using cluster::ApiError;
using cluster::ApiErrorKind;
using cluster::ClusterClient;
using cluster::JobPhase;
using nlohmann::json;

orchestrator::JobManifest job_named(const std::string &suffix) {
  return orchestrator::make_manifests("print('hi')\n", "registry.com/user/job-dependencies:abc",
                                      1, suffix)
      .first;
}

orchestrator::ConfigMapManifest configmap_named(const std::string &suffix) {
  return orchestrator::make_manifests("print('hi')\n", "registry.com/user/job-dependencies:abc",
                                      1, suffix)
      .second;
}

httplib::Client raw_client(const FakeCluster &fake, const std::string &token = "fake-token") {
  httplib::Client cli("127.0.0.1", fake.port());
  cli.set_bearer_token_auth(token);
  return cli;
}

ApiErrorKind error_kind_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const ApiError &e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected ApiError";
  return ApiErrorKind::Rejected;
}

TEST(FakeCluster, ReplaysLifecycleOneStepPerStatusGet) {
  auto fake = FakeCluster::start({{"quantum-job-*", {2, 3, 0, "ok", {}}}});
  ClusterClient client(fake->cluster_config());
  client.create_job(job_named("00000001"));

  std::vector<JobPhase> seen;
  for (int i = 0; i < 6; ++i) {
    seen.push_back(client.get_job_status("quantum-job-00000001").phase);
  }
  EXPECT_EQ(seen, (std::vector<JobPhase>{JobPhase::Pending, JobPhase::Pending, JobPhase::Active,
                                         JobPhase::Active, JobPhase::Active, JobPhase::Succeeded}));
  const auto final_status = client.get_job_status("quantum-job-00000001");
  EXPECT_EQ(final_status.phase, JobPhase::Succeeded);
  EXPECT_EQ(final_status.exit_code, 0);
  ASSERT_TRUE(final_status.pod_name.has_value());
  EXPECT_EQ(client.get_pod_logs(*final_status.pod_name), "ok");
  EXPECT_EQ(fake->snapshot().status_gets("quantum-job-00000001"), 7u);
}

TEST(FakeCluster, FailedScriptReportsContainerExitCode) {
  auto fake = FakeCluster::start({{"*", {0, 1, 137, "Killed\n", {}}}});
  ClusterClient client(fake->cluster_config());
  client.create_job(job_named("00000002"));
  EXPECT_EQ(client.get_job_status("quantum-job-00000002").phase, JobPhase::Active);
  const auto status = client.get_job_status("quantum-job-00000002");
  EXPECT_EQ(status.phase, JobPhase::Failed);
  EXPECT_EQ(status.exit_code, 137);
}

TEST(FakeCluster, LongestMatchingPatternWins) {
  auto fake = FakeCluster::start({{"*", {0, 0, 0, "generic", {}}},
                                  {"quantum-job-aa*", {0, 0, 5, "specific", {}}}});
  ClusterClient client(fake->cluster_config());
  client.create_job(job_named("aa000000"));
  client.create_job(job_named("bb000000"));
  EXPECT_EQ(client.get_job_status("quantum-job-aa000000").exit_code, 5);
  EXPECT_EQ(client.get_job_status("quantum-job-bb000000").exit_code, 0);
}

TEST(FakeCluster, UnmatchedJobsRunDefaultScript) {
  auto fake = FakeCluster::start({{"nothing-matches", {9, 9, 9, "", {}}}});
  ClusterClient client(fake->cluster_config());
  client.create_job(job_named("00000003"));
  const auto status = client.get_job_status("quantum-job-00000003");
  EXPECT_EQ(status.phase, JobPhase::Succeeded);
  EXPECT_EQ(status.exit_code, 0);
}

TEST(FakeCluster, Http500FaultHitsOnlyTheNamedOccurrence) {
  auto fake = FakeCluster::start({});
  fake->inject({Operation::CreateJob, 1, FaultKind::Http500});
  ClusterClient client(fake->cluster_config());
  try {
    client.create_job(job_named("00000004"));
    FAIL() << "expected 500";
  } catch (const ApiError &e) {
    EXPECT_EQ(e.kind(), ApiErrorKind::Unavailable);
    EXPECT_EQ(e.http_status(), 500);
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_TRUE(fake->snapshot().jobs.empty());
  EXPECT_EQ(client.create_job(job_named("00000004")), "quantum-job-00000004");
}

TEST(FakeCluster, FaultKindsMapToClientErrors) {
  auto fake = FakeCluster::start({});
  fake->inject({Operation::CreateConfigMap, 1, FaultKind::Forbidden});
  fake->inject({Operation::CreateConfigMap, 2, FaultKind::Conflict});
  fake->inject({Operation::CreateConfigMap, 3, FaultKind::DropConnection});
  ClusterClient client(fake->cluster_config());
  const auto cm = configmap_named("00000005");
  EXPECT_EQ(error_kind_of([&] { client.create_configmap(cm); }), ApiErrorKind::Unauthorized);
  EXPECT_EQ(error_kind_of([&] { client.create_configmap(cm); }), ApiErrorKind::Conflict);
  // The dropped create still landed; only the response was lost.
  EXPECT_EQ(error_kind_of([&] { client.create_configmap(cm); }), ApiErrorKind::Unavailable);
  EXPECT_EQ(fake->snapshot().configmaps, std::vector<std::string>{"default/task-files-00000005"});
  EXPECT_EQ(error_kind_of([&] { client.create_configmap(cm); }), ApiErrorKind::Conflict);
}

TEST(FakeCluster, DroppedReadsChangeNothing) {
  auto fake = FakeCluster::start({{"*", {1, 0, 0, "", {}}}});
  fake->inject({Operation::GetJob, 1, FaultKind::DropConnection});
  ClusterClient client(fake->cluster_config());
  client.create_job(job_named("00000015"));
  EXPECT_EQ(error_kind_of([&] { client.get_job_status("quantum-job-00000015"); }),
            ApiErrorKind::Unavailable);
  EXPECT_EQ(client.get_job_status("quantum-job-00000015").phase, JobPhase::Pending);
}

TEST(FakeCluster, FaultsFromScriptsAreRegistered) {
  auto fake = FakeCluster::start(
      {{"*", {0, 0, 0, "", {{Operation::DeleteJob, 1, FaultKind::Http500}}}}});
  ClusterClient client(fake->cluster_config());
  client.create_job(job_named("00000006"));
  EXPECT_EQ(error_kind_of([&] { client.delete_job("quantum-job-00000006"); }),
            ApiErrorKind::Unavailable);
  client.delete_job("quantum-job-00000006");
}

TEST(FakeCluster, PullErrorKeepsJobPendingWithWaitingReason) {
  auto fake = FakeCluster::start({{"*", {0, 1, 0, "", {}}}});
  fake->inject({Operation::GetJob, 1, FaultKind::PullError});
  ClusterClient client(fake->cluster_config());
  client.create_job(job_named("00000007"));
  for (int i = 0; i < 3; ++i) {
    const auto status = client.get_job_status("quantum-job-00000007");
    EXPECT_EQ(status.phase, JobPhase::Pending);
    EXPECT_EQ(status.waiting_reason, "ErrImagePull");
    EXPECT_TRUE(status.image_pull_failed());
  }
}

TEST(FakeCluster, RejectsInvalidFaults) {
  FakeCluster fake;
  EXPECT_THROW(fake.inject({Operation::CreateJob, 0, FaultKind::Http500}), std::invalid_argument);
  EXPECT_THROW(fake.inject({Operation::CreateJob, 1, FaultKind::PullError}),
               std::invalid_argument);
  EXPECT_THROW(FakeCluster({{"*", {0, 0, 0, "", {{Operation::GetLog, -2, FaultKind::Conflict}}}}}),
               std::invalid_argument);
}

TEST(FakeCluster, ParsesOperationAndFaultNames) {
  for (auto op : {Operation::CreateJob, Operation::CreateConfigMap, Operation::GetJob,
                  Operation::ListPods, Operation::GetLog, Operation::DeleteJob,
                  Operation::DeleteConfigMap}) {
    EXPECT_EQ(parse_operation(to_string(op)), op);
  }
  for (auto kind : {FaultKind::Http500, FaultKind::DropConnection, FaultKind::Forbidden,
                    FaultKind::Conflict, FaultKind::PullError}) {
    EXPECT_EQ(parse_fault_kind(to_string(kind)), kind);
  }
  EXPECT_EQ(parse_fault_kind("403"), FaultKind::Forbidden);
  EXPECT_EQ(parse_fault_kind("409"), FaultKind::Conflict);
  EXPECT_THROW(parse_operation("patch_job"), std::invalid_argument);
  EXPECT_THROW(parse_fault_kind("timeout"), std::invalid_argument);
}

TEST(FakeCluster, CompletedRunLeavesNothingBehind) {
  auto fake = FakeCluster::start({{"*", {1, 1, 0, "done", {}}}});
  ClusterClient client(fake->cluster_config());
  client.create_configmap(configmap_named("00000008"));
  client.create_job(job_named("00000008"));
  cluster::JobStatus status;
  do {
    status = client.get_job_status("quantum-job-00000008");
  } while (!status.terminal());
  client.get_pod_logs(*status.pod_name);
  client.delete_job("quantum-job-00000008");
  client.delete_configmap("task-files-00000008");
  const auto snap = fake->snapshot();
  EXPECT_TRUE(snap.jobs.empty());
  EXPECT_TRUE(snap.configmaps.empty());
  EXPECT_TRUE(snap.pods.empty());
}

TEST(FakeCluster, DeleteWithoutPropagationOrphansPod) {
  auto fake = FakeCluster::start({});
  ClusterClient client(fake->cluster_config());
  client.create_job(job_named("00000009"));
  auto cli = raw_client(*fake);
  auto res = cli.Delete("/apis/batch/v1/namespaces/default/jobs/quantum-job-00000009");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto snap = fake->snapshot();
  EXPECT_TRUE(snap.jobs.empty());
  ASSERT_EQ(snap.pods.size(), 1u);
  EXPECT_EQ(snap.pods[0].rfind("default/quantum-job-00000009-", 0), 0u);
}

TEST(FakeCluster, RequiresBearerToken) {
  auto fake = FakeCluster::start({});
  auto cli = raw_client(*fake, "wrong");
  auto res = cli.Get("/apis/batch/v1/namespaces/default/jobs/quantum-job-00000000");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 401);
  EXPECT_EQ(json::parse(res->body)["reason"], "Unauthorized");

  auto cfg = fake->cluster_config();
  cfg.credential = cluster::BearerToken{"nope"};
  ClusterClient client(cfg);
  EXPECT_EQ(error_kind_of([&] { client.get_job("x"); }), ApiErrorKind::Unauthorized);
}

TEST(FakeCluster, RejectsStructurallyInvalidJobsWith422) {
  auto fake = FakeCluster::start({});
  auto cli = raw_client(*fake);
  const auto valid = orchestrator::to_json(job_named("0000000a"));

  auto post = [&](const nlohmann::ordered_json &body) {
    auto res = cli.Post("/apis/batch/v1/namespaces/default/jobs", body.dump(), "application/json");
    return res ? res->status : -1;
  };
  auto zero_gpu = valid;
  zero_gpu["spec"]["template"]["spec"]["containers"][0]["resources"]["requests"]["nvidia.com/gpu"] =
      "0";
  auto numeric_gpu = valid;
  numeric_gpu["spec"]["template"]["spec"]["containers"][0]["resources"]["requests"]
             ["nvidia.com/gpu"] = 1;
  auto no_command = valid;
  no_command["spec"]["template"]["spec"]["containers"][0].erase("command");
  auto always = valid;
  always["spec"]["template"]["spec"]["restartPolicy"] = "Always";
  auto dangling_mount = valid;
  dangling_mount["spec"]["template"]["spec"]["volumes"] = json::array();
  auto bad_kind = valid;
  bad_kind["kind"] = "Pod";
  auto bad_name = valid;
  bad_name["metadata"]["name"] = "Quantum_Job";

  for (const auto &body : {zero_gpu, numeric_gpu, no_command, always, dangling_mount, bad_kind,
                           bad_name}) {
    EXPECT_EQ(post(body), 422) << body.dump();
  }
  auto res = cli.Post("/apis/batch/v1/namespaces/default/jobs", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_TRUE(fake->snapshot().jobs.empty());
  EXPECT_EQ(post(valid), 201);

  ClusterClient client(fake->cluster_config());
  auto gpu_zero_job = job_named("0000000b");
  gpu_zero_job.gpu_count = 0;
  EXPECT_EQ(client.create_job(gpu_zero_job), "quantum-job-0000000b");
}

TEST(FakeCluster, LogsUnavailableWhileContainerWaits) {
  auto fake = FakeCluster::start({{"*", {3, 0, 0, "late", {}}}});
  ClusterClient client(fake->cluster_config());
  client.create_job(job_named("0000000c"));
  const auto status = client.get_job_status("quantum-job-0000000c");
  ASSERT_TRUE(status.pod_name.has_value());
  try {
    client.get_pod_logs(*status.pod_name);
    FAIL() << "expected 400";
  } catch (const ApiError &e) {
    EXPECT_EQ(e.kind(), ApiErrorKind::Rejected);
    EXPECT_EQ(e.http_status(), 400);
    EXPECT_NE(std::string(e.what()).find("waiting to start"), std::string::npos);
  }
}

TEST(FakeCluster, NamespacesAreIsolated) {
  auto fake = FakeCluster::start({});
  ClusterClient in_a(fake->cluster_config("team-a"));
  ClusterClient in_b(fake->cluster_config("team-b"));
  in_a.create_job(job_named("0000000d"));
  EXPECT_EQ(error_kind_of([&] { in_b.get_job("quantum-job-0000000d"); }), ApiErrorKind::NotFound);
  EXPECT_EQ(in_a.get_job("quantum-job-0000000d")["metadata"]["namespace"], "team-a");
  EXPECT_EQ(in_b.list_job_pods("quantum-job-0000000d")["items"].size(), 0u);
  EXPECT_EQ(fake->snapshot().jobs, std::vector<std::string>{"team-a/quantum-job-0000000d"});
}

TEST(FakeCluster, RequestLogRecordsMethodAndTargetInOrder) {
  auto fake = FakeCluster::start({});
  ClusterClient client(fake->cluster_config());
  client.create_configmap(configmap_named("0000000e"));
  client.create_job(job_named("0000000e"));
  client.delete_job("quantum-job-0000000e");
  const auto log = fake->snapshot().request_log;
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(log[0], (RequestRecord{"POST", "/api/v1/namespaces/default/configmaps"}));
  EXPECT_EQ(log[1], (RequestRecord{"POST", "/apis/batch/v1/namespaces/default/jobs"}));
  EXPECT_EQ(log[2], (RequestRecord{"DELETE",
                                   "/apis/batch/v1/namespaces/default/jobs/"
                                   "quantum-job-0000000e?propagationPolicy=Background"}));
  EXPECT_EQ(fake->snapshot().count("POST", "/api"), 2u);
}

Snapshot scripted_session() {
  auto fake = FakeCluster::start({{"*", {2, 1, 3, "trace", {}}}});
  fake->inject({Operation::GetJob, 2, FaultKind::Http500});
  ClusterClient client(fake->cluster_config());
  client.create_configmap(configmap_named("12345678"));
  client.create_job(job_named("12345678"));
  for (int i = 0; i < 6; ++i) {
    try {
      client.get_job_status("quantum-job-12345678");
    } catch (const ApiError &) {
    }
  }
  client.delete_job("quantum-job-12345678");
  auto snap = fake->snapshot();
  fake->stop();
  return snap;
}

TEST(FakeCluster, SameScriptAndCallsGiveSameSnapshot) {
  const auto first = scripted_session();
  const auto second = scripted_session();
  EXPECT_EQ(first, second);
  EXPECT_EQ(first.configmaps, std::vector<std::string>{"default/task-files-12345678"});
}

TEST(FakeCluster, ServesConcurrentClients) {
  auto fake = FakeCluster::start({{"*", {1, 1, 0, "", {}}}});
  ClusterClient client(fake->cluster_config());
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      char suffix[9];
      std::snprintf(suffix, sizeof(suffix), "%08x", t);
      client.create_job(job_named(suffix));
      for (int i = 0; i < 3; ++i) client.get_job_status(std::string("quantum-job-") + suffix);
      client.delete_job(std::string("quantum-job-") + suffix);
    });
  }
  for (auto &th : threads) th.join();
  const auto snap = fake->snapshot();
  EXPECT_TRUE(snap.jobs.empty());
  EXPECT_TRUE(snap.pods.empty());
  EXPECT_EQ(snap.count("POST", "/apis/batch/v1/"), 8u);
  EXPECT_EQ(snap.count("DELETE", "/apis/batch/v1/"), 8u);
}

TEST(FakeCluster, StopReleasesPortAndRestartIsIdempotent) {
  FakeCluster fake;
  fake.start();
  fake.start();
  EXPECT_TRUE(fake.running());
  EXPECT_GT(fake.port(), 0);
  fake.stop();
  EXPECT_FALSE(fake.running());
  fake.stop();
}

TEST(FakeCluster, KubeconfigRoundTripsToClusterConfig) {
  auto fake = FakeCluster::start({});
  const auto parsed = cluster::parse_kubeconfig(fake->kubeconfig_yaml("quantum"));
  const auto direct = fake->cluster_config("quantum");
  EXPECT_EQ(parsed.server_url, direct.server_url);
  EXPECT_EQ(parsed.namespace_name, "quantum");
  ASSERT_TRUE(std::holds_alternative<cluster::BearerToken>(parsed.credential));
  EXPECT_EQ(std::get<cluster::BearerToken>(parsed.credential).token, "fake-token");
  ClusterClient client(parsed);
  EXPECT_EQ(client.create_job(job_named("0000000f")), "quantum-job-0000000f");
}

// Shared endpoint fixture: the same steps can be pointed at a real cluster by
// hand; here they pin the fake's status codes and response shapes.
TEST(FakeCluster, MatchesConformanceFixture) {
  std::ifstream in(std::string(Q8S_SOURCE_DIR) + "/tests/fixtures/conformance/steps.json");
  ASSERT_TRUE(in) << "missing conformance fixture";
  const auto fixture = json::parse(in);
  const std::string job = fixture["job"];
  const std::string cm = fixture["configmap"];
  const std::string suffix = job.substr(orchestrator::kJobNamePrefix.size());

  auto fake = FakeCluster::start({});
  auto cli = raw_client(*fake);
  const std::string jobs = "/apis/batch/v1/namespaces/default/jobs";
  const std::string cms = "/api/v1/namespaces/default/configmaps";
  auto invalid = orchestrator::to_json(job_named(suffix));
  invalid["spec"]["template"]["spec"].erase("restartPolicy");

  for (const auto &step : fixture["steps"]) {
    const std::string op = step["op"];
    httplib::Result res;
    if (op == "create_configmap") {
      res = cli.Post(cms, orchestrator::to_json(configmap_named(suffix)).dump(), "application/json");
    } else if (op == "create_job") {
      res = cli.Post(jobs, orchestrator::to_json(job_named(suffix)).dump(), "application/json");
    } else if (op == "create_invalid_job") {
      res = cli.Post(jobs, invalid.dump(), "application/json");
    } else if (op == "get_job") {
      res = cli.Get(jobs + "/" + job);
    } else if (op == "get_missing_job") {
      res = cli.Get(jobs + "/quantum-job-ffffffff");
    } else if (op == "list_pods") {
      res = cli.Get("/api/v1/namespaces/default/pods?labelSelector=job-name%3D" + job);
    } else if (op == "delete_job") {
      res = cli.Delete(jobs + "/" + job + "?propagationPolicy=Background");
    } else if (op == "delete_configmap") {
      res = cli.Delete(cms + "/" + cm);
    } else {
      FAIL() << "unknown step " << op;
    }
    ASSERT_TRUE(res) << op;
    EXPECT_EQ(res->status, step["status"].get<int>()) << op;
    EXPECT_EQ(res->get_header_value("Content-Type"), "application/json") << op;
    const auto body = json::parse(res->body);
    for (const auto &key : step["keys"]) {
      EXPECT_TRUE(body.contains(key.get<std::string>())) << op << " missing " << key;
    }
    if (step.contains("kind")) {
      EXPECT_EQ(body["kind"], step["kind"]) << op;
    }
    if (step.contains("reason")) {
      EXPECT_EQ(body["reason"], step["reason"]) << op;
    }
    if (body["kind"] == "Status" && res->status >= 400) {
      EXPECT_EQ(body["code"], res->status) << op;
      EXPECT_EQ(body["status"], "Failure") << op;
    }
    if (op == "list_pods") {
      ASSERT_EQ(body["items"].size(), 1u);
      EXPECT_EQ(body["items"][0]["metadata"]["labels"]["job-name"], job);
      EXPECT_EQ(body["items"][0]["status"]["containerStatuses"][0]["name"], "quantum-task");
    }
  }
  const auto snap = fake->snapshot();
  EXPECT_TRUE(snap.jobs.empty());
  EXPECT_TRUE(snap.configmaps.empty());
  EXPECT_TRUE(snap.pods.empty());
}

TEST(FakeCluster, UnknownPathsGetStatusBodies) {
  auto fake = FakeCluster::start({});
  auto cli = raw_client(*fake);
  auto res = cli.Get("/apis/apps/v1/namespaces/default/deployments");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["kind"], "Status");
}

}  // namespace
}  // namespace q8s::fake
