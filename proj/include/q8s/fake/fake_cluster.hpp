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
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "nlohmann/json.hpp"
#include "q8s/cluster/cluster_config.hpp"

namespace httplib {
class Server;
class Request;
class Response;
}  // namespace httplib

namespace q8s::fake {

// The seven API interactions the client performs.
enum class Operation {
  CreateJob,
  CreateConfigMap,
  GetJob,
  ListPods,
  GetLog,
  DeleteJob,
  DeleteConfigMap,
};

enum class FaultKind {
  Http500,
  DropConnection,  // body cut short; on creates the object is stored first
  Forbidden,       // 403
  Conflict,        // 409
  PullError,       // GetJob only: the pod is stuck in ErrImagePull from then on
};

std::string_view to_string(Operation op);
std::string_view to_string(FaultKind kind);
Operation parse_operation(std::string_view text);  // "create_job", ...
FaultKind parse_fault_kind(std::string_view text);  // "http-500", "drop-connection", ...

// Fires on the `occurrence`-th (1-based) request for `operation`, counted
// server-wide. The faulted request changes no state.
struct Fault {
  Operation operation;
  int occurrence = 1;
  FaultKind kind;
};

// A Job advances one step per status GET: `pending_polls` Pending answers,
// then `running_polls` Active answers, then Succeeded (exit 0) or Failed.
struct LifecycleScript {
  int pending_polls = 0;
  int running_polls = 0;
  int exit_code = 0;
  std::string log_text;
  std::vector<Fault> injected_faults;
};

struct RequestRecord {
  std::string method;
  std::string path;  // includes the query string

  bool operator==(const RequestRecord &) const = default;
};

struct Snapshot {
  std::vector<std::string> jobs;        // "namespace/name", sorted
  std::vector<std::string> configmaps;  // "namespace/name", sorted
  std::vector<std::string> pods;        // "namespace/name", sorted
  std::vector<RequestRecord> request_log;

  // Requests whose method matches and whose path starts with `prefix`.
  std::size_t count(std::string_view method, std::string_view prefix) const;
  std::size_t status_gets(std::string_view job_name, std::string_view ns = "default") const;
  bool operator==(const Snapshot &) const = default;
};

// {"pattern": {"pending_polls": 2, "running_polls": 3, "exit_code": 0,
// "log_text": "...", "injected_faults": [{"operation": "create_job",
// "occurrence": 1, "kind": "http-500"}]}}. Missing fields take their
// defaults. Throws std::invalid_argument.
std::map<std::string, LifecycleScript> parse_scripts(const nlohmann::json &j);

class BindFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// In-process API server answering the client's endpoint subset on an
// ephemeral loopback port.
class FakeCluster {
 public:
  // Keys are job-name glob patterns (`*` wildcard); the longest matching
  // pattern wins and unmatched jobs run LifecycleScript{}. Throws
  // std::invalid_argument for faults with non-positive occurrences or
  // pull-error on anything but GetJob.
  explicit FakeCluster(std::map<std::string, LifecycleScript> scripts = {},
                       std::string bearer_token = "fake-token");
  ~FakeCluster();
  FakeCluster(const FakeCluster &) = delete;
  FakeCluster &operator=(const FakeCluster &) = delete;

  // Convenience: construct and start.
  static std::unique_ptr<FakeCluster> start(std::map<std::string, LifecycleScript> scripts);

  void start();  // throws BindFailed
  void stop();
  bool running() const;

  std::uint16_t port() const { return port_; }
  std::string url() const;

  void inject(Fault fault);
  Snapshot snapshot() const;

  // Client configuration and kubeconfig text pointing at this server.
  cluster::ClusterConfig cluster_config(std::string ns = "default") const;
  std::string kubeconfig_yaml(std::string ns = "default") const;

 private:
  struct Pod {
    std::string ns;
    std::string name;
    std::string job_name;
    std::string image;
    int creation_index = 0;
  };
  struct Job {
    std::string ns;
    std::string name;
    nlohmann::json manifest;
    LifecycleScript script;
    int observations = 0;
    bool pull_error = false;
    int creation_index = 0;
  };
  enum class Stage { Pending, Active, Succeeded, Failed };

  void install_routes();
  bool apply_fault(Operation op, httplib::Response &res, bool *drop_after = nullptr);
  bool authorized(const httplib::Request &req, httplib::Response &res) const;
  const LifecycleScript &script_for(const std::string &job_name) const;
  Stage stage_of(const Job &job) const;
  nlohmann::json job_json(const Job &job) const;
  nlohmann::json pod_json(const Pod &pod) const;
  std::string timestamp(int index) const;

  std::map<std::string, LifecycleScript> scripts_;
  std::string token_;
  std::unique_ptr<httplib::Server> server_;
  std::thread listener_;
  std::uint16_t port_ = 0;

  mutable std::mutex mu_;
  std::vector<Fault> faults_;
  std::map<Operation, int> op_counts_;
  std::map<std::string, Job> jobs_;  // key: ns/name
  std::map<std::string, std::map<std::string, std::string>> configmaps_;
  std::map<std::string, Pod> pods_;
  std::vector<RequestRecord> request_log_;
  int creations_ = 0;
};

}  // namespace q8s::fake
