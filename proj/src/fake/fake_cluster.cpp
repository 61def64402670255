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

#include <algorithm>
#include <cstdio>

#include "httplib.h"
#include "q8s/common/crypto.hpp"
#include "q8s/orchestrator/manifests.hpp"

namespace q8s::fake {

namespace {

using nlohmann::json;

std::string key_of(const std::string &ns, const std::string &name) { return ns + "/" + name; }

bool glob_match(std::string_view pattern, std::string_view text) {
  if (pattern.empty()) return text.empty();
  if (pattern.front() == '*') {
    for (std::size_t i = 0; i <= text.size(); ++i) {
      if (glob_match(pattern.substr(1), text.substr(i))) return true;
    }
    return false;
  }
  return !text.empty() && pattern.front() == text.front() &&
         glob_match(pattern.substr(1), text.substr(1));
}

json status_body(int code, std::string_view reason, const std::string &message) {
  return json{{"kind", "Status"},       {"apiVersion", "v1"},   {"metadata", json::object()},
              {"status", "Failure"},    {"message", message}, {"reason", reason},
              {"code", code}};
}

void reply_status(httplib::Response &res, int code, std::string_view reason,
                  const std::string &message) {
  res.status = code;
  res.set_content(status_body(code, reason, message).dump(), "application/json");
}

void reply_json(httplib::Response &res, int code, const json &body) {
  res.status = code;
  res.set_content(body.dump(), "application/json");
}

void drop_response(httplib::Response &res) {
  res.status = 200;
  res.body.clear();
  res.headers.clear();
  res.set_content_provider(64, "application/json",
                           [](std::size_t, std::size_t, httplib::DataSink &) { return false; });
}

// Pod name suffix from the job name, so snapshots are reproducible.
std::string pod_suffix(const std::string &job_name) {
  static constexpr char kAlphabet[] = "bcdfghjklmnpqrstvwxz2456789";
  std::uint32_t h = 2166136261u;
  for (char c : job_name) {
    h = (h ^ static_cast<unsigned char>(c)) * 16777619u;
  }
  std::string out;
  for (int i = 0; i < 5; ++i) {
    out.push_back(kAlphabet[h % 27]);
    h /= 27;
  }
  return out;
}

// Structural checks mirroring what the API server would reject with 422.
std::string validate_job(const json &body) {
  if (body.value("apiVersion", "") != "batch/v1") return "apiVersion must be batch/v1";
  if (body.value("kind", "") != "Job") return "kind must be Job";
  const auto name = body.value("/metadata/name"_json_pointer, std::string());
  if (!orchestrator::is_dns_label(name)) return "metadata.name must be a DNS label";
  const json *spec = nullptr;
  try {
    spec = &body.at("spec").at("template").at("spec");
  } catch (const json::exception &) {
    return "spec.template.spec is required";
  }
  const auto &containers = spec->value("containers", json::array());
  if (!containers.is_array() || containers.empty()) return "at least one container is required";
  const auto &c = containers.front();
  if (c.value("name", "").empty()) return "container name is required";
  if (c.value("image", "").empty()) return "container image is required";
  if (!c.contains("command") || !c["command"].is_array() || c["command"].empty()) {
    return "container command is required";
  }
  for (const auto &arg : c["command"]) {
    if (!arg.is_string()) return "command entries must be strings";
  }
  if (c.contains("resources")) {
    const auto gpu = c["resources"].value("/requests/nvidia.com~1gpu"_json_pointer, json());
    if (!gpu.is_null()) {
      if (!gpu.is_string()) return "resource quantities must be strings";
      if (gpu.get<std::string>() == "0") return "nvidia.com/gpu request must be positive";
    }
  }
  const auto &mounts = c.value("volumeMounts", json::array());
  const auto &volumes = spec->value("volumes", json::array());
  if (!mounts.is_array() || mounts.empty()) return "a volumeMount is required";
  for (const auto &m : mounts) {
    if (m.value("mountPath", "").empty()) return "volumeMounts[].mountPath is required";
    const auto vol = m.value("name", "");
    const bool found = std::any_of(volumes.begin(), volumes.end(), [&](const json &v) {
      return v.value("name", "") == vol && !v.value("/configMap/name"_json_pointer, std::string()).empty();
    });
    if (!found) return "volumeMount '" + vol + "' does not reference a configMap volume";
  }
  const auto policy = spec->value("restartPolicy", "");
  if (policy != "Never" && policy != "OnFailure") return "restartPolicy must be Never or OnFailure";
  return {};
}

std::string validate_configmap(const json &body) {
  if (body.value("apiVersion", "") != "v1") return "apiVersion must be v1";
  if (body.value("kind", "") != "ConfigMap") return "kind must be ConfigMap";
  const auto name = body.value("/metadata/name"_json_pointer, std::string());
  if (!orchestrator::is_dns_label(name)) return "metadata.name must be a DNS label";
  if (!body.contains("data") || !body["data"].is_object()) return "data must be an object";
  for (const auto &[k, v] : body["data"].items()) {
    if (!v.is_string()) return "data values must be strings";
  }
  return {};
}

}  // namespace

std::string_view to_string(Operation op) {
  switch (op) {
    case Operation::CreateJob: return "create_job";
    case Operation::CreateConfigMap: return "create_configmap";
    case Operation::GetJob: return "get_job";
    case Operation::ListPods: return "list_pods";
    case Operation::GetLog: return "get_log";
    case Operation::DeleteJob: return "delete_job";
    case Operation::DeleteConfigMap: return "delete_configmap";
  }
  return "unknown";
}

std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::Http500: return "http-500";
    case FaultKind::DropConnection: return "drop-connection";
    case FaultKind::Forbidden: return "403";
    case FaultKind::Conflict: return "409";
    case FaultKind::PullError: return "pull-error";
  }
  return "unknown";
}

Operation parse_operation(std::string_view text) {
  for (auto op : {Operation::CreateJob, Operation::CreateConfigMap, Operation::GetJob,
                  Operation::ListPods, Operation::GetLog, Operation::DeleteJob,
                  Operation::DeleteConfigMap}) {
    if (to_string(op) == text) return op;
  }
  throw std::invalid_argument("unknown operation '" + std::string(text) + "'");
}

FaultKind parse_fault_kind(std::string_view text) {
  for (auto kind : {FaultKind::Http500, FaultKind::DropConnection, FaultKind::Forbidden,
                    FaultKind::Conflict, FaultKind::PullError}) {
    if (to_string(kind) == text) return kind;
  }
  throw std::invalid_argument("unknown fault kind '" + std::string(text) + "'");
}

std::map<std::string, LifecycleScript> parse_scripts(const nlohmann::json &j) {
  if (!j.is_object()) throw std::invalid_argument("scripts must be a JSON object");
  std::map<std::string, LifecycleScript> out;
  try {
    for (const auto &[pattern, spec] : j.items()) {
      if (!spec.is_object()) throw std::invalid_argument("script '" + pattern + "' is not an object");
      LifecycleScript script;
      script.pending_polls = spec.value("pending_polls", 0);
      script.running_polls = spec.value("running_polls", 0);
      script.exit_code = spec.value("exit_code", 0);
      script.log_text = spec.value("log_text", "");
      if (script.pending_polls < 0 || script.running_polls < 0) {
        throw std::invalid_argument("script '" + pattern + "' has a negative poll count");
      }
      for (const auto &f : spec.value("injected_faults", nlohmann::json::array())) {
        script.injected_faults.push_back({parse_operation(f.at("operation").get<std::string>()),
                                          f.value("occurrence", 1),
                                          parse_fault_kind(f.at("kind").get<std::string>())});
      }
      out.emplace(pattern, std::move(script));
    }
  } catch (const nlohmann::json::exception &e) {
    throw std::invalid_argument(std::string("malformed scripts: ") + e.what());
  }
  return out;
}

std::size_t Snapshot::count(std::string_view method, std::string_view prefix) const {
  return static_cast<std::size_t>(std::count_if(
      request_log.begin(), request_log.end(), [&](const RequestRecord &r) {
        return r.method == method && std::string_view(r.path).substr(0, prefix.size()) == prefix;
      }));
}

std::size_t Snapshot::status_gets(std::string_view job_name, std::string_view ns) const {
  const std::string path = "/apis/batch/v1/namespaces/" + std::string(ns) + "/jobs/" +
                           std::string(job_name);
  return static_cast<std::size_t>(std::count_if(
      request_log.begin(), request_log.end(),
      [&](const RequestRecord &r) { return r.method == "GET" && r.path == path; }));
}

FakeCluster::FakeCluster(std::map<std::string, LifecycleScript> scripts, std::string bearer_token)
    : scripts_(std::move(scripts)), token_(std::move(bearer_token)) {
  for (const auto &[pattern, script] : scripts_) {
    for (const auto &fault : script.injected_faults) {
      inject(fault);
    }
  }
}

FakeCluster::~FakeCluster() { stop(); }

std::unique_ptr<FakeCluster> FakeCluster::start(std::map<std::string, LifecycleScript> scripts) {
  auto fake = std::make_unique<FakeCluster>(std::move(scripts));
  fake->start();
  return fake;
}

void FakeCluster::inject(Fault fault) {
  if (fault.occurrence < 1) {
    throw std::invalid_argument("fault occurrence must be positive");
  }
  if (fault.kind == FaultKind::PullError && fault.operation != Operation::GetJob) {
    throw std::invalid_argument("pull-error faults apply to get_job only");
  }
  std::lock_guard lock(mu_);
  faults_.push_back(fault);
}

void FakeCluster::start() {
  if (server_) {
    return;
  }
  server_ = std::make_unique<httplib::Server>();
  install_routes();
  const int port = server_->bind_to_any_port("127.0.0.1");
  if (port <= 0) {
    server_.reset();
    throw BindFailed("fake cluster could not bind a loopback port");
  }
  port_ = static_cast<std::uint16_t>(port);
  listener_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void FakeCluster::stop() {
  if (!server_) {
    return;
  }
  server_->stop();
  if (listener_.joinable()) {
    listener_.join();
  }
  server_.reset();
}

bool FakeCluster::running() const { return server_ && server_->is_running(); }

std::string FakeCluster::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

cluster::ClusterConfig FakeCluster::cluster_config(std::string ns) const {
  cluster::ClusterConfig cfg;
  cfg.server_url = url();
  cfg.credential = cluster::BearerToken{token_};
  cfg.namespace_name = std::move(ns);
  cfg.context_name = "fake";
  return cfg;
}

std::string FakeCluster::kubeconfig_yaml(std::string ns) const {
  return "apiVersion: v1\n"
         "kind: Config\n"
         "clusters:\n"
         "- name: fake\n"
         "  cluster:\n"
         "    server: " + url() + "\n"
         "users:\n"
         "- name: fake-user\n"
         "  user:\n"
         "    token: " + token_ + "\n"
         "contexts:\n"
         "- name: fake\n"
         "  context:\n"
         "    cluster: fake\n"
         "    user: fake-user\n"
         "    namespace: " + ns + "\n"
         "current-context: fake\n";
}

Snapshot FakeCluster::snapshot() const {
  std::lock_guard lock(mu_);
  Snapshot snap;
  for (const auto &[key, job] : jobs_) snap.jobs.push_back(key);
  for (const auto &[key, cm] : configmaps_) snap.configmaps.push_back(key);
  for (const auto &[key, pod] : pods_) snap.pods.push_back(key);
  snap.request_log = request_log_;
  return snap;
}

const LifecycleScript &FakeCluster::script_for(const std::string &job_name) const {
  static const LifecycleScript kDefault{};
  const LifecycleScript *best = &kDefault;
  std::size_t best_len = 0;
  bool matched = false;
  for (const auto &[pattern, script] : scripts_) {
    if (glob_match(pattern, job_name) && (!matched || pattern.size() > best_len)) {
      best = &script;
      best_len = pattern.size();
      matched = true;
    }
  }
  return *best;
}

FakeCluster::Stage FakeCluster::stage_of(const Job &job) const {
  const int n = job.observations;
  if (job.pull_error || n <= job.script.pending_polls) return Stage::Pending;
  if (n <= job.script.pending_polls + job.script.running_polls) return Stage::Active;
  return job.script.exit_code == 0 ? Stage::Succeeded : Stage::Failed;
}

std::string FakeCluster::timestamp(int index) const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "2024-01-01T00:%02d:%02dZ", (index / 60) % 60, index % 60);
  return buf;
}

json FakeCluster::job_json(const Job &job) const {
  json out = job.manifest;
  out["metadata"]["namespace"] = job.ns;
  out["metadata"]["uid"] = "00000000-0000-0000-0000-" + std::to_string(100000000000 + job.creation_index);
  out["metadata"]["creationTimestamp"] = timestamp(job.creation_index);
  json status = json::object();
  switch (stage_of(job)) {
    case Stage::Pending:
      status = {{"active", 1}, {"ready", 0}};
      break;
    case Stage::Active:
      status = {{"active", 1}, {"ready", 1}};
      break;
    case Stage::Succeeded:
      status = {{"succeeded", 1},
                {"conditions", json::array({{{"type", "Complete"}, {"status", "True"}}})}};
      break;
    case Stage::Failed:
      status = {{"failed", 1},
                {"conditions", json::array({{{"type", "Failed"},
                                             {"status", "True"},
                                             {"reason", "BackoffLimitExceeded"}}})}};
      break;
  }
  out["status"] = status;
  return out;
}

json FakeCluster::pod_json(const Pod &pod) const {
  json state;
  std::string phase = "Pending";
  const auto job_it = jobs_.find(key_of(pod.ns, pod.job_name));
  if (job_it == jobs_.end()) {
    // Orphaned: frozen in its last observable state; report it as done.
    state = {{"terminated", {{"exitCode", 0}, {"reason", "Completed"}}}};
    phase = "Succeeded";
  } else {
    const auto &job = job_it->second;
    switch (stage_of(job)) {
      case Stage::Pending:
        state = {{"waiting", {{"reason", job.pull_error ? "ErrImagePull" : "ContainerCreating"}}}};
        break;
      case Stage::Active:
        state = {{"running", {{"startedAt", timestamp(job.creation_index)}}}};
        phase = "Running";
        break;
      case Stage::Succeeded:
      case Stage::Failed: {
        const int code = job.script.exit_code;
        state = {{"terminated", {{"exitCode", code}, {"reason", code == 0 ? "Completed" : "Error"}}}};
        phase = code == 0 ? "Succeeded" : "Failed";
        break;
      }
    }
  }
  return json{{"apiVersion", "v1"},
              {"kind", "Pod"},
              {"metadata",
               {{"name", pod.name},
                {"namespace", pod.ns},
                {"creationTimestamp", timestamp(pod.creation_index)},
                {"labels", {{"job-name", pod.job_name}}}}},
              {"status",
               {{"phase", phase},
                {"containerStatuses",
                 json::array({{{"name", orchestrator::kContainerName},
                               {"image", pod.image},
                               {"state", state}}})}}}};
}

bool FakeCluster::authorized(const httplib::Request &req, httplib::Response &res) const {
  if (req.get_header_value("Authorization") != "Bearer " + token_) {
    reply_status(res, 401, "Unauthorized", "Unauthorized");
    return false;
  }
  return true;
}

// Caller holds mu_. Returns true when the request was consumed by a fault.
bool FakeCluster::apply_fault(Operation op, httplib::Response &res, bool *drop_after) {
  const int n = ++op_counts_[op];
  for (const auto &fault : faults_) {
    if (fault.operation != op || fault.occurrence != n) {
      continue;
    }
    switch (fault.kind) {
      case FaultKind::Http500:
        reply_status(res, 500, "InternalError", "injected internal error");
        return true;
      case FaultKind::Forbidden:
        reply_status(res, 403, "Forbidden", "injected forbidden");
        return true;
      case FaultKind::Conflict:
        reply_status(res, 409, "AlreadyExists", "injected conflict");
        return true;
      case FaultKind::DropConnection:
        if (drop_after) {
          *drop_after = true;
          return false;
        }
        drop_response(res);
        return true;
      case FaultKind::PullError:
        return false;  // handled by the GetJob route
    }
  }
  return false;
}

void FakeCluster::install_routes() {
  auto &srv = *server_;
  srv.set_keep_alive_max_count(1);

  srv.set_pre_routing_handler([this](const httplib::Request &req, httplib::Response &) {
    std::lock_guard lock(mu_);
    request_log_.push_back({req.method, req.target});
    return httplib::Server::HandlerResponse::Unhandled;
  });

  srv.Post(R"(/apis/batch/v1/namespaces/([a-z0-9-]+)/jobs)",
           [this](const httplib::Request &req, httplib::Response &res) {
             std::lock_guard lock(mu_);
             bool drop = false;
             if (apply_fault(Operation::CreateJob, res, &drop) || !authorized(req, res)) return;
             struct DropGuard {
               bool &drop;
               httplib::Response &res;
               ~DropGuard() {
                 if (drop) drop_response(res);
               }
             } guard{drop, res};
             const std::string ns = req.matches[1];
             json body;
             try {
               body = json::parse(req.body);
             } catch (const json::exception &) {
               return reply_status(res, 400, "BadRequest", "request body is not JSON");
             }
             if (auto err = validate_job(body); !err.empty()) {
               return reply_status(res, 422, "Invalid", "Job is invalid: " + err);
             }
             const std::string name = body["metadata"]["name"];
             const auto key = key_of(ns, name);
             if (jobs_.contains(key)) {
               return reply_status(res, 409, "AlreadyExists",
                                   "jobs.batch \"" + name + "\" already exists");
             }
             Job job{ns, name, body, script_for(name), 0, false, ++creations_};
             Pod pod{ns, name + "-" + pod_suffix(name), name,
                     body["spec"]["template"]["spec"]["containers"][0]["image"], ++creations_};
             pods_[key_of(ns, pod.name)] = pod;
             const auto created = job_json(job);
             jobs_.emplace(key, std::move(job));
             reply_json(res, 201, created);
           });

  srv.Get(R"(/apis/batch/v1/namespaces/([a-z0-9-]+)/jobs/([a-z0-9-]+))",
          [this](const httplib::Request &req, httplib::Response &res) {
            std::lock_guard lock(mu_);
            const int occurrence = op_counts_[Operation::GetJob] + 1;
            if (apply_fault(Operation::GetJob, res) || !authorized(req, res)) return;
            auto it = jobs_.find(key_of(req.matches[1], req.matches[2]));
            if (it == jobs_.end()) {
              return reply_status(res, 404, "NotFound",
                                  "jobs.batch \"" + std::string(req.matches[2]) + "\" not found");
            }
            for (const auto &f : faults_) {
              if (f.kind == FaultKind::PullError && f.occurrence == occurrence) {
                it->second.pull_error = true;
              }
            }
            ++it->second.observations;
            reply_json(res, 200, job_json(it->second));
          });

  srv.Delete(R"(/apis/batch/v1/namespaces/([a-z0-9-]+)/jobs/([a-z0-9-]+))",
             [this](const httplib::Request &req, httplib::Response &res) {
               std::lock_guard lock(mu_);
               if (apply_fault(Operation::DeleteJob, res) || !authorized(req, res)) return;
               const std::string ns = req.matches[1];
               const std::string name = req.matches[2];
               auto it = jobs_.find(key_of(ns, name));
               if (it == jobs_.end()) {
                 return reply_status(res, 404, "NotFound",
                                     "jobs.batch \"" + name + "\" not found");
               }
               const auto policy = req.get_param_value("propagationPolicy");
               const auto deleted = job_json(it->second);
               jobs_.erase(it);
               if (policy == "Background" || policy == "Foreground") {
                 std::erase_if(pods_, [&](const auto &kv) {
                   return kv.second.ns == ns && kv.second.job_name == name;
                 });
               }
               reply_json(res, 200, deleted);
             });

  srv.Post(R"(/api/v1/namespaces/([a-z0-9-]+)/configmaps)",
           [this](const httplib::Request &req, httplib::Response &res) {
             std::lock_guard lock(mu_);
             bool drop = false;
             if (apply_fault(Operation::CreateConfigMap, res, &drop) || !authorized(req, res)) {
               return;
             }
             struct DropGuard {
               bool &drop;
               httplib::Response &res;
               ~DropGuard() {
                 if (drop) drop_response(res);
               }
             } guard{drop, res};
             const std::string ns = req.matches[1];
             json body;
             try {
               body = json::parse(req.body);
             } catch (const json::exception &) {
               return reply_status(res, 400, "BadRequest", "request body is not JSON");
             }
             if (auto err = validate_configmap(body); !err.empty()) {
               return reply_status(res, 422, "Invalid", "ConfigMap is invalid: " + err);
             }
             const std::string name = body["metadata"]["name"];
             const auto key = key_of(ns, name);
             if (configmaps_.contains(key)) {
               return reply_status(res, 409, "AlreadyExists",
                                   "configmaps \"" + name + "\" already exists");
             }
             configmaps_[key] = body["data"].get<std::map<std::string, std::string>>();
             body["metadata"]["namespace"] = ns;
             body["metadata"]["creationTimestamp"] = timestamp(++creations_);
             reply_json(res, 201, body);
           });

  srv.Delete(R"(/api/v1/namespaces/([a-z0-9-]+)/configmaps/([a-z0-9-]+))",
             [this](const httplib::Request &req, httplib::Response &res) {
               std::lock_guard lock(mu_);
               if (apply_fault(Operation::DeleteConfigMap, res) || !authorized(req, res)) return;
               const std::string name = req.matches[2];
               if (configmaps_.erase(key_of(req.matches[1], name)) == 0) {
                 return reply_status(res, 404, "NotFound",
                                     "configmaps \"" + name + "\" not found");
               }
               reply_json(res, 200,
                          json{{"kind", "Status"}, {"apiVersion", "v1"}, {"status", "Success"},
                               {"details", {{"name", name}, {"kind", "configmaps"}}}});
             });

  srv.Get(R"(/api/v1/namespaces/([a-z0-9-]+)/pods)",
          [this](const httplib::Request &req, httplib::Response &res) {
            std::lock_guard lock(mu_);
            if (apply_fault(Operation::ListPods, res) || !authorized(req, res)) return;
            const std::string ns = req.matches[1];
            const auto selector = req.get_param_value("labelSelector");
            const std::string prefix = "job-name=";
            if (selector.rfind(prefix, 0) != 0) {
              return reply_status(res, 400, "BadRequest", "only job-name selectors are supported");
            }
            const auto job_name = selector.substr(prefix.size());
            json items = json::array();
            for (const auto &[key, pod] : pods_) {
              if (pod.ns == ns && pod.job_name == job_name) items.push_back(pod_json(pod));
            }
            reply_json(res, 200,
                       json{{"apiVersion", "v1"},
                            {"kind", "PodList"},
                            {"metadata", json::object()},
                            {"items", items}});
          });

  srv.Get(R"(/api/v1/namespaces/([a-z0-9-]+)/pods/([a-z0-9-]+)/log)",
          [this](const httplib::Request &req, httplib::Response &res) {
            std::lock_guard lock(mu_);
            if (apply_fault(Operation::GetLog, res) || !authorized(req, res)) return;
            const std::string ns = req.matches[1];
            const std::string name = req.matches[2];
            auto it = pods_.find(key_of(ns, name));
            if (it == pods_.end()) {
              return reply_status(res, 404, "NotFound", "pods \"" + name + "\" not found");
            }
            const auto job_it = jobs_.find(key_of(ns, it->second.job_name));
            if (job_it == jobs_.end()) {
              res.status = 200;
              res.set_content("", "text/plain");
              return;
            }
            if (stage_of(job_it->second) == Stage::Pending) {
              return reply_status(res, 400, "BadRequest",
                                  "container \"" + std::string(orchestrator::kContainerName) +
                                      "\" in pod \"" + name + "\" is waiting to start");
            }
            res.status = 200;
            res.set_content(job_it->second.script.log_text, "text/plain");
          });

  srv.set_error_handler([](const httplib::Request &req, httplib::Response &res) {
    if (res.body.empty()) {
      reply_status(res, res.status, res.status == 404 ? "NotFound" : "BadRequest",
                   "the server could not find the requested resource");
    }
  });
}

}  // namespace q8s::fake
