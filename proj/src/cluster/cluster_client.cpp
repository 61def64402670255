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

#include "q8s/cluster/cluster_client.hpp"

#include <openssl/pem.h>
#include <openssl/x509.h>

#include <memory>

#include "httplib.h"

namespace q8s::cluster {

namespace {

constexpr const char *kUserAgent = "q8s-kernel/0.1";

void require_dns_label(std::string_view name, const char *what) {
  if (!is_dns_label(name)) {
    throw std::invalid_argument(std::string(what) + " '" + std::string(name) +
                                "' is not a DNS label");
  }
}

ApiErrorKind classify(int status) {
  if (status == 401 || status == 403) return ApiErrorKind::Unauthorized;
  if (status == 404) return ApiErrorKind::NotFound;
  if (status == 409) return ApiErrorKind::Conflict;
  if (status == 429 || status >= 500) return ApiErrorKind::Unavailable;
  return ApiErrorKind::Rejected;
}

// The `message` of a metav1.Status body, else the raw (truncated) body.
std::string server_message(const std::string &body) {
  try {
    const auto j = nlohmann::json::parse(body);
    if (j.is_object() && j.contains("message") && j["message"].is_string()) {
      return j["message"].get<std::string>();
    }
  } catch (const nlohmann::json::exception &) {
  }
  return body.size() > 512 ? body.substr(0, 512) + "..." : body;
}

struct X509Deleter {
  void operator()(X509 *p) const { X509_free(p); }
};
struct PkeyDeleter {
  void operator()(EVP_PKEY *p) const { EVP_PKEY_free(p); }
};
struct BioDeleter {
  void operator()(BIO *p) const { BIO_free(p); }
};

std::unique_ptr<BIO, BioDeleter> memory_bio(const std::string &pem) {
  return std::unique_ptr<BIO, BioDeleter>(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
}

std::unique_ptr<httplib::ClientImpl> make_http_client(const ClusterConfig &cfg, const ServerUrl &url) {
  if (url.scheme == "http") {
    return std::make_unique<httplib::ClientImpl>(url.host, url.port);
  }
  std::unique_ptr<httplib::SSLClient> client;
  if (const auto *cert = std::get_if<ClientCertificate>(&cfg.credential)) {
    auto cert_bio = memory_bio(cert->certificate_pem);
    auto key_bio = memory_bio(cert->key_pem);
    std::unique_ptr<X509, X509Deleter> x509(
        PEM_read_bio_X509(cert_bio.get(), nullptr, nullptr, nullptr));
    std::unique_ptr<EVP_PKEY, PkeyDeleter> pkey(
        PEM_read_bio_PrivateKey(key_bio.get(), nullptr, nullptr, nullptr));
    if (!x509 || !pkey) {
      throw ApiError(ApiErrorKind::Unauthorized, 0, "client certificate or key is not valid PEM");
    }
    // SSLClient takes its own references.
    client = std::make_unique<httplib::SSLClient>(url.host, url.port, x509.get(), pkey.get());
  } else {
    client = std::make_unique<httplib::SSLClient>(url.host, url.port);
  }
  if (cfg.ca_bundle) {
    client->load_ca_cert_store(cfg.ca_bundle->data(), cfg.ca_bundle->size());
  }
  client->enable_server_certificate_verification(!(cfg.insecure_skip_tls_verify && url.is_loopback()));
  return client;
}

const nlohmann::json *find_condition(const nlohmann::json &status, std::string_view type) {
  if (!status.contains("conditions") || !status["conditions"].is_array()) {
    return nullptr;
  }
  for (const auto &c : status["conditions"]) {
    if (c.value("type", "") == type && c.value("status", "") == "True") {
      return &c;
    }
  }
  return nullptr;
}

// Most recently created pod; ties broken by name.
const nlohmann::json *latest_pod(const nlohmann::json &pods) {
  if (!pods.contains("items") || !pods["items"].is_array()) {
    return nullptr;
  }
  const nlohmann::json *best = nullptr;
  auto key = [](const nlohmann::json &p) {
    const auto &md = p.value("metadata", nlohmann::json::object());
    return std::make_pair(md.value("creationTimestamp", ""), md.value("name", ""));
  };
  for (const auto &pod : pods["items"]) {
    if (best == nullptr || key(*best) < key(pod)) {
      best = &pod;
    }
  }
  return best;
}

const nlohmann::json *task_container_status(const nlohmann::json &pod) {
  const auto status = pod.find("status");
  if (status == pod.end() || !status->contains("containerStatuses")) {
    return nullptr;
  }
  const auto &statuses = (*status)["containerStatuses"];
  if (!statuses.is_array() || statuses.empty()) {
    return nullptr;
  }
  for (const auto &cs : statuses) {
    if (cs.value("name", "") == orchestrator::kContainerName) {
      return &cs;
    }
  }
  return &statuses.front();
}

}  // namespace

std::string_view to_string(ApiErrorKind kind) {
  switch (kind) {
    case ApiErrorKind::Unauthorized: return "Unauthorized";
    case ApiErrorKind::NotFound: return "NotFound";
    case ApiErrorKind::Conflict: return "Conflict";
    case ApiErrorKind::Unavailable: return "ApiUnavailable";
    case ApiErrorKind::Rejected: return "Rejected";
  }
  return "Unknown";
}

std::string_view to_string(JobPhase phase) {
  switch (phase) {
    case JobPhase::Pending: return "Pending";
    case JobPhase::Active: return "Active";
    case JobPhase::Succeeded: return "Succeeded";
    case JobPhase::Failed: return "Failed";
  }
  return "Unknown";
}

bool JobStatus::image_pull_failed() const {
  return waiting_reason == "ErrImagePull" || waiting_reason == "ImagePullBackOff" ||
         waiting_reason == "InvalidImageName";
}

JobStatus derive_job_status(const nlohmann::json &job, const nlohmann::json *pods) {
  JobStatus out;
  const auto status = job.value("status", nlohmann::json::object());
  if (find_condition(status, "Complete") != nullptr) {
    out.phase = JobPhase::Succeeded;
  } else if (find_condition(status, "Failed") != nullptr) {
    out.phase = JobPhase::Failed;
  } else {
    const int active = status.value("active", 0);
    const bool ready_known = status.contains("ready");
    const int ready = status.value("ready", 0);
    out.phase = (active > 0 && (!ready_known || ready > 0)) ? JobPhase::Active : JobPhase::Pending;
  }

  const nlohmann::json *pod = pods ? latest_pod(*pods) : nullptr;
  if (pod != nullptr) {
    out.pod_name = pod->value("metadata", nlohmann::json::object()).value("name", "");
    if (const auto *cs = task_container_status(*pod)) {
      const auto state = cs->value("state", nlohmann::json::object());
      if (state.contains("terminated")) {
        out.exit_code = state["terminated"].value("exitCode", 1);
      } else if (state.contains("waiting")) {
        out.waiting_reason = state["waiting"].value("reason", "");
      }
    }
  }

  if (out.phase == JobPhase::Succeeded) {
    out.exit_code = 0;
  } else if (out.phase == JobPhase::Failed) {
    // Failed without a terminated container (deleted pod, deadline): report
    // a generic failure code.
    if (!out.exit_code || *out.exit_code == 0) out.exit_code = 1;
  } else {
    out.exit_code.reset();
  }
  return out;
}

ClusterClient::ClusterClient(ClusterConfig cfg, Timeouts timeouts)
    : cfg_(std::move(cfg)), url_(parse_server_url(cfg_.server_url)), timeouts_(timeouts) {
  validate(cfg_);
}

std::string ClusterClient::jobs_path() const {
  return url_.base_path + "/apis/batch/v1/namespaces/" + cfg_.namespace_name + "/jobs";
}

std::string ClusterClient::job_path(std::string_view name) const {
  require_dns_label(name, "job name");
  return jobs_path() + "/" + std::string(name);
}

std::string ClusterClient::configmaps_path() const {
  return url_.base_path + "/api/v1/namespaces/" + cfg_.namespace_name + "/configmaps";
}

std::string ClusterClient::configmap_path(std::string_view name) const {
  require_dns_label(name, "configmap name");
  return configmaps_path() + "/" + std::string(name);
}

std::string ClusterClient::pods_for_job_path(std::string_view job_name) const {
  require_dns_label(job_name, "job name");
  return url_.base_path + "/api/v1/namespaces/" + cfg_.namespace_name +
         "/pods?labelSelector=job-name%3D" + std::string(job_name);
}

std::string ClusterClient::pod_log_path(std::string_view pod) const {
  require_dns_label(pod, "pod name");
  return url_.base_path + "/api/v1/namespaces/" + cfg_.namespace_name + "/pods/" +
         std::string(pod) + "/log";
}

ClusterClient::Response ClusterClient::send(Method method, const std::string &path,
                                            const std::string &body) const {
  auto client = make_http_client(cfg_, url_);
  client->set_connection_timeout(timeouts_.connect);
  client->set_read_timeout(timeouts_.request);
  client->set_write_timeout(timeouts_.request);
  client->set_keep_alive(false);

  httplib::Headers headers{{"Accept", "application/json"}, {"User-Agent", kUserAgent}};
  if (const auto *bearer = std::get_if<BearerToken>(&cfg_.credential)) {
    headers.emplace("Authorization", "Bearer " + bearer->token);
  }

  const char *verb = "GET";
  httplib::Result res;
  switch (method) {
    case Method::Get:
      res = client->Get(path, headers);
      break;
    case Method::Post:
      verb = "POST";
      res = client->Post(path, headers, body, "application/json");
      break;
    case Method::Delete:
      verb = "DELETE";
      res = client->Delete(path, headers);
      break;
  }
  if (!res) {
    throw ApiError(ApiErrorKind::Unavailable, 0,
                   std::string(verb) + " " + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ApiError(classify(res->status), res->status,
                   std::string(verb) + " " + path + ": HTTP " + std::to_string(res->status) +
                       ": " + server_message(res->body));
  }
  return Response{res->status, std::move(res->body)};
}

std::string ClusterClient::post_json(const std::string &path,
                                     const nlohmann::ordered_json &body) const {
  const auto res = send(Method::Post, path, body.dump());
  try {
    return nlohmann::json::parse(res.body).at("metadata").at("name").get<std::string>();
  } catch (const nlohmann::json::exception &) {
    throw ApiError(ApiErrorKind::Unavailable, res.status,
                   "POST " + path + ": response has no metadata.name");
  }
}

std::string ClusterClient::create_job(const orchestrator::JobManifest &job) const {
  require_dns_label(job.name, "job name");
  return post_json(jobs_path(), orchestrator::to_json(job));
}

std::string ClusterClient::create_configmap(const orchestrator::ConfigMapManifest &cm) const {
  require_dns_label(cm.name, "configmap name");
  return post_json(configmaps_path(), orchestrator::to_json(cm));
}

nlohmann::json ClusterClient::get_job(std::string_view job_name) const {
  const auto path = job_path(job_name);
  const auto res = send(Method::Get, path);
  try {
    return nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::exception &) {
    throw ApiError(ApiErrorKind::Unavailable, res.status, "GET " + path + ": invalid JSON");
  }
}

nlohmann::json ClusterClient::list_job_pods(std::string_view job_name) const {
  const auto path = pods_for_job_path(job_name);
  const auto res = send(Method::Get, path);
  try {
    return nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::exception &) {
    throw ApiError(ApiErrorKind::Unavailable, res.status, "GET " + path + ": invalid JSON");
  }
}

JobStatus ClusterClient::get_job_status(std::string_view job_name) const {
  const auto job = get_job(job_name);
  auto status = derive_job_status(job, nullptr);
  if (status.phase == JobPhase::Active) {
    return status;
  }
  const auto pods = list_job_pods(job_name);
  return derive_job_status(job, &pods);
}

std::string ClusterClient::get_pod_logs(std::string_view pod_name) const {
  return send(Method::Get, pod_log_path(pod_name)).body;
}

void ClusterClient::delete_job(std::string_view job_name) const {
  send(Method::Delete, job_path(job_name) + "?propagationPolicy=Background");
}

void ClusterClient::delete_configmap(std::string_view name) const {
  send(Method::Delete, configmap_path(name));
}

}  // namespace q8s::cluster
