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

#include "q8s/kernel/kernel_server.hpp"

#include <iostream>

namespace q8s::kernel {

using namespace std::chrono_literals;
using nlohmann::json;
using orchestrator::TerminalPhase;

namespace {

constexpr auto kPollSlice = 100ms;

std::string reply_type(const std::string &request_type) {
  const std::string suffix = "_request";
  if (request_type.size() > suffix.size() &&
      request_type.compare(request_type.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return request_type.substr(0, request_type.size() - suffix.size()) + "_reply";
  }
  return request_type + "_reply";
}

json kernel_info_content() {
  return {{"status", "ok"},
          {"protocol_version", kProtocolVersion},
          {"implementation", kImplementation},
          {"implementation_version", kImplementationVersion},
          {"language_info",
           {{"name", "python"},
            {"version", "3"},
            {"mimetype", "text/x-python"},
            {"file_extension", ".py"},
            {"pygments_lexer", "ipython3"},
            {"codemirror_mode", {{"name", "ipython"}, {"version", 3}}},
            {"nbconvert_exporter", "python"}}},
          {"banner", std::string(kDisplayName) +
                         ": each cell runs as a Kubernetes Job; variables do not persist "
                         "between cells."},
          {"help_links", json::array()},
          {"debugger", false}};
}

struct ErrorInfo {
  std::string ename;
  std::string evalue;
};

ErrorInfo describe_failure(const orchestrator::ExecutionResult &r) {
  switch (r.phase) {
    case TerminalPhase::Failed:
      return {"RemoteExecutionError",
              "job " + r.job_name + " exited with code " + std::to_string(r.exit_code.value_or(1))};
    case TerminalPhase::TimedOut:
      return {"TimeoutError", r.diagnostic};
    case TerminalPhase::Aborted:
      return {"Aborted", r.diagnostic.empty() ? "execution aborted by user" : r.diagnostic};
    case TerminalPhase::InfraError:
      return {"InfrastructureError",
              std::string(orchestrator::to_string(
                  r.failed_state.value_or(orchestrator::ExecutionState::Preparing))) +
                  ": " + r.diagnostic};
    case TerminalPhase::Succeeded:
      break;
  }
  return {"", ""};
}

}  // namespace

KernelServer::KernelServer(ConnectionInfo info, Launcher launcher, LogSink log)
    : info_(std::move(info)),
      launcher_(std::move(launcher)),
      log_(log ? std::move(log) : [](std::string_view line) { std::cerr << line << '\n'; }),
      signer_(info_.key),
      session_(new_msg_id()) {}

KernelServer::~KernelServer() { stop(); }

void KernelServer::start() {
  if (info_.key.empty()) throw ConnectionError("signing key is empty");
  if (info_.signature_scheme != "hmac-sha256") {
    throw ConnectionError("unsupported signature scheme '" + info_.signature_scheme + "'");
  }
  info_.shell_port = shell_.bind(info_.ip, info_.shell_port);
  info_.iopub_port = iopub_.bind(info_.ip, info_.iopub_port);
  info_.stdin_port = stdin_.bind(info_.ip, info_.stdin_port);
  info_.control_port = control_.bind(info_.ip, info_.control_port);
  info_.hb_port = hb_.bind(info_.ip, info_.hb_port);
  started_ = true;
  hb_thread_ = std::thread([this] { heartbeat_loop(); });
  control_thread_ = std::thread([this] { control_loop(); });
  shell_thread_ = std::thread([this] { shell_loop(); });
  Message none;
  publish_status(none, "starting");
}

void KernelServer::wait() {
  std::unique_lock lock(stop_mu_);
  stop_cv_.wait(lock, [&] { return stopping_.load(); });
}

bool KernelServer::wait_for(std::chrono::milliseconds limit) {
  std::unique_lock lock(stop_mu_);
  return stop_cv_.wait_for(lock, limit, [&] { return stopping_.load(); });
}

void KernelServer::interrupt() {
  std::lock_guard lock(run_mu_);
  if (current_run_) current_run_->abort();
}

void KernelServer::stop() {
  {
    std::lock_guard lock(stop_mu_);
    stopping_ = true;
    stop_cv_.notify_all();
  }
  interrupt();
  for (auto *t : {&shell_thread_, &control_thread_, &hb_thread_}) {
    if (t->joinable() && t->get_id() != std::this_thread::get_id()) t->join();
  }
  for (auto *s : {&shell_, &control_, &stdin_, &iopub_, &hb_}) s->close();
}

void KernelServer::shutdown_requested() {
  std::lock_guard lock(stop_mu_);
  stopping_ = true;
  stop_cv_.notify_all();
}

std::optional<Message> KernelServer::receive(zmtp::Socket &socket) {
  auto frames = socket.recv(kPollSlice);
  if (!frames) return std::nullopt;
  try {
    return decode(*frames, signer_);
  } catch (const SignatureInvalid &) {
    ++dropped_;
    log_("dropped message with invalid signature");
  } catch (const MalformedMessage &e) {
    ++dropped_;
    log_(std::string("dropped malformed message: ") + e.what());
  }
  return std::nullopt;
}

void KernelServer::heartbeat_loop() {
  while (!stopping_) {
    if (auto frames = hb_.recv(kPollSlice)) hb_.send(std::move(*frames));
  }
}

void KernelServer::shell_loop() {
  while (!stopping_) {
    if (auto msg = receive(shell_)) handle(shell_, *msg);
  }
}

void KernelServer::control_loop() {
  while (!stopping_) {
    if (auto msg = receive(control_)) handle(control_, *msg);
  }
}

void KernelServer::publish(const Message &parent, std::string_view msg_type, json content) {
  Message m;
  m.header = make_header(msg_type, session_);
  m.parent_header = parent.header;
  m.content = std::move(content);
  m.identities = {"kernel." + session_ + "." + std::string(msg_type)};
  std::lock_guard lock(iopub_mu_);
  iopub_.send(encode(m, signer_));
}

void KernelServer::publish_status(const Message &parent, std::string_view state) {
  publish(parent, "status", {{"execution_state", state}});
}

void KernelServer::reply(zmtp::Socket &socket, const Message &request, json content) {
  auto m = make_child(request, reply_type(request.msg_type()), session_, std::move(content));
  socket.send(encode(m, signer_));
}

void KernelServer::handle(zmtp::Socket &socket, const Message &request) {
  const auto type = request.msg_type();
  publish_status(request, "busy");
  if (type == "kernel_info_request") {
    reply(socket, request, kernel_info_content());
  } else if (type == "execute_request") {
    execute(socket, request);
  } else if (type == "interrupt_request") {
    interrupt();
    reply(socket, request, {{"status", "ok"}});
  } else if (type == "shutdown_request") {
    interrupt();
    reply(socket, request,
          {{"status", "ok"}, {"restart", request.content.value("restart", false)}});
    publish_status(request, "idle");
    shutdown_requested();
    return;
  } else if (type == "complete_request") {
    const int pos = request.content.value("cursor_pos", 0);
    reply(socket, request,
          {{"status", "ok"}, {"matches", json::array()}, {"cursor_start", pos},
           {"cursor_end", pos}, {"metadata", json::object()}});
  } else if (type == "inspect_request") {
    reply(socket, request,
          {{"status", "ok"}, {"found", false}, {"data", json::object()},
           {"metadata", json::object()}});
  } else if (type == "is_complete_request") {
    reply(socket, request, {{"status", "unknown"}});
  } else if (type == "history_request") {
    reply(socket, request, {{"status", "ok"}, {"history", json::array()}});
  } else if (type == "comm_info_request") {
    reply(socket, request, {{"status", "ok"}, {"comms", json::object()}});
  } else {
    log_("ignoring unsupported message type '" + type + "'");
  }
  publish_status(request, "idle");
}

void KernelServer::execute(zmtp::Socket &socket, const Message &request) {
  const std::string code = request.content.value("code", "");
  const bool silent = request.content.value("silent", false);
  const int count = silent ? execution_count_.load() : ++execution_count_;
  if (!silent) {
    publish(request, "execute_input", {{"code", code}, {"execution_count", count}});
  }

  orchestrator::ExecutionResult result;
  try {
    auto run = launcher_({code, request.header.value("msg_id", "cell")});
    {
      std::lock_guard lock(run_mu_);
      current_run_ = run;
      if (stopping_) run->abort();
    }
    result = run->wait();
    std::lock_guard lock(run_mu_);
    current_run_.reset();
  } catch (const std::exception &e) {
    result.phase = TerminalPhase::InfraError;
    result.failed_state = orchestrator::ExecutionState::Preparing;
    result.diagnostic = e.what();
  }

  if (!silent) {
    if (!result.stdout_text.empty()) {
      publish(request, "stream", {{"name", "stdout"}, {"text", result.stdout_text}});
    }
    if (!result.stderr_text.empty()) {
      publish(request, "stream", {{"name", "stderr"}, {"text", result.stderr_text}});
    }
  }
  if (result.phase == TerminalPhase::Succeeded) {
    reply(socket, request,
          {{"status", "ok"}, {"execution_count", count}, {"user_expressions", json::object()},
           {"payload", json::array()}});
    return;
  }
  const auto err = describe_failure(result);
  const json traceback = json::array({err.ename + ": " + err.evalue});
  if (!silent) {
    publish(request, "error", {{"ename", err.ename}, {"evalue", err.evalue}, {"traceback", traceback}});
  }
  reply(socket, request,
        {{"status", "error"}, {"execution_count", count}, {"ename", err.ename},
         {"evalue", err.evalue}, {"traceback", traceback}});
}

json kernel_spec_json(const std::string &binary) {
  return {{"argv", json::array({binary, "kernel", "-f", "{connection_file}"})},
          {"display_name", kDisplayName},
          {"language", "python"},
          {"interrupt_mode", "message"},
          {"metadata", {{"debugger", false}}}};
}

}  // namespace q8s::kernel
