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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>

#include "nlohmann/json.hpp"
#include "q8s/deps/dependency_analyzer.hpp"
#include "q8s/kernel/connection_info.hpp"
#include "q8s/kernel/message.hpp"
#include "q8s/kernel/zmtp.hpp"
#include "q8s/orchestrator/orchestrator.hpp"

namespace q8s::kernel {

inline constexpr std::string_view kImplementation = "q8s_kernel";
inline constexpr std::string_view kImplementationVersion = "0.1.0";
inline constexpr std::string_view kDisplayName = "Python Q8s kernel";
inline constexpr std::string_view kKernelSpecName = "q8s";

// Starts one cell execution; typically wraps Orchestrator::start.
using Launcher =
    std::function<std::shared_ptr<orchestrator::RunHandle>(const deps::CellSource &cell)>;
using LogSink = std::function<void(std::string_view line)>;

// Serves the shell, control, iopub, stdin and heartbeat channels. Cells run
// one at a time in receipt order; interrupts abort the cell in flight.
class KernelServer {
 public:
  KernelServer(ConnectionInfo info, Launcher launcher, LogSink log = {});
  ~KernelServer();
  KernelServer(const KernelServer &) = delete;
  KernelServer &operator=(const KernelServer &) = delete;

  // Binds all five channels; zero ports are replaced by the bound ones.
  // Throws zmtp::BindFailed.
  void start();
  const ConnectionInfo &connection() const { return info_; }

  // Blocks until a shutdown request arrives or stop() is called.
  void wait();
  // As wait(); false if `limit` passes first.
  bool wait_for(std::chrono::milliseconds limit);
  // Aborts the cell in flight, if any.
  void interrupt();
  void stop();

  int execution_count() const { return execution_count_; }
  int dropped_messages() const { return dropped_; }

 private:
  void shell_loop();
  void control_loop();
  void heartbeat_loop();

  void handle(zmtp::Socket &socket, const Message &request);
  void execute(zmtp::Socket &socket, const Message &request);
  void reply(zmtp::Socket &socket, const Message &request, nlohmann::json content);
  void publish(const Message &parent, std::string_view msg_type, nlohmann::json content);
  void publish_status(const Message &parent, std::string_view state);
  void shutdown_requested();
  std::optional<Message> receive(zmtp::Socket &socket);

  ConnectionInfo info_;
  Launcher launcher_;
  LogSink log_;
  Signer signer_;
  std::string session_;

  zmtp::Socket shell_{zmtp::SocketType::Router};
  zmtp::Socket control_{zmtp::SocketType::Router};
  zmtp::Socket stdin_{zmtp::SocketType::Router};
  zmtp::Socket iopub_{zmtp::SocketType::Pub};
  zmtp::Socket hb_{zmtp::SocketType::Rep};

  std::thread shell_thread_;
  std::thread control_thread_;
  std::thread hb_thread_;

  std::mutex iopub_mu_;
  std::mutex run_mu_;
  std::shared_ptr<orchestrator::RunHandle> current_run_;

  std::atomic<bool> stopping_{false};
  std::mutex stop_mu_;
  std::condition_variable stop_cv_;
  bool started_ = false;

  std::atomic<int> execution_count_{0};
  std::atomic<int> dropped_{0};
};

// Kernel-spec registration document launching `binary` in kernel mode.
nlohmann::json kernel_spec_json(const std::string &binary);

}  // namespace q8s::kernel
