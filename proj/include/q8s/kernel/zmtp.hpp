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

// A small ZMTP 3.0 implementation (NULL security) covering the socket
// pairs a notebook kernel needs: ROUTER/DEALER, PUB/SUB and REP/REQ over
// TCP. Interoperates with libzmq peers.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace q8s::kernel::zmtp {

enum class SocketType { Router, Dealer, Pub, Sub, Rep, Req };

std::string_view to_string(SocketType type);
bool compatible(SocketType self, SocketType peer);

using Multipart = std::vector<std::string>;

class BindFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wire helpers, exposed for tests.
std::string encode_greeting(bool as_server);
std::string encode_frame(std::string_view body, bool more, bool command);
std::string encode_ready(SocketType type, std::string_view identity);

class Socket {
 public:
  explicit Socket(SocketType type, std::string identity = {});
  ~Socket();
  Socket(const Socket &) = delete;
  Socket &operator=(const Socket &) = delete;

  SocketType type() const { return type_; }

  // Port 0 picks an ephemeral port. Returns the bound port.
  std::uint16_t bind(const std::string &ip, std::uint16_t port);
  // Blocks until the handshake with the peer completes.
  void connect(const std::string &host, std::uint16_t port,
               std::chrono::milliseconds timeout = std::chrono::seconds(5));

  // ROUTER: the first frame names the destination peer; unknown peers are
  // dropped. PUB: delivered to every peer with a matching subscription.
  // REP: answers the most recently received request.
  void send(Multipart msg);

  // ROUTER: the first frame is the sending peer's identity.
  std::optional<Multipart> recv(std::chrono::milliseconds timeout);

  // SUB only.
  void subscribe(std::string prefix);

  std::size_t peer_count() const;
  void close();

 private:
  struct Peer;
  struct Incoming {
    std::shared_ptr<Peer> peer;
    Multipart frames;
  };

  void accept_loop();
  void start_peer(int fd, bool as_server);
  void handshake(Peer &peer);
  void read_loop(std::shared_ptr<Peer> peer);
  void on_message(const std::shared_ptr<Peer> &peer, Multipart frames);
  void on_command(Peer &peer, std::string_view name, std::string_view body);
  void write(Peer &peer, const Multipart &msg);
  std::vector<std::shared_ptr<Peer>> live_peers() const;
  void reap();

  SocketType type_;
  std::string identity_;
  std::atomic<bool> closed_{false};
  int listen_fd_ = -1;
  std::thread acceptor_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::shared_ptr<Peer>> peers_;
  std::deque<Incoming> inbox_;
  std::vector<std::string> subscriptions_;  // SUB side
  std::uint32_t next_identity_ = 0;

  std::mutex rep_mu_;
  std::shared_ptr<Peer> rep_peer_;
  Multipart rep_envelope_;
};

}  // namespace q8s::kernel::zmtp
