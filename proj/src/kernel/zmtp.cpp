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

#include "q8s/kernel/zmtp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <map>

namespace q8s::kernel::zmtp {

namespace {

constexpr std::size_t kGreetingSize = 64;
constexpr std::uint64_t kMaxFrame = 256ull << 20;
constexpr std::uint8_t kMore = 0x01;
constexpr std::uint8_t kLong = 0x02;
constexpr std::uint8_t kCommand = 0x04;

std::string errno_text() { return std::strerror(errno); }

bool read_exact(int fd, char *buf, std::size_t n) {
  while (n > 0) {
    const ssize_t got = ::recv(fd, buf, n, 0);
    if (got == 0) return false;
    if (got < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    buf += got;
    n -= static_cast<std::size_t>(got);
  }
  return true;
}

bool write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t put = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (put < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(put));
  }
  return true;
}

void set_timeout(int fd, int option, std::chrono::milliseconds t) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(t.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((t.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, option, &tv, sizeof(tv));
}

struct Frame {
  std::uint8_t flags = 0;
  std::string body;
};

bool read_frame(int fd, Frame &out) {
  unsigned char head[9];
  if (!read_exact(fd, reinterpret_cast<char *>(head), 1)) return false;
  out.flags = head[0];
  std::uint64_t size = 0;
  if (out.flags & kLong) {
    if (!read_exact(fd, reinterpret_cast<char *>(head + 1), 8)) return false;
    for (int i = 1; i <= 8; ++i) size = (size << 8) | head[i];
  } else {
    if (!read_exact(fd, reinterpret_cast<char *>(head + 1), 1)) return false;
    size = head[1];
  }
  if (size > kMaxFrame) throw ProtocolError("frame too large");
  out.body.resize(size);
  return size == 0 || read_exact(fd, out.body.data(), size);
}

std::string command_name(std::string_view body) {
  if (body.empty()) return {};
  const auto len = static_cast<unsigned char>(body[0]);
  if (body.size() < 1u + len) throw ProtocolError("truncated command");
  return std::string(body.substr(1, len));
}

std::map<std::string, std::string> parse_properties(std::string_view data) {
  std::map<std::string, std::string> props;
  while (!data.empty()) {
    const auto name_len = static_cast<unsigned char>(data[0]);
    if (data.size() < 1u + name_len + 4) throw ProtocolError("truncated metadata");
    std::string name(data.substr(1, name_len));
    data.remove_prefix(1 + name_len);
    std::uint32_t value_len = 0;
    for (int i = 0; i < 4; ++i) value_len = (value_len << 8) | static_cast<unsigned char>(data[i]);
    data.remove_prefix(4);
    if (data.size() < value_len) throw ProtocolError("truncated metadata value");
    std::transform(name.begin(), name.end(), name.begin(), ::tolower);
    props[name] = std::string(data.substr(0, value_len));
    data.remove_prefix(value_len);
  }
  return props;
}

std::optional<SocketType> parse_socket_type(std::string_view name) {
  for (auto t : {SocketType::Router, SocketType::Dealer, SocketType::Pub, SocketType::Sub,
                 SocketType::Rep, SocketType::Req}) {
    if (to_string(t) == name) return t;
  }
  if (name == "XPUB") return SocketType::Pub;
  if (name == "XSUB") return SocketType::Sub;
  return std::nullopt;
}

}  // namespace

std::string_view to_string(SocketType type) {
  switch (type) {
    case SocketType::Router: return "ROUTER";
    case SocketType::Dealer: return "DEALER";
    case SocketType::Pub: return "PUB";
    case SocketType::Sub: return "SUB";
    case SocketType::Rep: return "REP";
    case SocketType::Req: return "REQ";
  }
  return "";
}

bool compatible(SocketType self, SocketType peer) {
  using T = SocketType;
  switch (self) {
    case T::Router: return peer == T::Dealer || peer == T::Req || peer == T::Router;
    case T::Dealer: return peer == T::Router || peer == T::Rep || peer == T::Dealer;
    case T::Pub: return peer == T::Sub;
    case T::Sub: return peer == T::Pub;
    case T::Rep: return peer == T::Req || peer == T::Dealer;
    case T::Req: return peer == T::Rep || peer == T::Router;
  }
  return false;
}

std::string encode_greeting(bool as_server) {
  std::string g(kGreetingSize, '\0');
  g[0] = static_cast<char>(0xFF);
  g[9] = 0x7F;
  g[10] = 3;  // major
  g[11] = 0;  // minor
  std::memcpy(g.data() + 12, "NULL", 4);
  g[32] = as_server ? 1 : 0;
  return g;
}

std::string encode_frame(std::string_view body, bool more, bool command) {
  std::string out;
  std::uint8_t flags = (more ? kMore : 0) | (command ? kCommand : 0);
  if (body.size() > 255) {
    flags |= kLong;
    out.push_back(static_cast<char>(flags));
    const std::uint64_t n = body.size();
    for (int shift = 56; shift >= 0; shift -= 8) {
      out.push_back(static_cast<char>((n >> shift) & 0xFF));
    }
  } else {
    out.push_back(static_cast<char>(flags));
    out.push_back(static_cast<char>(body.size()));
  }
  out.append(body);
  return out;
}

std::string encode_ready(SocketType type, std::string_view identity) {
  std::string body = "\x05READY";
  auto property = [&](std::string_view name, std::string_view value) {
    body.push_back(static_cast<char>(name.size()));
    body.append(name);
    const auto n = static_cast<std::uint32_t>(value.size());
    for (int shift = 24; shift >= 0; shift -= 8) body.push_back(static_cast<char>((n >> shift) & 0xFF));
    body.append(value);
  };
  property("Socket-Type", to_string(type));
  if (type == SocketType::Router || type == SocketType::Dealer || type == SocketType::Req) {
    property("Identity", identity);
  }
  return encode_frame(body, false, true);
}

struct Socket::Peer {
  int fd = -1;
  std::thread reader;
  std::mutex write_mu;
  std::string identity;
  SocketType type = SocketType::Dealer;
  std::atomic<bool> ready{false};
  std::atomic<bool> dead{false};
  std::mutex sub_mu;
  std::vector<std::string> subscriptions;  // PUB side
};

Socket::Socket(SocketType type, std::string identity)
    : type_(type), identity_(std::move(identity)) {}

Socket::~Socket() { close(); }

std::uint16_t Socket::bind(const std::string &ip, std::uint16_t port) {
  if (listen_fd_ >= 0) throw BindFailed("socket already bound");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string host = (ip == "*" || ip.empty()) ? "0.0.0.0" : ip;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw BindFailed("invalid IPv4 address '" + ip + "'");
  }
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw BindFailed("socket: " + errno_text());
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) != 0 || ::listen(fd, 64) != 0) {
    const auto err = errno_text();
    ::close(fd);
    throw BindFailed("cannot bind " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr *>(&addr), &len);
  listen_fd_ = fd;
  acceptor_ = std::thread([this] { accept_loop(); });
  return ntohs(addr.sin_port);
}

void Socket::connect(const std::string &host, std::uint16_t port,
                     std::chrono::milliseconds timeout) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw std::runtime_error("invalid IPv4 address '" + host + "'");
  }
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw std::runtime_error("socket: " + errno_text());
  const int flags = ::fcntl(fd, F_GETFL);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd, reinterpret_cast<sockaddr *>(&addr), sizeof(addr));
  if (rc != 0 && errno == EINPROGRESS) {
    pollfd p{fd, POLLOUT, 0};
    rc = ::poll(&p, 1, static_cast<int>(timeout.count())) == 1 ? 0 : -1;
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      rc = -1;
      errno = err;
    }
  }
  if (rc != 0) {
    const auto err = errno_text();
    ::close(fd);
    throw std::runtime_error("connect " + host + ":" + std::to_string(port) + ": " + err);
  }
  ::fcntl(fd, F_SETFL, flags);
  set_timeout(fd, SO_RCVTIMEO, timeout);
  auto peer = std::make_shared<Peer>();
  peer->fd = fd;
  try {
    handshake(*peer);
  } catch (...) {
    ::close(fd);
    throw;
  }
  set_timeout(fd, SO_RCVTIMEO, std::chrono::milliseconds(0));
  std::vector<std::string> subs;
  {
    std::lock_guard lock(mu_);
    subs = subscriptions_;
  }
  for (const auto &s : subs) write(*peer, {"\x01" + s});
  std::lock_guard lock(mu_);
  peers_.push_back(peer);
  peer->reader = std::thread([this, peer] { read_loop(peer); });
  peer->ready = true;
}

void Socket::handshake(Peer &peer) {
  const int one = 1;
  ::setsockopt(peer.fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  set_timeout(peer.fd, SO_SNDTIMEO, std::chrono::seconds(5));
  if (!write_all(peer.fd, encode_greeting(false))) throw ProtocolError("greeting write failed");
  char greeting[kGreetingSize];
  if (!read_exact(peer.fd, greeting, kGreetingSize)) throw ProtocolError("greeting read failed");
  if (static_cast<unsigned char>(greeting[0]) != 0xFF || (greeting[9] & 0x01) != 0x01) {
    throw ProtocolError("peer is not speaking ZMTP");
  }
  if (greeting[10] < 3) throw ProtocolError("peer speaks ZMTP < 3.0");
  if (std::string_view(greeting + 12, 4) != "NULL" || greeting[16] != '\0') {
    throw ProtocolError("unsupported security mechanism");
  }
  if (!write_all(peer.fd, encode_ready(type_, identity_))) throw ProtocolError("READY write failed");
  Frame f;
  if (!read_frame(peer.fd, f)) throw ProtocolError("READY read failed");
  if (!(f.flags & kCommand)) throw ProtocolError("expected READY command");
  const auto name = command_name(f.body);
  if (name == "ERROR") throw ProtocolError("peer rejected handshake");
  if (name != "READY") throw ProtocolError("expected READY, got " + name);
  const auto props = parse_properties(std::string_view(f.body).substr(1 + name.size()));
  const auto it = props.find("socket-type");
  const auto peer_type = it == props.end() ? std::nullopt : parse_socket_type(it->second);
  if (!peer_type || !compatible(type_, *peer_type)) {
    throw ProtocolError("incompatible peer socket type");
  }
  peer.type = *peer_type;
  if (auto id = props.find("identity"); id != props.end()) peer.identity = id->second;
}

void Socket::accept_loop() {
  while (!closed_) {
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      return;
    }
    reap();
    start_peer(fd, true);
  }
}

void Socket::start_peer(int fd, bool) {
  auto peer = std::make_shared<Peer>();
  peer->fd = fd;
  std::lock_guard lock(mu_);
  if (closed_) {
    ::close(fd);
    return;
  }
  peers_.push_back(peer);
  peer->reader = std::thread([this, peer] {
    try {
      set_timeout(peer->fd, SO_RCVTIMEO, std::chrono::seconds(10));
      handshake(*peer);
      set_timeout(peer->fd, SO_RCVTIMEO, std::chrono::milliseconds(0));
    } catch (const std::exception &) {
      peer->dead = true;
      return;
    }
    if (type_ == SocketType::Router && peer->identity.empty()) {
      std::lock_guard lock(mu_);
      const auto n = ++next_identity_;
      peer->identity = std::string(1, '\0') + static_cast<char>(n >> 24) +
                       static_cast<char>(n >> 16) + static_cast<char>(n >> 8) +
                       static_cast<char>(n);
    }
    peer->ready = true;
    read_loop(peer);
  });
}

void Socket::read_loop(std::shared_ptr<Peer> peer) {
  Multipart frames;
  try {
    Frame f;
    while (!closed_ && read_frame(peer->fd, f)) {
      if (f.flags & kCommand) {
        const auto name = command_name(f.body);
        on_command(*peer, name, std::string_view(f.body).substr(1 + name.size()));
        continue;
      }
      frames.push_back(std::move(f.body));
      if (!(f.flags & kMore)) {
        on_message(peer, std::move(frames));
        frames.clear();
      }
    }
  } catch (const std::exception &) {
  }
  peer->dead = true;
  std::lock_guard lock(mu_);
  cv_.notify_all();
}

void Socket::on_command(Peer &peer, std::string_view name, std::string_view body) {
  if (name == "SUBSCRIBE" || name == "CANCEL") {
    if (type_ != SocketType::Pub) return;
    std::lock_guard lock(peer.sub_mu);
    auto &subs = peer.subscriptions;
    if (name == "SUBSCRIBE") {
      subs.emplace_back(body);
    } else if (auto it = std::find(subs.begin(), subs.end(), body); it != subs.end()) {
      subs.erase(it);
    }
  } else if (name == "PING") {
    // PING carries a 2-byte TTL then context echoed back in PONG.
    const auto context = body.size() > 2 ? body.substr(2) : std::string_view();
    std::string pong = "\x04PONG";
    pong.append(context);
    std::lock_guard lock(peer.write_mu);
    write_all(peer.fd, encode_frame(pong, false, true));
  }
}

void Socket::on_message(const std::shared_ptr<Peer> &peer, Multipart frames) {
  switch (type_) {
    case SocketType::Pub: {
      if (frames.size() != 1 || frames[0].empty()) return;
      const char op = frames[0][0];
      const std::string topic = frames[0].substr(1);
      std::lock_guard lock(peer->sub_mu);
      auto &subs = peer->subscriptions;
      if (op == 1) {
        subs.push_back(topic);
      } else if (op == 0) {
        if (auto it = std::find(subs.begin(), subs.end(), topic); it != subs.end()) subs.erase(it);
      }
      return;
    }
    case SocketType::Router:
      frames.insert(frames.begin(), peer->identity);
      break;
    case SocketType::Req:
      if (frames.empty() || !frames[0].empty()) return;
      frames.erase(frames.begin());
      break;
    case SocketType::Sub: {
      std::lock_guard lock(mu_);
      const auto &topic = frames.empty() ? std::string() : frames[0];
      const bool wanted = std::any_of(subscriptions_.begin(), subscriptions_.end(),
                                      [&](const std::string &s) { return topic.rfind(s, 0) == 0; });
      if (!wanted) return;
      break;
    }
    default:
      break;
  }
  std::lock_guard lock(mu_);
  inbox_.push_back({peer, std::move(frames)});
  cv_.notify_all();
}

void Socket::write(Peer &peer, const Multipart &msg) {
  std::string wire;
  for (std::size_t i = 0; i < msg.size(); ++i) {
    wire += encode_frame(msg[i], i + 1 < msg.size(), false);
  }
  std::lock_guard lock(peer.write_mu);
  if (peer.dead) return;
  if (!write_all(peer.fd, wire)) {
    peer.dead = true;
    ::shutdown(peer.fd, SHUT_RDWR);
  }
}

std::vector<std::shared_ptr<Socket::Peer>> Socket::live_peers() const {
  std::lock_guard lock(mu_);
  std::vector<std::shared_ptr<Peer>> out;
  for (const auto &p : peers_) {
    if (p->ready && !p->dead) out.push_back(p);
  }
  return out;
}

void Socket::send(Multipart msg) {
  if (closed_) throw std::runtime_error("socket closed");
  switch (type_) {
    case SocketType::Router: {
      if (msg.empty()) throw std::invalid_argument("ROUTER send needs an identity frame");
      const std::string id = msg.front();
      msg.erase(msg.begin());
      for (const auto &p : live_peers()) {
        if (p->identity == id) {
          write(*p, msg);
          return;
        }
      }
      return;
    }
    case SocketType::Pub: {
      const std::string topic = msg.empty() ? std::string() : msg.front();
      for (const auto &p : live_peers()) {
        bool match;
        {
          std::lock_guard lock(p->sub_mu);
          match = std::any_of(p->subscriptions.begin(), p->subscriptions.end(),
                              [&](const std::string &s) { return topic.rfind(s, 0) == 0; });
        }
        if (match) write(*p, msg);
      }
      return;
    }
    case SocketType::Rep: {
      std::lock_guard lock(rep_mu_);
      if (!rep_peer_) throw std::logic_error("REP send without a pending request");
      Multipart out = rep_envelope_;
      out.insert(out.end(), msg.begin(), msg.end());
      write(*rep_peer_, out);
      rep_peer_.reset();
      rep_envelope_.clear();
      return;
    }
    case SocketType::Req:
      msg.insert(msg.begin(), std::string());
      [[fallthrough]];
    case SocketType::Dealer: {
      const auto peers = live_peers();
      if (!peers.empty()) write(*peers.front(), msg);
      return;
    }
    case SocketType::Sub:
      throw std::logic_error("SUB sockets cannot send");
  }
}

std::optional<Multipart> Socket::recv(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    Incoming item;
    {
      std::unique_lock lock(mu_);
      if (!cv_.wait_until(lock, deadline, [&] { return !inbox_.empty() || closed_; })) {
        return std::nullopt;
      }
      if (inbox_.empty()) return std::nullopt;
      item = std::move(inbox_.front());
      inbox_.pop_front();
    }
    if (type_ != SocketType::Rep) return std::move(item.frames);
    auto delim = std::find(item.frames.begin(), item.frames.end(), std::string());
    if (delim == item.frames.end()) continue;  // malformed request
    std::lock_guard lock(rep_mu_);
    rep_peer_ = item.peer;
    rep_envelope_.assign(item.frames.begin(), delim + 1);
    return Multipart(delim + 1, item.frames.end());
  }
}

void Socket::subscribe(std::string prefix) {
  if (type_ != SocketType::Sub) throw std::logic_error("subscribe on a non-SUB socket");
  {
    std::lock_guard lock(mu_);
    subscriptions_.push_back(prefix);
  }
  for (const auto &p : live_peers()) write(*p, {"\x01" + prefix});
}

std::size_t Socket::peer_count() const { return live_peers().size(); }

void Socket::reap() {
  std::vector<std::shared_ptr<Peer>> dead;
  {
    std::lock_guard lock(mu_);
    auto it = std::partition(peers_.begin(), peers_.end(),
                             [](const std::shared_ptr<Peer> &p) { return !p->dead; });
    dead.assign(it, peers_.end());
    peers_.erase(it, peers_.end());
  }
  for (auto &p : dead) {
    if (p->reader.joinable() && p->reader.get_id() != std::this_thread::get_id()) p->reader.join();
    ::close(p->fd);
  }
}

void Socket::close() {
  if (closed_.exchange(true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
  }
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::shared_ptr<Peer>> peers;
  {
    std::lock_guard lock(mu_);
    peers.swap(peers_);
    cv_.notify_all();
  }
  for (auto &p : peers) ::shutdown(p->fd, SHUT_RDWR);
  for (auto &p : peers) {
    if (p->reader.joinable()) p->reader.join();
    ::close(p->fd);
  }
  std::lock_guard lock(rep_mu_);
  rep_peer_.reset();
}

}  // namespace q8s::kernel::zmtp
