// Copyright 2026 The fedsub Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// TCP carrier. One connection per database per iteration, strict
// request/response, no pipelining. A database serves one session at a time
// and answers any concurrent connection with an Error("busy") frame.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fedsub/bytes.hpp"
#include "fedsub/error.hpp"
#include "fedsub/transport.hpp"

namespace fedsub {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

// "host:port,host:port,..."
inline std::vector<Endpoint> parse_endpoints(const std::string& list) {
  std::vector<Endpoint> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    const std::string item = list.substr(pos, comma - pos);
    const std::size_t colon = item.rfind(':');
    if (item.empty() || colon == std::string::npos || colon + 1 == item.size()) {
      throw ConfigError("bad endpoint '" + item + "', expected host:port");
    }
    unsigned long port = 0;
    try {
      port = std::stoul(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad port in endpoint '" + item + "'");
    }
    if (port == 0 || port > 65535) throw ConfigError("port out of range in endpoint '" + item + "'");
    out.push_back({item.substr(0, colon), static_cast<std::uint16_t>(port)});
    pos = comma + 1;
  }
  return out;
}

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  void shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

  void write_all(std::span<const std::uint8_t> data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("send failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  // False on clean EOF before the first byte.
  bool read_exact(std::uint8_t* dst, std::size_t len) {
    std::size_t off = 0;
    while (off < len) {
      const ssize_t n = ::recv(fd_, dst + off, len - off, 0);
      if (n == 0) {
        if (off == 0) return false;
        throw TransportError("connection closed mid-frame");
      }
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) throw TransportError("receive timed out");
        throw TransportError(std::string("recv failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  void write_frame(const Frame& f) { write_all(frame_encode(f)); }

  // nullopt on clean EOF.
  std::optional<Frame> read_frame() {
    std::uint8_t header[kFrameHeaderLen];
    if (!read_exact(header, sizeof header)) return std::nullopt;
    auto [len, kind] = frame_header(header);
    if (len > kMaxPayload) throw DecodeError("frame payload too large");
    Frame f{kind, Bytes(len)};
    if (len > 0 && !read_exact(f.payload.data(), len)) throw TransportError("connection closed mid-frame");
    return f;
  }

  void set_timeout(int seconds) {
    timeval tv{seconds, 0};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
  }

 private:
  int fd_ = -1;
};

inline Socket connect_to(const Endpoint& ep, int timeout_seconds = 10) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  if (int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve " + ep.host + ": " + ::gai_strerror(rc));
  }
  std::string last = "no address";
  for (addrinfo* a = res; a; a = a->ai_next) {
    Socket s(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
    if (!s.valid()) continue;
    if (::connect(s.fd(), a->ai_addr, a->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      s.set_timeout(timeout_seconds);
      return s;
    }
    last = std::strerror(errno);
  }
  ::freeaddrinfo(res);
  throw TransportError("cannot connect to " + ep.host + ":" + port + ": " + last);
}

// Hosts one database on a TCP port.
class SocketServer {
 public:
  // port 0 picks an ephemeral port; see port().
  SocketServer(FrameHandler& handler, std::uint16_t port, std::string bind_host = "127.0.0.1")
      : handler_(handler) {
    listener_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!listener_.valid()) throw TransportError("socket() failed");
    int one = 1;
    ::setsockopt(listener_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) throw TransportError("bad bind address " + bind_host);
    if (::bind(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      throw TransportError("cannot bind port " + std::to_string(port) + ": " + std::strerror(errno));
    }
    if (::listen(listener_.fd(), 8) != 0) throw TransportError("listen failed");
    socklen_t len = sizeof addr;
    ::getsockname(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  ~SocketServer() { stop(); }

  std::uint16_t port() const { return port_; }

  // Accept loop in a background thread. After max_sessions completed
  // sessions (0 = unlimited) the server stops by itself.
  void start(std::uint64_t max_sessions = 0) {
    max_sessions_ = max_sessions;
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  // Blocks until the server stops.
  void wait() {
    if (acceptor_.joinable()) acceptor_.join();
  }

  void stop() {
    stopping_ = true;
    if (acceptor_.joinable()) acceptor_.join();
  }

  std::uint64_t sessions_completed() const { return completed_; }

 private:
  void accept_loop() {
    while (!stopping_) {
      if (max_sessions_ && completed_ >= max_sessions_) break;
      pollfd p{listener_.fd(), POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      Socket conn(::accept(listener_.fd(), nullptr, nullptr));
      if (!conn.valid()) continue;
      std::unique_lock lock(mu_);
      // A client that just closed its previous session may reconnect before
      // the session thread has seen EOF; give it a moment before refusing.
      idle_.wait_for(lock, kBusyGrace, [this] { return !busy_; });
      if (busy_) {
        try {
          conn.write_frame(Frame::error("busy: database is serving another session"));
        } catch (const Error&) {
        }
        continue;
      }
      if (session_thread_.joinable()) session_thread_.join();
      busy_ = true;
      active_conn_ = std::move(conn);
      session_thread_ = std::thread([this] { session(); });
    }
    std::thread last;
    {
      std::lock_guard lock(mu_);
      if (stopping_) active_conn_.shutdown();
      last = std::move(session_thread_);
    }
    if (last.joinable()) last.join();
  }

  void session() {
    handler_.open_session();
    try {
      while (auto req = active_conn_.read_frame()) active_conn_.write_frame(handler_.handle(*req));
    } catch (const Error&) {
    }
    handler_.close_session();
    {
      std::lock_guard lock(mu_);
      active_conn_.reset();
      busy_ = false;
      ++completed_;
    }
    idle_.notify_all();
  }

  FrameHandler& handler_;
  Socket listener_;
  std::uint16_t port_ = 0;
  std::thread acceptor_;
  std::thread session_thread_;
  Socket active_conn_;
  static constexpr std::chrono::milliseconds kBusyGrace{500};

  std::mutex mu_;
  std::condition_variable idle_;
  bool busy_ = false;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> completed_{0};
  std::uint64_t max_sessions_ = 0;
};

class SocketCarrier : public Carrier {
 public:
  explicit SocketCarrier(std::vector<Endpoint> endpoints, int timeout_seconds = 10)
      : endpoints_(std::move(endpoints)), timeout_(timeout_seconds) {}

  std::size_t n_dbs() const override { return endpoints_.size(); }

  void begin_session() override {
    conns_.clear();
    for (const auto& ep : endpoints_) conns_.push_back(connect_to(ep, timeout_));
  }
  void end_session() override { conns_.clear(); }

  Frame exchange(std::size_t db, const Frame& request) override {
    if (db >= conns_.size()) throw TransportError("no open session with database " + std::to_string(db));
    conns_[db].write_frame(request);
    auto resp = conns_[db].read_frame();
    if (!resp) throw TransportError("database " + std::to_string(db) + " closed the connection");
    return *resp;
  }

 private:
  std::vector<Endpoint> endpoints_;
  int timeout_;
  std::vector<Socket> conns_;
};

}  // namespace fedsub
