/* Copyright 2026 The accelforge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "accelforge/nodesim/server.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <list>
#include <optional>
#include <vector>

#include "accelforge/nodesim/protocol.h"

namespace accelforge::nodesim {

namespace {

using Clock = std::chrono::steady_clock;

struct Session {
  int fd = -1;
  protocol::FrameReader reader;
  std::vector<std::uint8_t> outbox;
  Clock::time_point last_rx;
  std::uint16_t stream_ms = 0;  // 0 = not streaming
  Clock::time_point next_tick;
  bool closed = false;
};

void SetNonBlocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

void FlushOutbox(Session& s) {
  while (!s.outbox.empty()) {
    const ssize_t n = ::send(s.fd, s.outbox.data(), s.outbox.size(), MSG_NOSIGNAL);
    if (n > 0) {
      s.outbox.erase(s.outbox.begin(), s.outbox.begin() + n);
    } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) {
      return;
    } else {
      s.closed = true;
      return;
    }
  }
}

void Queue(Session& s, const std::vector<std::uint8_t>& bytes) {
  s.outbox.insert(s.outbox.end(), bytes.begin(), bytes.end());
  FlushOutbox(s);
}

}  // namespace

NodeServer::NodeServer(DeviceConfig config, ServerOptions options)
    : device_(std::move(config)), options_(std::move(options)) {}

NodeServer::~NodeServer() { Stop(); }

std::uint16_t NodeServer::Start() {
  if (running_.load()) return port_;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::kConnectionFailed, std::strerror(errno));
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::kConnectionFailed, "bad bind address " + options_.bind_address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::kConnectionFailed,
                "cannot listen on " + options_.bind_address + ":" +
                    std::to_string(options_.port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  SetNonBlocking(listen_fd_);
  if (::pipe(wake_fds_) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::kConnectionFailed, "pipe failed");
  }
  SetNonBlocking(wake_fds_[0]);
  {
    std::lock_guard lock(tasks_mutex_);
    accepting_ = true;
  }
  running_.store(true);
  thread_ = std::thread([this] { Loop(); });
  return port_;
}

void NodeServer::Stop() {
  {
    std::lock_guard lock(tasks_mutex_);
    if (!accepting_ && !thread_.joinable()) return;
    accepting_ = false;
  }
  running_.store(false);
  if (wake_fds_[1] >= 0) {
    const char b = 1;
    [[maybe_unused]] auto n = ::write(wake_fds_[1], &b, 1);
  }
  if (thread_.joinable()) thread_.join();
  std::deque<std::function<void()>> rest;
  {
    std::lock_guard lock(tasks_mutex_);
    rest.swap(tasks_);
  }
  for (auto& t : rest) t();
  for (int* fd : {&listen_fd_, &wake_fds_[0], &wake_fds_[1]}) {
    if (*fd >= 0) ::close(*fd);
    *fd = -1;
  }
}

void NodeServer::Post(std::function<void()> task) {
  {
    std::lock_guard lock(tasks_mutex_);
    if (accepting_) {
      tasks_.push_back(std::move(task));
      const char b = 1;
      [[maybe_unused]] auto n = ::write(wake_fds_[1], &b, 1);
      return;
    }
  }
  task();
}

void NodeServer::Loop() {
  std::list<Session> sessions;
  std::vector<pollfd> fds;
  std::vector<Session*> order;

  while (running_.load()) {
    const auto now = Clock::now();
    std::optional<Clock::time_point> deadline;
    auto earliest = [&](Clock::time_point t) {
      if (!deadline || t < *deadline) deadline = t;
    };
    for (auto& s : sessions) {
      if (s.stream_ms) earliest(s.next_tick);
      if (s.reader.buffered()) earliest(s.last_rx + options_.partial_frame_timeout);
    }
    int timeout_ms = -1;
    if (deadline) {
      timeout_ms = static_cast<int>(std::max<std::int64_t>(
          0, std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - now).count() + 1));
    }

    fds.clear();
    order.clear();
    fds.push_back({wake_fds_[0], POLLIN, 0});
    fds.push_back({listen_fd_, POLLIN, 0});
    for (auto& s : sessions) {
      fds.push_back({s.fd, static_cast<short>(POLLIN | (s.outbox.empty() ? 0 : POLLOUT)), 0});
      order.push_back(&s);
    }
    if (::poll(fds.data(), fds.size(), timeout_ms) < 0 && errno != EINTR) break;

    if (fds[0].revents & POLLIN) {
      char drain[64];
      while (::read(wake_fds_[0], drain, sizeof drain) > 0) {
      }
    }
    for (;;) {
      std::function<void()> task;
      {
        std::lock_guard lock(tasks_mutex_);
        if (tasks_.empty()) break;
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
      task();
    }

    if (fds[1].revents & POLLIN) {
      for (;;) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) break;
        SetNonBlocking(fd);
        int yes = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
        Session s;
        s.fd = fd;
        s.last_rx = Clock::now();
        sessions.push_back(std::move(s));
      }
    }

    for (std::size_t i = 0; i < order.size(); ++i) {
      Session& s = *order[i];
      const short ev = fds[i + 2].revents;
      if (ev & POLLOUT) FlushOutbox(s);
      if (ev & (POLLIN | POLLHUP | POLLERR)) {
        std::uint8_t buf[4096];
        const ssize_t n = ::recv(s.fd, buf, sizeof buf, 0);
        if (n <= 0) {
          if (n == 0 || (errno != EAGAIN && errno != EINTR)) s.closed = true;
          continue;
        }
        s.last_rx = Clock::now();
        s.reader.Feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
        while (auto frame = s.reader.Next()) {
          StreamControl control;
          Queue(s, HandleFrame(device_, *frame, &control));
          if (control.action == StreamControl::Action::kStart) {
            s.stream_ms = control.interval_ms;
            s.next_tick = Clock::now() + std::chrono::milliseconds(s.stream_ms);
          } else if (control.action == StreamControl::Action::kStop) {
            s.stream_ms = 0;
          }
        }
      }
    }

    const auto later = Clock::now();
    for (auto& s : sessions) {
      if (s.closed) continue;
      if (s.reader.buffered() && later - s.last_rx >= options_.partial_frame_timeout) {
        s.reader.Clear();
        Queue(s, protocol::EncodeError(protocol::kErrBadLength));
      }
      if (s.stream_ms && later >= s.next_tick) {
        const auto uw = device_.StreamTick(s.stream_ms * 1000.0);
        std::vector<std::uint8_t> payload;
        for (std::uint32_t v : uw) protocol::PutU32(payload, v);
        Queue(s, protocol::EncodeFrame(protocol::kStreamSample, payload));
        s.next_tick += std::chrono::milliseconds(s.stream_ms);
        if (s.next_tick < later) s.next_tick = later + std::chrono::milliseconds(s.stream_ms);
      }
    }

    for (auto it = sessions.begin(); it != sessions.end();) {
      if (it->closed) {
        ::close(it->fd);
        it = sessions.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& s : sessions) ::close(s.fd);
}

}  // namespace accelforge::nodesim
