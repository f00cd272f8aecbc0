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
#ifndef ACCELFORGE_NODESIM_SERVER_H_
#define ACCELFORGE_NODESIM_SERVER_H_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <string>
#include <thread>
#include <type_traits>

#include "accelforge/nodesim/device.h"

namespace accelforge::nodesim {

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 7070;  // 0 picks an ephemeral port
  // Partially received frames are dropped (with ERR 0x06) after this long
  // without further bytes.
  std::chrono::milliseconds partial_frame_timeout{1000};
};

// TCP front end of the simulated node. A single loop thread owns the device
// and every connection, so frames from all sessions and stream emissions are
// executed one at a time in arrival order.
class NodeServer {
 public:
  explicit NodeServer(DeviceConfig config = {}, ServerOptions options = {});
  ~NodeServer();
  NodeServer(const NodeServer&) = delete;
  NodeServer& operator=(const NodeServer&) = delete;

  // Binds, starts the loop thread and returns the bound port. Throws
  // kConnectionFailed when the address cannot be bound.
  std::uint16_t Start();
  void Stop();
  bool running() const { return running_.load(); }
  std::uint16_t port() const { return port_; }

  // Runs `fn(device)` on the loop thread between frames and returns its
  // result. Runs inline when the server is not running.
  template <typename Fn>
  auto WithDevice(Fn&& fn) -> std::invoke_result_t<Fn, Device&> {
    using R = std::invoke_result_t<Fn, Device&>;
    if (!running_.load()) return fn(device_);
    std::packaged_task<R()> task([&] { return fn(device_); });
    auto result = task.get_future();
    Post([&task] { task(); });
    return result.get();
  }

 private:
  void Post(std::function<void()> task);
  void Loop();

  Device device_;
  ServerOptions options_;
  std::atomic<bool> running_{false};
  std::uint16_t port_ = 0;
  int listen_fd_ = -1;
  int wake_fds_[2] = {-1, -1};
  std::thread thread_;
  std::mutex tasks_mutex_;
  std::deque<std::function<void()>> tasks_;
  bool accepting_ = false;
};

}  // namespace accelforge::nodesim

#endif  // ACCELFORGE_NODESIM_SERVER_H_
