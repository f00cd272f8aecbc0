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
#ifndef ACCELFORGE_NODESIM_CLIENT_H_
#define ACCELFORGE_NODESIM_CLIENT_H_

#include <array>
#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "accelforge/nodesim/device.h"
#include "accelforge/nodesim/protocol.h"

namespace accelforge::nodesim {

// Raised for ERR frames; code() is kDeviceError.
class DeviceError : public Error {
 public:
  explicit DeviceError(std::uint8_t device_code);
  std::uint8_t device_code() const noexcept { return device_code_; }

 private:
  std::uint8_t device_code_;
};

std::string_view DeviceErrorName(std::uint8_t device_code);

// "host:port" -> (host, port). Throws kConnectionFailed on bad syntax.
std::pair<std::string, std::uint16_t> ParseAddress(std::string_view address);

struct ChannelReading {
  std::uint32_t avg_uw = 0;
  std::uint32_t samples = 0;
};

using StreamSample = std::array<std::uint32_t, kChannelCount>;

// Blocking protocol client. Socket failures raise kConnectionFailed.
class NodeClient {
 public:
  NodeClient() = default;
  ~NodeClient();
  NodeClient(const NodeClient&) = delete;
  NodeClient& operator=(const NodeClient&) = delete;

  void Connect(const std::string& host, std::uint16_t port,
               std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));
  void Close();
  bool connected() const { return fd_ >= 0; }

  // Sends one request and returns the first non-stream response. Stream
  // samples received meanwhile are queued.
  protocol::Frame Transact(std::uint8_t command, std::span<const std::uint8_t> payload = {});
  // Sends raw bytes and returns the next raw frame (for protocol tests).
  std::vector<std::uint8_t> TransactRaw(std::span<const std::uint8_t> bytes);

  void Ping();
  void LoadManifest(const std::string& manifest_json);
  void FpgaOn();
  void FpgaOff();
  InferenceResult Infer(std::span<const Code> input);
  ChannelReading ReadChannel(std::uint8_t channel);
  void StreamStart(std::uint16_t interval_ms);
  void StreamStop();

  // Waits up to `timeout` for the next stream sample.
  std::optional<StreamSample> NextStreamSample(std::chrono::milliseconds timeout);

  void set_io_timeout(std::chrono::milliseconds t) { io_timeout_ = t; }

 private:
  std::vector<std::uint8_t> ReadRawFrame(std::chrono::milliseconds timeout, bool allow_timeout);
  void SendAll(std::span<const std::uint8_t> bytes);
  void QueueSample(const protocol::Frame& frame);

  int fd_ = -1;
  protocol::FrameReader reader_;
  std::deque<StreamSample> samples_;
  std::chrono::milliseconds io_timeout_{10000};
};

}  // namespace accelforge::nodesim

#endif  // ACCELFORGE_NODESIM_CLIENT_H_
