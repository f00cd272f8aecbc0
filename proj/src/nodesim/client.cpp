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
#include "accelforge/nodesim/client.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace accelforge::nodesim {

namespace {

using Clock = std::chrono::steady_clock;

std::string HexByte(std::uint8_t b) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  return {'0', 'x', kDigits[b >> 4], kDigits[b & 15]};
}

}  // namespace

std::string_view DeviceErrorName(std::uint8_t device_code) {
  switch (device_code) {
    case protocol::kErrBadChecksum: return "bad checksum";
    case protocol::kErrUnknownCommand: return "unknown command";
    case protocol::kErrFpgaOff: return "fpga off";
    case protocol::kErrNoManifest: return "no manifest";
    case protocol::kErrBadChannel: return "bad channel";
    case protocol::kErrBadLength: return "bad length";
  }
  return "unknown error";
}

DeviceError::DeviceError(std::uint8_t device_code)
    : Error(ErrorCode::kDeviceError,
            HexByte(device_code) + " (" + std::string(DeviceErrorName(device_code)) + ")"),
      device_code_(device_code) {}

std::pair<std::string, std::uint16_t> ParseAddress(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(ErrorCode::kConnectionFailed, "address must be HOST:PORT, got '" +
                                                  std::string(address) + "'");
  }
  unsigned port = 0;
  const auto digits = address.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || port == 0 || port > 65535) {
    throw Error(ErrorCode::kConnectionFailed, "bad port in '" + std::string(address) + "'");
  }
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

NodeClient::~NodeClient() { Close(); }

void NodeClient::Connect(const std::string& host, std::uint16_t port,
                         std::chrono::milliseconds timeout) {
  Close();
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::kConnectionFailed, "cannot resolve " + host);
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw Error(ErrorCode::kConnectionFailed, std::strerror(errno));
  }
  ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK);
  int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0 && errno == EINPROGRESS) {
    pollfd p{fd, POLLOUT, 0};
    rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc == 1) {
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
      rc = err == 0 ? 0 : -1;
      errno = err;
    } else {
      rc = -1;
      errno = ETIMEDOUT;
    }
  }
  if (rc != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    throw Error(ErrorCode::kConnectionFailed,
                "cannot connect to " + host + ":" + service + ": " + why);
  }
  int yes = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
  fd_ = fd;
}

void NodeClient::Close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
  reader_.Clear();
  samples_.clear();
}

void NodeClient::SendAll(std::span<const std::uint8_t> bytes) {
  if (fd_ < 0) throw Error(ErrorCode::kConnectionFailed, "not connected");
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n > 0) {
      sent += static_cast<std::size_t>(n);
    } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) {
      pollfd p{fd_, POLLOUT, 0};
      if (::poll(&p, 1, static_cast<int>(io_timeout_.count())) <= 0) {
        throw Error(ErrorCode::kConnectionFailed, "send timed out");
      }
    } else {
      throw Error(ErrorCode::kConnectionFailed, std::string("send failed: ") + std::strerror(errno));
    }
  }
}

std::vector<std::uint8_t> NodeClient::ReadRawFrame(std::chrono::milliseconds timeout,
                                                   bool allow_timeout) {
  if (fd_ < 0) throw Error(ErrorCode::kConnectionFailed, "not connected");
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    if (auto frame = reader_.Next()) return *frame;
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) {
      if (allow_timeout) return {};
      throw Error(ErrorCode::kConnectionFailed, "timed out waiting for response");
    }
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(left));
    if (rc < 0 && errno != EINTR) {
      throw Error(ErrorCode::kConnectionFailed, std::strerror(errno));
    }
    if (rc <= 0) continue;
    std::uint8_t buf[4096];
    const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n == 0) throw Error(ErrorCode::kConnectionFailed, "connection closed by node");
    if (n < 0) {
      if (errno == EAGAIN || errno == EINTR) continue;
      throw Error(ErrorCode::kConnectionFailed, std::strerror(errno));
    }
    reader_.Feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
  }
}

void NodeClient::QueueSample(const protocol::Frame& frame) {
  if (frame.payload.size() != 4 * kChannelCount) return;
  StreamSample s{};
  for (std::size_t c = 0; c < kChannelCount; ++c) s[c] = protocol::GetU32(frame.payload, 4 * c);
  samples_.push_back(s);
}

std::vector<std::uint8_t> NodeClient::TransactRaw(std::span<const std::uint8_t> bytes) {
  SendAll(bytes);
  for (;;) {
    auto raw = ReadRawFrame(io_timeout_, false);
    const auto d = protocol::DecodeFrame(raw);
    if (d.status == protocol::DecodeStatus::kOk && d.frame.command == protocol::kStreamSample) {
      QueueSample(d.frame);
      continue;
    }
    return raw;
  }
}

protocol::Frame NodeClient::Transact(std::uint8_t command, std::span<const std::uint8_t> payload) {
  const auto raw = TransactRaw(protocol::EncodeFrame(command, payload));
  const auto d = protocol::DecodeFrame(raw);
  if (d.status != protocol::DecodeStatus::kOk) {
    throw Error(ErrorCode::kConnectionFailed, "corrupted response frame");
  }
  if (d.frame.command == protocol::kError) {
    throw DeviceError(d.frame.payload.empty() ? 0 : d.frame.payload[0]);
  }
  return d.frame;
}

namespace {

void Expect(const protocol::Frame& f, std::uint8_t response, std::size_t min_payload = 0) {
  if (f.command != response || f.payload.size() < min_payload) {
    throw Error(ErrorCode::kConnectionFailed,
                "unexpected response " + HexByte(f.command) + ", wanted " + HexByte(response));
  }
}

}  // namespace

void NodeClient::Ping() { Expect(Transact(protocol::kPing), protocol::kPong); }

void NodeClient::LoadManifest(const std::string& manifest_json) {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(manifest_json.data());
  Expect(Transact(protocol::kLoadManifest, {bytes, manifest_json.size()}), protocol::kAck);
}

void NodeClient::FpgaOn() { Expect(Transact(protocol::kFpgaOn), protocol::kAck); }

void NodeClient::FpgaOff() { Expect(Transact(protocol::kFpgaOff), protocol::kAck); }

InferenceResult NodeClient::Infer(std::span<const Code> input) {
  if (input.size() > 0xFFFF) {
    throw Error(ErrorCode::kBadInputLength, "more than 65535 input codes");
  }
  std::vector<std::uint8_t> payload;
  protocol::PutU16(payload, static_cast<std::uint16_t>(input.size()));
  for (Code c : input) protocol::PutI32(payload, c);
  const auto f = Transact(protocol::kInfer, payload);
  Expect(f, protocol::kInferResult, 2);
  const std::size_t count = protocol::GetU16(f.payload, 0);
  if (f.payload.size() != 2 + 4 * count + 4) {
    throw Error(ErrorCode::kConnectionFailed, "malformed inference response");
  }
  InferenceResult r;
  r.outputs.resize(count);
  for (std::size_t i = 0; i < count; ++i) r.outputs[i] = protocol::GetI32(f.payload, 2 + 4 * i);
  r.elapsed_ns = protocol::GetU32(f.payload, 2 + 4 * count);
  return r;
}

ChannelReading NodeClient::ReadChannel(std::uint8_t channel) {
  const std::uint8_t payload[] = {channel};
  const auto f = Transact(protocol::kReadChannel, payload);
  Expect(f, protocol::kChannelReading, 8);
  return {protocol::GetU32(f.payload, 0), protocol::GetU32(f.payload, 4)};
}

void NodeClient::StreamStart(std::uint16_t interval_ms) {
  std::vector<std::uint8_t> payload;
  protocol::PutU16(payload, interval_ms);
  Expect(Transact(protocol::kStreamStart, payload), protocol::kAck);
}

void NodeClient::StreamStop() { Expect(Transact(protocol::kStreamStop), protocol::kAck); }

std::optional<StreamSample> NodeClient::NextStreamSample(std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  while (samples_.empty()) {
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) return std::nullopt;
    const auto raw = ReadRawFrame(left, true);
    if (raw.empty()) return std::nullopt;
    const auto d = protocol::DecodeFrame(raw);
    if (d.status == protocol::DecodeStatus::kOk && d.frame.command == protocol::kStreamSample) {
      QueueSample(d.frame);
    }
  }
  StreamSample s = samples_.front();
  samples_.pop_front();
  return s;
}

}  // namespace accelforge::nodesim
