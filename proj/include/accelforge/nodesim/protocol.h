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
#ifndef ACCELFORGE_NODESIM_PROTOCOL_H_
#define ACCELFORGE_NODESIM_PROTOCOL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

// Host <-> node wire format:
//   0xEA | cmd:u8 | len:u16 LE | payload[len] | crc8
// with crc8 (poly 0x07, init 0x00) computed over cmd, len and payload.
namespace accelforge::nodesim::protocol {

inline constexpr std::uint8_t kMagic = 0xEA;
inline constexpr std::size_t kHeaderSize = 4;  // magic, cmd, len
inline constexpr std::size_t kOverhead = 5;    // header + crc
inline constexpr std::size_t kMaxPayload = 0xFFFF;

enum Command : std::uint8_t {
  kPing = 0x01,
  kLoadManifest = 0x02,
  kFpgaOn = 0x03,
  kFpgaOff = 0x04,
  kInfer = 0x05,
  kReadChannel = 0x06,
  kStreamStart = 0x07,
  kStreamStop = 0x08,
};

enum Response : std::uint8_t {
  kPong = 0x81,
  kAck = 0x82,
  kInferResult = 0x85,
  kChannelReading = 0x86,
  kStreamSample = 0x87,
  kError = 0xFF,
};

enum ErrorByte : std::uint8_t {
  kErrBadChecksum = 0x01,
  kErrUnknownCommand = 0x02,
  kErrFpgaOff = 0x03,
  kErrNoManifest = 0x04,
  kErrBadChannel = 0x05,
  kErrBadLength = 0x06,
};

struct Frame {
  std::uint8_t command = 0;
  std::vector<std::uint8_t> payload;
};

std::uint8_t Crc8(std::span<const std::uint8_t> bytes, std::uint8_t crc = 0x00);

// Throws kBadInputLength when the payload exceeds 65535 bytes.
std::vector<std::uint8_t> EncodeFrame(std::uint8_t command, std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> EncodeError(std::uint8_t code);

enum class DecodeStatus { kOk, kBadMagic, kBadLength, kBadChecksum };

struct Decoded {
  DecodeStatus status = DecodeStatus::kOk;
  Frame frame;
};

// Decodes a buffer holding exactly one frame.
Decoded DecodeFrame(std::span<const std::uint8_t> bytes);

// Reassembles frames from a byte stream. Bytes before a magic byte are
// discarded; a complete candidate frame is returned raw (checksum unchecked).
class FrameReader {
 public:
  void Feed(std::span<const std::uint8_t> bytes);
  std::optional<std::vector<std::uint8_t>> Next();
  std::size_t buffered() const { return buffer_.size(); }
  void Clear() { buffer_.clear(); }

 private:
  std::vector<std::uint8_t> buffer_;
};

// Little-endian payload helpers.
void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v);
void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v);
void PutI32(std::vector<std::uint8_t>& out, std::int32_t v);
std::uint16_t GetU16(std::span<const std::uint8_t> in, std::size_t offset);
std::uint32_t GetU32(std::span<const std::uint8_t> in, std::size_t offset);
std::int32_t GetI32(std::span<const std::uint8_t> in, std::size_t offset);

}  // namespace accelforge::nodesim::protocol

namespace accelforge::nodesim {

class Device;

struct StreamControl {
  enum class Action { kNone, kStart, kStop };
  Action action = Action::kNone;
  std::uint16_t interval_ms = 0;
};

// Executes one raw frame against the device and returns the encoded
// response. Never throws: malformed input yields an ERR frame. Stream
// start/stop requests are acknowledged here and reported through `stream`
// for the transport to act on.
std::vector<std::uint8_t> HandleFrame(Device& device, std::span<const std::uint8_t> frame,
                                      StreamControl* stream = nullptr);

}  // namespace accelforge::nodesim

#endif  // ACCELFORGE_NODESIM_PROTOCOL_H_
