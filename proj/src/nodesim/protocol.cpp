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
#include "accelforge/nodesim/protocol.h"

#include <algorithm>
#include <limits>
#include <string>

#include "accelforge/nodesim/device.h"

namespace accelforge::nodesim::protocol {

std::uint8_t Crc8(std::span<const std::uint8_t> bytes, std::uint8_t crc) {
  for (std::uint8_t b : bytes) {
    crc ^= b;
    for (int i = 0; i < 8; ++i) {
      crc = (crc & 0x80) ? static_cast<std::uint8_t>((crc << 1) ^ 0x07)
                         : static_cast<std::uint8_t>(crc << 1);
    }
  }
  return crc;
}

std::vector<std::uint8_t> EncodeFrame(std::uint8_t command,
                                      std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxPayload) {
    throw Error(ErrorCode::kBadInputLength,
                "payload of " + std::to_string(payload.size()) + " bytes exceeds 65535");
  }
  std::vector<std::uint8_t> out;
  out.reserve(payload.size() + kOverhead);
  out.push_back(kMagic);
  out.push_back(command);
  PutU16(out, static_cast<std::uint16_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  out.push_back(Crc8(std::span(out).subspan(1)));
  return out;
}

std::vector<std::uint8_t> EncodeError(std::uint8_t code) {
  const std::uint8_t payload[] = {code};
  return EncodeFrame(kError, payload);
}

Decoded DecodeFrame(std::span<const std::uint8_t> bytes) {
  Decoded d;
  if (bytes.size() < kOverhead) {
    d.status = DecodeStatus::kBadLength;
    return d;
  }
  if (bytes[0] != kMagic) {
    d.status = DecodeStatus::kBadMagic;
    return d;
  }
  const std::uint16_t len = GetU16(bytes, 2);
  if (bytes.size() != kOverhead + len) {
    d.status = DecodeStatus::kBadLength;
    return d;
  }
  if (Crc8(bytes.subspan(1, kHeaderSize - 1 + len)) != bytes.back()) {
    d.status = DecodeStatus::kBadChecksum;
    return d;
  }
  d.frame.command = bytes[1];
  d.frame.payload.assign(bytes.begin() + kHeaderSize, bytes.end() - 1);
  return d;
}

void FrameReader::Feed(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<std::vector<std::uint8_t>> FrameReader::Next() {
  auto magic = std::find(buffer_.begin(), buffer_.end(), kMagic);
  buffer_.erase(buffer_.begin(), magic);
  if (buffer_.size() < kHeaderSize) return std::nullopt;
  const std::size_t total = kOverhead + GetU16(buffer_, 2);
  if (buffer_.size() < total) return std::nullopt;
  std::vector<std::uint8_t> frame(buffer_.begin(), buffer_.begin() + total);
  buffer_.erase(buffer_.begin(), buffer_.begin() + total);
  return frame;
}

void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void PutI32(std::vector<std::uint8_t>& out, std::int32_t v) {
  PutU32(out, static_cast<std::uint32_t>(v));
}

std::uint16_t GetU16(std::span<const std::uint8_t> in, std::size_t offset) {
  return static_cast<std::uint16_t>(in[offset] | (in[offset + 1] << 8));
}

std::uint32_t GetU32(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

std::int32_t GetI32(std::span<const std::uint8_t> in, std::size_t offset) {
  return static_cast<std::int32_t>(GetU32(in, offset));
}

}  // namespace accelforge::nodesim::protocol

namespace accelforge::nodesim {

namespace {

using namespace protocol;

std::uint8_t ErrorByteFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFpgaOff: return kErrFpgaOff;
    case ErrorCode::kNoManifest: return kErrNoManifest;
    case ErrorCode::kBadChannel: return kErrBadChannel;
    default: return kErrBadLength;
  }
}

std::vector<std::uint8_t> Ack() { return EncodeFrame(kAck, {}); }

std::vector<std::uint8_t> Dispatch(Device& device, const Frame& f, StreamControl* stream) {
  const std::span<const std::uint8_t> p(f.payload);
  auto expect_len = [&](std::size_t n) { return p.size() == n; };
  switch (f.command) {
    case kPing:
      if (!expect_len(0)) return EncodeError(kErrBadLength);
      return EncodeFrame(kPong, {});

    case kLoadManifest: {
      const std::string text(p.begin(), p.end());
      device.LoadManifest(ParseManifest(text));
      return Ack();
    }

    case kFpgaOn:
      if (!expect_len(0)) return EncodeError(kErrBadLength);
      device.FpgaOn();
      return Ack();

    case kFpgaOff:
      if (!expect_len(0)) return EncodeError(kErrBadLength);
      device.FpgaOff();
      return Ack();

    case kInfer: {
      if (p.size() < 2) return EncodeError(kErrBadLength);
      const std::uint16_t count = GetU16(p, 0);
      if (p.size() != 2 + 4 * static_cast<std::size_t>(count)) return EncodeError(kErrBadLength);
      std::vector<Code> input(count);
      for (std::size_t i = 0; i < count; ++i) input[i] = GetI32(p, 2 + 4 * i);
      const InferenceResult r = device.RunInference(input);
      std::vector<std::uint8_t> out;
      PutU16(out, static_cast<std::uint16_t>(r.outputs.size()));
      for (Code c : r.outputs) PutI32(out, c);
      PutU32(out, static_cast<std::uint32_t>(
                      std::min<std::uint64_t>(r.elapsed_ns, std::numeric_limits<std::uint32_t>::max())));
      return EncodeFrame(kInferResult, out);
    }

    case kReadChannel: {
      if (!expect_len(1)) return EncodeError(kErrBadLength);
      const auto reading = device.ReadChannel(p[0]);
      std::vector<std::uint8_t> out;
      PutU32(out, reading.avg_uw);
      PutU32(out, static_cast<std::uint32_t>(
                      std::min<std::uint64_t>(reading.samples, std::numeric_limits<std::uint32_t>::max())));
      return EncodeFrame(kChannelReading, out);
    }

    case kStreamStart: {
      if (!expect_len(2)) return EncodeError(kErrBadLength);
      const std::uint16_t interval = GetU16(p, 0);
      if (interval == 0) return EncodeError(kErrBadLength);
      if (stream) *stream = {StreamControl::Action::kStart, interval};
      return Ack();
    }

    case kStreamStop:
      if (!expect_len(0)) return EncodeError(kErrBadLength);
      if (stream) *stream = {StreamControl::Action::kStop, 0};
      return Ack();

    default:
      return EncodeError(kErrUnknownCommand);
  }
}

}  // namespace

std::vector<std::uint8_t> HandleFrame(Device& device, std::span<const std::uint8_t> frame,
                                      StreamControl* stream) {
  if (stream) *stream = {};
  const Decoded d = DecodeFrame(frame);
  switch (d.status) {
    case DecodeStatus::kOk: break;
    case DecodeStatus::kBadChecksum: return EncodeError(kErrBadChecksum);
    case DecodeStatus::kBadMagic:
    case DecodeStatus::kBadLength: return EncodeError(kErrBadLength);
  }
  try {
    return Dispatch(device, d.frame, stream);
  } catch (const Error& e) {
    return EncodeError(ErrorByteFor(e.code()));
  } catch (const std::exception&) {
    // Malformed payloads (e.g. manifest JSON of the wrong shape).
    return EncodeError(kErrBadLength);
  }
}

}  // namespace accelforge::nodesim
