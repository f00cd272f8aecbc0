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
#include <arpa/inet.h>
#include <gtest/gtest.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "accelforge/fixsim.h"
#include "accelforge/nodesim/client.h"
#include "accelforge/nodesim/server.h"
#include "nodesim_util.h"

namespace accelforge::nodesim {
namespace {

using namespace std::chrono_literals;
using Bytes = std::vector<std::uint8_t>;

ServerOptions Ephemeral(std::chrono::milliseconds partial = 1000ms) {
  ServerOptions o;
  o.port = 0;
  o.partial_frame_timeout = partial;
  return o;
}

class RawSocket {
 public:
  explicit RawSocket(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    EXPECT_EQ(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  }
  ~RawSocket() { ::close(fd_); }
  void Send(const Bytes& b) { ASSERT_EQ(::send(fd_, b.data(), b.size(), 0), ssize_t(b.size())); }
  // Reads whatever arrives until `quiet` passes with no data or `limit` elapses.
  Bytes Receive(std::chrono::milliseconds quiet, std::chrono::milliseconds limit = 5000ms) {
    Bytes out;
    const auto end = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < end) {
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(quiet.count())) <= 0) break;
      std::uint8_t buf[4096];
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n <= 0) break;
      out.insert(out.end(), buf, buf + n);
    }
    return out;
  }

 private:
  int fd_ = -1;
};

TEST(NodeServer, PingAndStop) {
  NodeServer server({}, Ephemeral());
  const std::uint16_t port = server.Start();
  EXPECT_NE(port, 0);
  EXPECT_TRUE(server.running());
  NodeClient c;
  c.Connect("127.0.0.1", port);
  c.Ping();
  server.Stop();
  EXPECT_FALSE(server.running());
  server.Stop();
}

TEST(NodeServer, BindFailureIsConnectionFailed) {
  NodeServer a({}, Ephemeral());
  ServerOptions o = Ephemeral();
  o.port = a.Start();
  NodeServer b({}, o);
  try {
    b.Start();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConnectionFailed);
  }
  ServerOptions bad = Ephemeral();
  bad.bind_address = "not-an-ip";
  EXPECT_THROW(NodeServer({}, bad).Start(), Error);
}

TEST(NodeClient, ConnectFailures) {
  std::uint16_t port;
  {
    NodeServer s({}, Ephemeral());
    port = s.Start();
  }
  NodeClient c;
  try {
    c.Connect("127.0.0.1", port, 500ms);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConnectionFailed);
  }
  EXPECT_THROW(ParseAddress("localhost"), Error);
  EXPECT_THROW(ParseAddress("h:99999"), Error);
  EXPECT_EQ(ParseAddress("127.0.0.1:7070"), std::make_pair(std::string("127.0.0.1"), std::uint16_t{7070}));
}

TEST(NodeClient, FullSession) {
  NodeServer server({}, Ephemeral());
  const auto port = server.Start();
  const AcceleratorManifest m = testing::OverriddenManifest(5725, 21663);
  NodeClient c;
  c.Connect("127.0.0.1", port);
  try {
    c.FpgaOn();
    c.Infer(std::vector<Code>(m.input_len, 0));
    FAIL();
  } catch (const DeviceError& e) {
    EXPECT_EQ(e.device_code(), 4);
    EXPECT_EQ(e.code(), ErrorCode::kDeviceError);
  }
  c.LoadManifest(ManifestToText(m));
  for (std::uint8_t ch = 0; ch < 8; ++ch) c.ReadChannel(ch);
  const std::vector<Code> x = GoldenVectors(m.model, 2)[1];
  const InferenceResult r = c.Infer(x);
  EXPECT_EQ(r.outputs, fixsim::InferFixed(m.model, x).outputs);
  EXPECT_EQ(r.elapsed_ns, 57250u);
  const ChannelReading reading = c.ReadChannel(1);
  EXPECT_EQ(reading.avg_uw, 71000u);
  EXPECT_EQ(reading.samples, 1u);
  EXPECT_EQ(c.ReadChannel(1).samples, 0u);
  try {
    c.ReadChannel(9);
    FAIL();
  } catch (const DeviceError& e) {
    EXPECT_EQ(e.device_code(), 5);
  }
  c.FpgaOff();
  try {
    c.Infer(x);
    FAIL();
  } catch (const DeviceError& e) {
    EXPECT_EQ(e.device_code(), 3);
  }
  EXPECT_EQ(server.WithDevice([](Device& d) { return d.fpga_state(); }), FpgaState::kOff);
}

TEST(NodeClient, MultipleClientsShareOneDevice) {
  NodeServer server({}, Ephemeral());
  const auto port = server.Start();
  NodeClient a, b;
  a.Connect("127.0.0.1", port);
  b.Connect("127.0.0.1", port);
  a.LoadManifest(ManifestToText(testing::FixtureManifest("linear2x1")));
  a.FpgaOn();
  const auto r = b.Infer(std::vector<Code>{256, 0});
  EXPECT_EQ(r.outputs.size(), 1u);
  EXPECT_EQ(b.ReadChannel(1).samples, 2u);  // configuring + running
  EXPECT_EQ(a.ReadChannel(1).samples, 0u);
}

TEST(NodeClient, StreamingSamples) {
  NodeServer server({}, Ephemeral());
  const auto port = server.Start();
  NodeClient c;
  c.Connect("127.0.0.1", port);
  c.FpgaOn();
  c.StreamStart(20);
  std::vector<StreamSample> samples;
  for (int i = 0; i < 3; ++i) {
    auto s = c.NextStreamSample(2000ms);
    ASSERT_TRUE(s.has_value());
    samples.push_back(*s);
  }
  for (const auto& s : samples) {
    EXPECT_EQ(s[kFpgaCore], 5000u);
    EXPECT_EQ(s[kBatteryTotal], 37000u);
  }
  c.Ping();  // interleaved with samples
  c.StreamStop();
  while (c.NextStreamSample(100ms)) {
  }
  EXPECT_FALSE(c.NextStreamSample(200ms).has_value());
  const std::uint64_t t = server.WithDevice([](Device& d) { return d.sim_time_ns(); });
  EXPECT_GE(t, 1000000u + 3 * 20000000u);
  EXPECT_EQ((t - 1000000u) % 20000000u, 0u);
}

TEST(NodeServer, PartialFrameTimesOut) {
  NodeServer server({}, Ephemeral(200ms));
  const auto port = server.Start();
  RawSocket s(port);
  s.Send(Bytes{0xEA, 0x06, 0x01});
  const auto start = std::chrono::steady_clock::now();
  const Bytes r = s.Receive(1500ms, 1500ms);
  const auto waited = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(r, protocol::EncodeError(6));
  EXPECT_GE(waited, 150ms);
  s.Send(protocol::EncodeFrame(protocol::kPing, {}));
  EXPECT_EQ(s.Receive(300ms), protocol::EncodeFrame(protocol::kPong, {}));
}

TEST(NodeServer, GarbageThenValidFrames) {
  NodeServer server({}, Ephemeral());
  const auto port = server.Start();
  testing::Rng rng(5);
  RawSocket s(port);
  Bytes noise(2000);
  for (auto& b : noise) b = static_cast<std::uint8_t>(rng() % 0xE0);
  s.Send(noise);
  s.Send(protocol::EncodeFrame(protocol::kPing, {}));
  EXPECT_EQ(s.Receive(300ms), protocol::EncodeFrame(protocol::kPong, {}));
}

TEST(NodeServer, ConcurrentReadsLatchAtomically) {
  NodeServer server({}, Ephemeral());
  const auto port = server.Start();
  {
    NodeClient setup;
    setup.Connect("127.0.0.1", port);
    setup.LoadManifest(ManifestToText(testing::FixtureManifest("linear2x1")));
    setup.FpgaOn();
    setup.ReadChannel(1);
  }
  constexpr int kThreads = 4;
  constexpr int kInfers = 200;
  std::vector<std::uint64_t> seen(kThreads, 0);
  std::vector<std::thread> workers;
  for (int t = 0; t < kThreads; ++t) {
    workers.emplace_back([&, t] {
      NodeClient c;
      c.Connect("127.0.0.1", port);
      for (int i = 0; i < kInfers; ++i) {
        c.Infer(std::vector<Code>{static_cast<Code>(i), static_cast<Code>(-t)});
        if (i % 7 == 0) seen[t] += c.ReadChannel(1).samples;
      }
    });
  }
  for (auto& w : workers) w.join();
  NodeClient last;
  last.Connect("127.0.0.1", port);
  std::uint64_t total = last.ReadChannel(1).samples;
  for (auto v : seen) total += v;
  EXPECT_EQ(total, static_cast<std::uint64_t>(kThreads * kInfers));
}

TEST(NodeServer, WithDeviceWhenStopped) {
  NodeServer server;
  EXPECT_EQ(server.WithDevice([](Device& d) { return d.sim_time_ns(); }), 0u);
}

}  // namespace
}  // namespace accelforge::nodesim
