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
// Acceptance gate: runs every release criterion at its tolerance and prints
// one PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "accelforge/fixsim.h"
#include "accelforge/nodesim/protocol.h"
#include "accelforge/nodesim/server.h"
#include "accelforge/workflow.h"
#include "nodesim_util.h"
#include "protocol_util.h"
#include "rational_oracle.h"
#include "vhdl_util.h"

namespace accelforge {
namespace {

namespace fs = std::filesystem;
using oracle::cpp_int;
using oracle::cpp_rational;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
  void Check(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail.clear();
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

bool RelClose(double got, double want, double rel) {
  return std::abs(got - want) <= rel * std::abs(want);
}

PerformanceReport ParseReport(const std::string& text) {
  return ReportFromJson(nlohmann::json::parse(text));
}

// ---------------------------------------------------------------- 1

Outcome EstimateColumn() {
  Outcome o;
  testing::TempDir tmp;
  workflow::WriteFile(tmp.path() / "manifest.json",
                      ManifestToText(testing::OverriddenManifest(5332, 18811)));
  workflow::EstimateOptions opt;
  opt.build = tmp.path();
  opt.power_profile = testing::SourcePath("config/power_profile_estimate.json");
  std::ostringstream out, err;
  const auto start = Clock::now();
  const int code = workflow::CmdEstimate(opt, out, err);
  const double secs = Seconds(start);
  o.Check(code == 0, "exit " + std::to_string(code) + ": " + err.str());
  if (code != 0) return o;
  const PerformanceReport r = ParseReport(out.str());
  o.Check(r.power_mw == 70.0, fmt::format("power {} mW", r.power_mw));
  o.Check(r.time_per_inference_us == 53.32, fmt::format("time {} us", r.time_per_inference_us));
  o.Check(RelClose(r.energy_uj, 3.7324, 1e-9), fmt::format("energy {} uJ", r.energy_uj));
  o.Check(RelClose(r.gop_per_j, 5.04, 0.005), fmt::format("efficiency {} GOP/J", r.gop_per_j));
  o.Check(secs < 1.0, fmt::format("runtime {:.3f} s", secs));
  if (o.pass) {
    o.detail = fmt::format("{} mW, {} us, {:.4f} uJ, {:.3f} GOP/J in {:.3f} s", r.power_mw,
                           r.time_per_inference_us, r.energy_uj, r.gop_per_j, secs);
  }
  return o;
}

// ---------------------------------------------------------------- 2

Outcome MeasuredColumn() {
  Outcome o;
  testing::TempDir tmp;
  workflow::WriteFile(tmp.path() / "manifest.json",
                      ManifestToText(testing::OverriddenManifest(5725, 21663)));
  nodesim::ServerOptions so;
  so.port = 0;
  nodesim::NodeServer server({}, so);
  const std::uint16_t port = server.Start();

  workflow::MeasureOptions opt;
  opt.address = "127.0.0.1:" + std::to_string(port);
  opt.build = tmp.path();
  opt.runs = 100;
  std::ostringstream out, err;
  const auto start = Clock::now();
  const int code = workflow::CmdMeasure(opt, out, err);
  const double secs = Seconds(start);
  o.Check(code == 0, "exit " + std::to_string(code) + ": " + err.str());
  if (code != 0) return o;
  const PerformanceReport r = ParseReport(out.str());
  o.Check(r.power_mw == 71.0, fmt::format("power {} mW", r.power_mw));
  o.Check(r.time_per_inference_us == 57.25, fmt::format("time {} us", r.time_per_inference_us));
  o.Check(RelClose(r.gop_per_j, 5.33, 0.005), fmt::format("efficiency {} GOP/J", r.gop_per_j));
  o.Check(secs < 5.0, fmt::format("runtime {:.3f} s", secs));

  // The two published columns count different ops for the same network.
  const PerformanceReport est = MakeReport(ReportSource::kEstimated, 70.0, 53.32, 18811);
  workflow::WriteFile(tmp.path() / "est.json", ReportToText(est));
  workflow::WriteFile(tmp.path() / "meas.json", out.str());
  workflow::CompareOptions cmp;
  cmp.estimated = tmp.path() / "est.json";
  cmp.measured = tmp.path() / "meas.json";
  std::ostringstream cout_, cerr_;
  const int strict = workflow::CmdCompare(cmp, cout_, cerr_);
  o.Check(est.ops != r.ops, "ops columns unexpectedly agree");
  o.Check(strict == workflow::kExitInput &&
              cerr_.str().find("OpsMismatch") != std::string::npos,
          "ops mismatch not reported");
  cmp.allow_ops_mismatch = true;
  const int loose = workflow::CmdCompare(cmp, cout_, cerr_);
  o.Check(loose == 0, "compare with --allow-ops-mismatch failed");
  if (o.pass) {
    o.detail = fmt::format(
        "{} mW, {} us, {:.3f} GOP/J over 100 runs in {:.3f} s; ops {} vs {} flagged", r.power_mw,
        r.time_per_inference_us, r.gop_per_j, secs, est.ops, r.ops);
  }
  return o;
}

// ---------------------------------------------------------------- 3

// Moves grid weights off the grid so that quantization rounding is exercised.
void Jitter(ModelGraph& g, testing::Rng& rng, double ulp) {
  std::uniform_real_distribution<double> d(-ulp / 2, ulp / 2);
  for (LayerSpec& spec : g.layers) {
    if (auto* l = std::get_if<LinearLayer>(&spec)) {
      for (double& w : l->weights.data) w += d(rng);
      for (double& b : l->bias) b += d(rng);
    } else if (auto* l = std::get_if<LstmLayer>(&spec)) {
      for (double& w : l->gate_weights.data) w += d(rng);
      for (double& b : l->gate_bias) b += d(rng);
    }
  }
}

Outcome OracleEquivalence() {
  Outcome o;
  const auto fmt = FixedPointFormat::Make(16, 8);
  testing::Rng rng(2026);
  const auto start = Clock::now();
  int mismatches = 0;
  std::size_t compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    ModelGraph g = testing::RandomGraph(rng, fmt, 8, 4, 2.0);
    if (trial % 2) Jitter(g, rng, fmt.ulp());
    const auto model = QuantizeModel(g, fmt).first;
    const auto x = testing::RandomCodes(rng, g.input_length(), fmt, -4.0, 4.0);
    const auto got = fixsim::InferFixed(model, x).outputs;
    const auto want = oracle::Infer(g, fmt, x);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) same = cpp_int(got[i]) == want[i];
    compared += got.size();
    if (!same && ++mismatches == 1) o.Check(false, fmt::format("model {} differs", trial));
  }
  const double secs = Seconds(start);
  o.Check(mismatches == 0, fmt::format("{} mismatching models", mismatches));
  o.Check(secs < 60.0, fmt::format("runtime {:.1f} s", secs));
  if (o.pass) {
    o.detail = fmt::format("1000 models, {} outputs bit-identical in {:.2f} s", compared, secs);
  }
  return o;
}

// ---------------------------------------------------------------- 4

Outcome QuantizationProperties() {
  Outcome o;
  testing::Rng rng(4);
  std::size_t violations = 0;
  std::string first;
  auto violate = [&](const std::string& what) {
    if (violations++ == 0) first = what;
  };
  for (const char* spec : {"8.4", "16.8", "18.10"}) {
    const FixedPointFormat fmt = FixedPointFormat::Parse(spec);
    const oracle::Format of{fmt.total_bits, fmt.frac_bits};
    const double lo = fmt.min_code() * fmt.ulp();
    const double hi = fmt.max_code() * fmt.ulp();
    const cpp_rational half_ulp = cpp_rational(1, 2) / cpp_rational(of.scale());
    std::uniform_real_distribution<double> inside(lo, hi);
    std::uniform_real_distribution<double> wide(2 * lo, 2 * hi);
    std::uniform_int_distribution<std::int64_t> code(fmt.min_code(), fmt.max_code() - 1);

    std::vector<double> xs;
    for (int i = 0; i < 100000; ++i) {
      // A quarter of the samples are exact ties between two codes.
      xs.push_back(i % 4 == 0 ? (code(rng) + 0.5) * fmt.ulp() : inside(rng));
    }
    for (double x : xs) {
      const Code q = ToFixed(x, fmt);
      const cpp_rational err = oracle::Value(q, of) - cpp_rational(x);
      if ((err < 0 ? cpp_rational(-err) : err) > half_ulp) {
        violate(fmt::format("{}: |q({}) - x| > ulp/2", spec, x));
      }
      if (ToFixed(Dequantize(q, fmt), fmt) != q) violate(fmt::format("{}: q(q({})) != q", spec, x));
    }
    for (int i = 0; i < 100000; ++i) {
      double a = i % 2 ? wide(rng) : inside(rng);
      double b = i % 3 ? a + std::abs(wide(rng)) * 1e-3 : wide(rng);
      if (b < a) std::swap(a, b);
      if (ToFixed(a, fmt) > ToFixed(b, fmt)) violate(fmt::format("{}: q({}) > q({})", spec, a, b));
    }
    for (int i = 0; i < 1000; ++i) {
      const double big = wide(rng);
      const Code q = ToFixed(big, fmt);
      if (!InRange(q, fmt)) violate(fmt::format("{}: q({}) out of range", spec, big));
    }
  }
  o.Check(violations == 0, fmt::format("{} violations, first: {}", violations, first));
  if (o.pass) o.detail = "3 formats x 1e5 samples: bound, idempotence, monotonicity hold";
  return o;
}

// ---------------------------------------------------------------- 5

Outcome LinearErrorBound() {
  Outcome o;
  const auto fmt = FixedPointFormat::Make(16, 8);
  const oracle::Format of{fmt.total_bits, fmt.frac_bits};
  testing::Rng rng(5);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::size_t violations = 0, saturated = 0;
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t in = std::uniform_int_distribution<std::size_t>(1, 16)(rng);
    const std::size_t out = std::uniform_int_distribution<std::size_t>(1, 8)(rng);
    LinearLayer l{in, out, Matrix{out, in, std::vector<double>(in * out)},
                  testing::GridValues(rng, out, fmt, -1.0, 1.0 - fmt.ulp())};
    for (double& w : l.weights.data) w = unit(rng);
    ModelGraph g;
    g.name = "bound";
    g.input_shape = {in};
    g.layers.push_back(l);
    const auto model = QuantizeModel(g, fmt).first;
    const auto x = testing::RandomCodes(rng, in, fmt, -1.0, 1.0 - fmt.ulp());
    const auto y = fixsim::InferFixed(model, x).outputs;
    const cpp_rational bound =
        cpp_rational(static_cast<long long>(in + 1)) / (cpp_rational(of.scale()) * 2);
    for (std::size_t r = 0; r < out; ++r) {
      cpp_rational exact(l.bias[r]);
      for (std::size_t c = 0; c < in; ++c) {
        exact += cpp_rational(l.weights.at(r, c)) * oracle::Value(x[c], of);
      }
      if (y[r] == fmt.max_code() || y[r] == fmt.min_code()) ++saturated;
      cpp_rational err = oracle::Value(y[r], of) - exact;
      if (err < 0) err = -err;
      if (err > bound) ++violations;
      worst_ratio = std::max(worst_ratio, static_cast<double>(err / bound));
    }
  }
  o.Check(saturated == 0, fmt::format("{} saturated outputs", saturated));
  o.Check(violations == 0, fmt::format("{} outputs exceed (in+1)*2^-(f+1)", violations));
  if (o.pass) {
    o.detail = fmt::format("500 layers, worst error {:.3f} of the bound", worst_ratio);
  }
  return o;
}

// ---------------------------------------------------------------- 6

Outcome RtlGolden() {
  Outcome o;
  const auto fmt = FixedPointFormat::Make(16, 8);
  const std::map<std::string, std::uint32_t> cases{{"linear2x1", 1}, {"mlp", 4}, {"lstm", 3}};
  for (const auto& [fixture, p] : cases) {
    const ModelGraph g = ParseModel(
        testing::ReadText(testing::SourcePath("tests/fixtures/" + fixture + ".json")));
    const auto [model, report] = QuantizeModel(g, fmt);
    GenConfig cfg;
    cfg.parallel_macs = p;
    GenOptions opt;
    opt.quantization = ReportToJson(report);
    const RtlBundle b = GenerateRtl(model, cfg, opt);
    const fs::path dir = testing::SourcePath("tests/golden") / fixture;
    std::size_t on_disk = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++on_disk;
    o.Check(on_disk == b.files.size(), fixture + ": file set differs");
    for (const auto& [name, text] : b.files) {
      o.Check(testing::ReadText(dir / name) == text, fixture + "/" + name + " differs");
    }

    std::vector<std::int64_t> inputs, expected;
    for (const auto& v : GoldenVectors(model, 4)) {
      inputs.insert(inputs.end(), v.begin(), v.end());
      const auto y = fixsim::InferFixed(model, v).outputs;
      expected.insert(expected.end(), y.begin(), y.end());
    }
    const std::string& tb = b.files.at("tb_top.vhd");
    o.Check(testing::DecodeLiterals(testing::Block(tb, "TB_INPUTS"), 16) == inputs,
            fixture + ": testbench inputs");
    o.Check(testing::DecodeLiterals(testing::Block(tb, "TB_EXPECTED"), 16) == expected,
            fixture + ": testbench expected values differ from fixsim");
  }

  testing::Rng rng(6);
  int rom_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 32)(rng);
    const auto f = FixedPointFormat::Make(n, std::uniform_int_distribution<int>(0, n - 1)(rng));
    QuantizedTensor t{{}, {std::uniform_int_distribution<std::size_t>(0, 64)(rng)}, f};
    for (std::size_t i = 0; i < t.shape[0]; ++i) {
      t.codes.push_back(static_cast<Code>(
          std::uniform_int_distribution<std::int64_t>(f.min_code(), f.max_code())(rng)));
    }
    const std::string text = RenderRom(t, "R");
    const auto decoded = testing::DecodeLiterals(text, n);
    if (std::vector<std::int64_t>(t.codes.begin(), t.codes.end()) != decoded ||
        ParseHexLiterals(text, f) != t.codes) {
      ++rom_failures;
    }
  }
  o.Check(rom_failures == 0, fmt::format("{} ROM round trips failed", rom_failures));
  if (o.pass) o.detail = "3 bundles byte-identical, 1000 ROM round trips, testbench = fixsim";
  return o;
}

// ---------------------------------------------------------------- 7

class Socket {
 public:
  explicit Socket(std::uint16_t port) : fd_(::socket(AF_INET, SOCK_STREAM, 0)) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    ok_ = ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0;
  }
  ~Socket() { ::close(fd_); }
  bool ok() const { return ok_; }
  bool Send(const testing::Bytes& b) {
    std::size_t sent = 0;
    while (sent < b.size()) {
      const ssize_t n = ::send(fd_, b.data() + sent, b.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) return false;
      sent += static_cast<std::size_t>(n);
    }
    return true;
  }
  // Reads until `quiet` elapses without data.
  testing::Bytes Drain(std::chrono::milliseconds quiet) {
    testing::Bytes out;
    for (;;) {
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(quiet.count())) <= 0) break;
      std::uint8_t buf[8192];
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n <= 0) break;
      out.insert(out.end(), buf, buf + n);
    }
    return out;
  }

 private:
  int fd_;
  bool ok_ = false;
};

// Splits a response stream with the test-side framing rules.
bool SplitResponses(const testing::Bytes& stream, std::vector<testing::Bytes>* frames) {
  std::size_t at = 0;
  while (at < stream.size()) {
    if (stream.size() - at < 5) return false;
    const std::size_t len = stream[at + 2] | (stream[at + 3] << 8);
    if (stream.size() - at < 5 + len) return false;
    frames->emplace_back(stream.begin() + at, stream.begin() + at + 5 + len);
    at += 5 + len;
  }
  return true;
}

Outcome ProtocolRobustness() {
  Outcome o;
  const std::string manifest = ManifestToText(testing::FixtureManifest("linear2x1"));
  testing::Rng rng(7);

  // Direct dispatch with a shadow check of the FPGA state.
  nodesim::Device d;
  int invalid = 0, unsafe = 0, results = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto state = d.fpga_state();
    const auto r = nodesim::HandleFrame(d, testing::RandomFrame(rng, manifest));
    if (!testing::ValidResponse(r)) ++invalid;
    if (r.size() > 1 && r[1] == nodesim::protocol::kInferResult) {
      ++results;
      if (state == nodesim::FpgaState::kOff || state == nodesim::FpgaState::kConfiguring) {
        ++unsafe;
      }
    }
  }
  o.Check(invalid == 0, fmt::format("{} invalid responses", invalid));
  o.Check(unsafe == 0, fmt::format("{} results while unpowered", unsafe));
  o.Check(results > 0, "fuzzer never reached a valid inference");

  // The same stream through a live server.
  nodesim::ServerOptions so;
  so.port = 0;
  so.partial_frame_timeout = std::chrono::milliseconds(200);
  nodesim::NodeServer server({}, so);
  const auto port = server.Start();
  const auto start = Clock::now();
  Socket s(port);
  o.Check(s.ok(), "cannot connect");
  testing::Bytes stream;
  testing::Rng wire_rng(8);
  for (int i = 0; i < 10000; ++i) {
    const auto f = testing::RandomFrame(wire_rng, manifest);
    stream.insert(stream.end(), f.begin(), f.end());
  }
  std::vector<testing::Bytes> frames;
  o.Check(s.Send(stream), "server closed the connection");
  bool framed = SplitResponses(s.Drain(std::chrono::milliseconds(500)), &frames);
  const std::size_t fuzz_responses = frames.size();
  o.Check(s.Send(nodesim::protocol::EncodeFrame(nodesim::protocol::kPing, {})), "send ping");
  testing::Bytes tail = s.Drain(std::chrono::milliseconds(300));
  framed = framed && SplitResponses(tail, &frames);
  o.Check(framed, "response stream is not framed");
  int bad = 0;
  for (const auto& f : frames) bad += testing::ValidResponse(f) ? 0 : 1;
  o.Check(bad == 0, fmt::format("{} invalid frames on the wire", bad));
  o.Check(!frames.empty() && frames.back() == nodesim::protocol::EncodeFrame(
                                                  nodesim::protocol::kPong, {}),
          "server did not answer PING after the fuzz stream");
  o.Check(server.running(), "server stopped");
  const double secs = Seconds(start);
  o.Check(secs < 30.0, fmt::format("wire fuzz took {:.1f} s", secs));
  if (o.pass) {
    o.detail = fmt::format(
        "10000 frames dispatched ({} results, none unpowered); 10000 over TCP -> {} valid "
        "responses, PING answered after",
        results, fuzz_responses);
  }
  return o;
}

// ---------------------------------------------------------------- 8

Outcome EnergyAccounting() {
  Outcome o;
  // 10 us Running (1000 cycles) then 90 us Idle, and the same duty at 57.25 us.
  for (const auto& [cycles, idle_us] : {std::pair<std::uint64_t, double>{1000, 90.0},
                                        std::pair<std::uint64_t, double>{5725, 57.25 * 9}}) {
    nodesim::Device d;
    d.LoadManifest(testing::OverriddenManifest(cycles, 21663));
    d.FpgaOn();
    for (std::size_t c = 0; c < nodesim::kChannelCount; ++c) d.ReadChannel(c);
    const std::vector<Code> zeros(d.manifest()->input_len, 0);
    for (int i = 0; i < 100; ++i) {
      d.RunInference(zeros);
      d.StepTime(idle_us);
    }
    const auto first = d.ReadChannel(nodesim::kFpgaCore);
    const auto second = d.ReadChannel(nodesim::kFpgaCore);
    o.Check(first.avg_uw == 11600 && first.energy_pj * 1000 == 11600 * first.elapsed_ns,
            fmt::format("duty-cycle average {} uW", first.avg_uw));
    o.Check(second.samples == 0, fmt::format("second read has {} samples", second.samples));
  }

  std::uint64_t total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto [read, injected] = testing::ConservationScenario(seed, 5000);
    o.Check(read == injected, fmt::format("seed {}: read-out energy differs", seed));
    for (auto e : injected) total += e;
  }
  if (o.pass) {
    o.detail = fmt::format("11.600 mW at 10% duty, double read empty, {:.3f} mJ conserved",
                           static_cast<double>(total) / 1e9);
  }
  return o;
}

}  // namespace
}  // namespace accelforge

int main() {
  using accelforge::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"estimation column", accelforge::EstimateColumn},
      {"measured column end to end", accelforge::MeasuredColumn},
      {"oracle equivalence", accelforge::OracleEquivalence},
      {"quantization properties", accelforge::QuantizationProperties},
      {"linear error bound", accelforge::LinearErrorBound},
      {"rtl golden stability", accelforge::RtlGolden},
      {"protocol robustness", accelforge::ProtocolRobustness},
      {"energy accounting", accelforge::EnergyAccounting},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
