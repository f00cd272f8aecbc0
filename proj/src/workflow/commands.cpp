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
#include <signal.h>

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "accelforge/fixsim.h"
#include "accelforge/model_ir.h"
#include "accelforge/nodesim/client.h"
#include "accelforge/nodesim/server.h"
#include "accelforge/quantizer.h"
#include "accelforge/rtlgen.h"
#include "accelforge/workflow.h"
#include "fmt/format.h"
#include "json.hpp"

namespace accelforge::workflow {

namespace fs = std::filesystem;
using nlohmann::json;

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kResourceOverflow: return kExitResource;
    case ErrorCode::kConnectionFailed:
    case ErrorCode::kDeviceError: return kExitConnectivity;
    case ErrorCode::kOutputMismatch: return kExitMismatch;
    default: return kExitInput;
  }
}

namespace {

std::optional<double> Limit(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number() || !(it->get<double>() >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, std::string("threshold '") + key + "' must be >= 0");
  }
  return it->get<double>();
}

int Fail(std::ostream& err, const Error& e) {
  err << "error: " << e.what() << "\n";
  return ExitCodeFor(e.code());
}

void Emit(const std::string& text, const std::optional<fs::path>& path, std::ostream& out) {
  if (path) {
    WriteFile(*path, text);
  } else {
    out << text;
  }
}

AcceleratorManifest LoadManifestFrom(const fs::path& build, std::string* text = nullptr) {
  const fs::path path = build / "manifest.json";
  if (!fs::is_regular_file(path)) {
    throw Error(ErrorCode::kMissingManifest, "no manifest.json in '" + build.string() + "'");
  }
  std::string contents = ReadFile(path);
  AcceleratorManifest m = ParseManifest(contents);
  if (text) *text = std::move(contents);
  return m;
}

nodesim::PowerProfile LoadProfile(const std::optional<fs::path>& path) {
  if (!path) return nodesim::PowerProfile::Default();
  return nodesim::PowerProfile::Parse(ReadFile(*path));
}

}  // namespace

Thresholds Thresholds::Parse(std::string_view document) {
  json j = json::parse(document.begin(), document.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kMalformedDocument, "thresholds must be a JSON object");
  }
  return {Limit(j, "max_quant_mse"), Limit(j, "min_gop_per_j"), Limit(j, "max_time_us")};
}

Thresholds Thresholds::Load(const fs::path& path) { return Parse(ReadFile(path)); }

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::kIoError, "short write to '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string BundleDirName(std::string_view model_name) {
  std::string out;
  for (char c : model_name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "model";
  return out;
}

// ---------------------------------------------------------------- translate

int CmdTranslate(const TranslateOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const ModelGraph graph = ParseModel(ReadFile(o.model));
    for (const Diagnostic& d : Validate(graph)) {
      if (d.severity == Severity::kWarning) {
        err << "warning: " << d.code << " @" << d.layer << ": " << d.message << "\n";
      }
    }
    const FixedPointFormat fmt = FixedPointFormat::Parse(o.fixed);
    const auto devices =
        o.devices_file ? ParseDeviceProfiles(ReadFile(*o.devices_file)) : BuiltinDevices();
    const DeviceProfile device = FindDevice(devices, o.device);

    GenConfig cfg;
    cfg.clock_mhz = o.clock_mhz.value_or(device.default_clock_mhz);
    if (o.parallel_macs) cfg.parallel_macs = *o.parallel_macs;
    if (o.layer_overhead) cfg.layer_overhead = *o.layer_overhead;
    cfg.Validate();
    const Thresholds limits = o.thresholds ? Thresholds::Load(*o.thresholds) : Thresholds{};

    auto [model, report] = QuantizeModel(graph, fmt);
    GenOptions gen;
    gen.device = device;
    gen.force = o.force;
    gen.quantization = ReportToJson(report);
    const RtlBundle bundle = GenerateRtl(model, cfg, gen);
    for (const std::string& w : bundle.warnings) err << "warning: " << w << "\n";

    const fs::path dir = o.out / BundleDirName(graph.name);
    WriteBundle(bundle, dir);

    const AcceleratorManifest& m = bundle.manifest;
    out << fmt::format("bundle: {} ({} files)\n", dir.string(), bundle.files.size());
    out << fmt::format("format: {}  device: {}  clock: {} MHz  P: {}\n", fmt.ToString(),
                       device.name, cfg.clock_mhz, cfg.parallel_macs);
    out << fmt::format("cycles/inference: {}  ops: {}  time: {} us\n", m.cycles_per_inference,
                       m.ops, InferenceTimeUs(m.cycles_per_inference, cfg.clock_mhz));
    out << fmt::format("resources: {} LUT, {} FF, {} BRAM bits, {} DSP\n", m.resources.luts,
                       m.resources.ffs, m.resources.bram_bits, m.resources.dsp_slices);
    out << fmt::format("quantization: max abs error {:.6g}, mse {:.6g}, saturated {}\n",
                       report.max_abs_error, report.mean_squared_error,
                       report.saturation_count);

    if (limits.max_quant_mse) {
      const bool pass = report.mean_squared_error <= *limits.max_quant_mse;
      out << fmt::format("max_quant_mse: {:.6g} <= {:.6g} {}\n", report.mean_squared_error,
                         *limits.max_quant_mse, pass ? "PASS" : "FAIL");
      if (!pass) return kExitFail;
    }
    return kExitOk;
  } catch (const Error& e) {
    return Fail(err, e);
  } catch (const fs::filesystem_error& e) {
    err << "error: IoError: " << e.what() << "\n";
    return kExitInput;
  }
}

// ----------------------------------------------------------------- estimate

int CmdEstimate(const EstimateOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const AcceleratorManifest m = LoadManifestFrom(o.build);
    const nodesim::PowerProfile profile = LoadProfile(o.power_profile);
    const auto& running = profile[nodesim::FpgaState::kRunning];
    const PerformanceReport report =
        MakeReport(ReportSource::kEstimated, running[nodesim::kFpgaCore],
                   InferenceTimeUs(m.cycles_per_inference, m.clock_mhz), m.ops,
                   std::vector<double>(running.begin(), running.end()));
    Emit(ReportToText(report), o.out, out);
    return kExitOk;
  } catch (const Error& e) {
    return Fail(err, e);
  } catch (const fs::filesystem_error& e) {
    err << "error: IoError: " << e.what() << "\n";
    return kExitInput;
  }
}

// ------------------------------------------------------------------ measure

int CmdMeasure(const MeasureOptions& o, std::ostream& out, std::ostream& err) {
  try {
    if (o.runs == 0) throw Error(ErrorCode::kInvalidConfig, "--runs must be >= 1");
    std::string manifest_text;
    const AcceleratorManifest m = LoadManifestFrom(o.build, &manifest_text);
    if (manifest_text.size() > nodesim::protocol::kMaxPayload) {
      throw Error(ErrorCode::kBadInputLength,
                  fmt::format("manifest is {} bytes; the protocol carries at most {}",
                              manifest_text.size(), nodesim::protocol::kMaxPayload));
    }
    const auto [host, port] = nodesim::ParseAddress(o.address);
    const auto vectors = GoldenVectors(m.model, o.runs);

    nodesim::NodeClient client;
    client.Connect(host, port);
    client.Ping();
    client.LoadManifest(manifest_text);
    client.FpgaOn();
    for (std::uint8_t c = 0; c < nodesim::kChannelCount; ++c) client.ReadChannel(c);

    std::uint64_t total_ns = 0;
    for (unsigned r = 0; r < o.runs; ++r) {
      const auto& x = vectors[r];
      const auto result = client.Infer(x);
      const auto expected = fixsim::InferFixed(m.model, x).outputs;
      if (result.outputs != expected) {
        std::size_t at = 0;
        while (at < expected.size() && at < result.outputs.size() &&
               expected[at] == result.outputs[at]) {
          ++at;
        }
        throw Error(ErrorCode::kOutputMismatch,
                    fmt::format("run {}: node output differs from fixsim at element {}", r, at));
      }
      total_ns += result.elapsed_ns;
    }

    std::vector<double> channels(nodesim::kChannelCount);
    for (std::uint8_t c = 0; c < nodesim::kChannelCount; ++c) {
      channels[c] = client.ReadChannel(c).avg_uw / 1000.0;
    }
    client.FpgaOff();

    const double time_us = static_cast<double>(total_ns) / o.runs / 1000.0;
    const PerformanceReport report = MakeReport(
        ReportSource::kMeasured, channels[nodesim::kFpgaCore], time_us, m.ops, channels);
    Emit(ReportToText(report), o.out, out);
    return kExitOk;
  } catch (const Error& e) {
    return Fail(err, e);
  } catch (const fs::filesystem_error& e) {
    err << "error: IoError: " << e.what() << "\n";
    return kExitInput;
  }
}

// ------------------------------------------------------------------ compare

Comparison CompareReports(const PerformanceReport& est, const PerformanceReport& meas,
                          const Thresholds& limits) {
  Comparison c;
  auto row = [&](std::string name, double e, double m) {
    ComparisonRow r{std::move(name), e, m, m - e, std::nullopt};
    if (e != 0.0) r.delta_pct = (m - e) / e * 100.0;
    c.rows.push_back(std::move(r));
  };
  row("Power (mW)", est.power_mw, meas.power_mw);
  row("Time per inference (us)", est.time_per_inference_us, meas.time_per_inference_us);
  row("Energy efficiency (GOP/J)", est.gop_per_j, meas.gop_per_j);
  c.ops_match = est.ops == meas.ops;

  if (limits.min_gop_per_j) {
    c.checks.push_back({"min_gop_per_j", *limits.min_gop_per_j, meas.gop_per_j,
                        meas.gop_per_j >= *limits.min_gop_per_j});
  }
  if (limits.max_time_us) {
    c.checks.push_back({"max_time_us", *limits.max_time_us, meas.time_per_inference_us,
                        meas.time_per_inference_us <= *limits.max_time_us});
  }
  for (const auto& check : c.checks) c.pass = c.pass && check.pass;
  return c;
}

std::string FormatComparison(const Comparison& c) {
  std::string s = fmt::format("{:<27}{:>17}{:>19}{:>11}{:>10}\n", "", "From Estimation",
                              "From Elastic Node", "Delta", "Delta %");
  for (const auto& r : c.rows) {
    const std::string pct = r.delta_pct ? fmt::format("{:+.1f}%", *r.delta_pct) : "n/a";
    s += fmt::format("{:<27}{:>17.2f}{:>19.2f}{:>+11.2f}{:>10}\n", r.metric, r.estimated,
                     r.measured, r.delta, pct);
  }
  for (const auto& t : c.checks) {
    s += fmt::format("{} {:.6g} (limit {:.6g}): {}\n", t.name, t.value, t.limit,
                     t.pass ? "PASS" : "FAIL");
  }
  s += fmt::format("verdict: {}\n", c.pass ? "PASS" : "FAIL");
  return s;
}

int CmdCompare(const CompareOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const PerformanceReport est = ReportFromJson(json::parse(ReadFile(o.estimated)));
    const PerformanceReport meas = ReportFromJson(json::parse(ReadFile(o.measured)));
    const Thresholds limits = o.thresholds ? Thresholds::Load(*o.thresholds) : Thresholds{};
    if (est.ops != meas.ops) {
      const std::string msg =
          fmt::format("estimated report has {} ops, measured report has {}", est.ops, meas.ops);
      if (!o.allow_ops_mismatch) throw Error(ErrorCode::kOpsMismatch, msg);
      err << "warning: OpsMismatch: " << msg << "\n";
    }
    const Comparison c = CompareReports(est, meas, limits);
    out << FormatComparison(c);
    return c.pass ? kExitOk : kExitFail;
  } catch (const Error& e) {
    return Fail(err, e);
  } catch (const json::exception& e) {
    err << "error: MalformedDocument: " << e.what() << "\n";
    return kExitInput;
  }
}

// ----------------------------------------------------------------- node-sim

int CmdNodeSim(const NodeSimOptions& o, std::ostream& out, std::ostream& err) {
  try {
    nodesim::DeviceConfig config;
    config.profile = LoadProfile(o.power_profile);
    config.noise_mw = o.noise_mw;
    config.noise_seed = o.noise_seed;
    config.corrupt_model = o.inject_fault;
    if (!(o.noise_mw >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "--noise-mw must be >= 0");

    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    nodesim::ServerOptions server_options;
    server_options.bind_address = o.bind_address;
    server_options.port = o.port;
    nodesim::NodeServer server(config, server_options);
    const std::uint16_t port = server.Start();
    out << "node-sim listening on " << o.bind_address << ":" << port << std::endl;

    int sig = 0;
    sigwait(&stop_signals, &sig);
    server.Stop();
    out << "node-sim stopped" << std::endl;
    return kExitOk;
  } catch (const Error& e) {
    return Fail(err, e);
  }
}

}  // namespace accelforge::workflow
