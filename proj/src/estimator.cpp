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
#include "accelforge/estimator.h"

#include <cmath>

namespace accelforge {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::uint64_t CeilDiv(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

std::uint64_t Ceil(double v) { return static_cast<std::uint64_t>(std::ceil(v)); }

void ReadCost(const json& j, const char* key, double& field) {
  if (auto it = j.find(key); it != j.end()) {
    if (!it->is_number() || it->get<double>() < 0.0) {
      throw Error(ErrorCode::kInvalidConfig, std::string("cost_model.") + key + " must be >= 0");
    }
    field = it->get<double>();
  }
}

std::uint64_t ReadCapacity(const json& j, const char* key, const std::string& device) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_unsigned() || it->get<std::uint64_t>() == 0) {
    throw Error(ErrorCode::kInvalidConfig,
                "device '" + device + "' needs a positive capacity." + key);
  }
  return it->get<std::uint64_t>();
}

}  // namespace

void GenConfig::Validate() const {
  if (parallel_macs < 1) throw Error(ErrorCode::kInvalidConfig, "parallel MACs must be >= 1");
  if (!(clock_mhz > 0.0) || !std::isfinite(clock_mhz)) {
    throw Error(ErrorCode::kNonpositiveClock, "clock must be > 0 MHz");
  }
}

DeviceProfile DefaultDevice() {
  DeviceProfile d;
  d.name = "xc7s15";
  d.part = "xc7s15ftgb196-1";
  // 8,000 LUTs, 16,000 FFs, 10 x 36 Kb block RAM, 20 DSP48E1.
  d.capacity = ResourceEstimate{8000, 16000, 10 * 36864, 20};
  d.default_clock_mhz = 100.0;
  return d;
}

std::vector<DeviceProfile> BuiltinDevices() {
  DeviceProfile s6;
  s6.name = "xc7s6";
  s6.part = "xc7s6ftgb196-1";
  s6.capacity = ResourceEstimate{3750, 7500, 5 * 36864, 10};
  s6.default_clock_mhz = 100.0;
  return {DefaultDevice(), s6};
}

std::vector<DeviceProfile> ParseDeviceProfiles(std::string_view document) {
  json doc = json::parse(document.begin(), document.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("devices") ||
      !doc["devices"].is_array()) {
    throw Error(ErrorCode::kInvalidConfig, "devices file needs a 'devices' array");
  }
  std::vector<DeviceProfile> out;
  for (const json& d : doc["devices"]) {
    if (!d.is_object() || !d.contains("name") || !d["name"].is_string() ||
        !d.contains("capacity") || !d["capacity"].is_object()) {
      throw Error(ErrorCode::kInvalidConfig, "device entries need 'name' and 'capacity'");
    }
    DeviceProfile p;
    p.name = d["name"].get<std::string>();
    p.part = d.value("part", p.name);
    p.default_clock_mhz = d.value("default_clock_mhz", 100.0);
    if (!(p.default_clock_mhz > 0.0)) {
      throw Error(ErrorCode::kInvalidConfig, "device '" + p.name + "' needs a positive clock");
    }
    const json& cap = d["capacity"];
    p.capacity.luts = ReadCapacity(cap, "luts", p.name);
    p.capacity.ffs = ReadCapacity(cap, "ffs", p.name);
    p.capacity.bram_bits = ReadCapacity(cap, "bram_bits", p.name);
    p.capacity.dsp_slices = ReadCapacity(cap, "dsp_slices", p.name);
    if (auto it = d.find("cost_model"); it != d.end()) {
      const json& c = *it;
      ReadCost(c, "lut_base_per_layer", p.cost.lut_base_per_layer);
      ReadCost(c, "ff_base_per_layer", p.cost.ff_base_per_layer);
      ReadCost(c, "lut_per_mac_bit", p.cost.lut_per_mac_bit);
      ReadCost(c, "lut_per_buffer_bit", p.cost.lut_per_buffer_bit);
      ReadCost(c, "ff_per_buffer_bit", p.cost.ff_per_buffer_bit);
      ReadCost(c, "ff_per_acc_bit", p.cost.ff_per_acc_bit);
      ReadCost(c, "lut_per_activation_bit", p.cost.lut_per_activation_bit);
    }
    out.push_back(std::move(p));
  }
  return out;
}

ordered_json DeviceProfilesToJson(const std::vector<DeviceProfile>& devices) {
  ordered_json list = ordered_json::array();
  for (const DeviceProfile& d : devices) {
    list.push_back({{"name", d.name},
                    {"part", d.part},
                    {"default_clock_mhz", d.default_clock_mhz},
                    {"capacity",
                     {{"luts", d.capacity.luts},
                      {"ffs", d.capacity.ffs},
                      {"bram_bits", d.capacity.bram_bits},
                      {"dsp_slices", d.capacity.dsp_slices}}},
                    {"cost_model",
                     {{"lut_base_per_layer", d.cost.lut_base_per_layer},
                      {"ff_base_per_layer", d.cost.ff_base_per_layer},
                      {"lut_per_mac_bit", d.cost.lut_per_mac_bit},
                      {"lut_per_buffer_bit", d.cost.lut_per_buffer_bit},
                      {"ff_per_buffer_bit", d.cost.ff_per_buffer_bit},
                      {"ff_per_acc_bit", d.cost.ff_per_acc_bit},
                      {"lut_per_activation_bit", d.cost.lut_per_activation_bit}}}});
  }
  return ordered_json{{"devices", std::move(list)}};
}

DeviceProfile FindDevice(const std::vector<DeviceProfile>& devices, std::string_view name) {
  for (const DeviceProfile& d : devices) {
    if (d.name == name) return d;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown device '" + std::string(name) + "'");
}

int AccumulatorWidth(int total_bits, std::size_t terms) {
  int log = 0;
  while ((std::uint64_t{1} << log) < terms + 1) ++log;
  return 2 * total_bits + log;
}

std::uint64_t LayerCycleCount(const LayerSpec& layer, std::size_t input_length,
                              const GenConfig& cfg) {
  const std::uint64_t p = cfg.parallel_macs;
  const std::uint64_t k = cfg.layer_overhead;
  return std::visit(
      Overloaded{
          [&](const LinearLayer& l) { return CeilDiv(l.in_features, p) * l.out_features + k; },
          [&](const LstmLayer& l) {
            const std::uint64_t h = l.hidden_size;
            return l.steps * (CeilDiv(l.input_size + h, p) * 4 * h + 9 * h) + k;
          },
          [&](const ActivationLayer&) { return CeilDiv(input_length, p) + k; },
      },
      layer);
}

std::uint64_t CycleCount(const ModelGraph& graph, const GenConfig& cfg) {
  cfg.Validate();
  std::uint64_t total = 0;
  std::size_t len = graph.input_length();
  for (const LayerSpec& layer : graph.layers) {
    total += LayerCycleCount(layer, len, cfg);
    len = LayerOutputLength(layer, len);
  }
  return total;
}

std::uint64_t CycleCount(const QuantizedModel& model, const GenConfig& cfg) {
  return CycleCount(model.graph, cfg);
}

double InferenceTimeUs(std::uint64_t cycles, double clock_mhz) {
  if (!(clock_mhz > 0.0)) throw Error(ErrorCode::kNonpositiveClock, "clock must be > 0 MHz");
  return static_cast<double>(cycles) / clock_mhz;
}

double EnergyUj(double power_mw, double time_us) {
  if (power_mw < 0.0 || time_us < 0.0) {
    throw Error(ErrorCode::kNegativeInput, "power and time must be >= 0");
  }
  return power_mw * time_us * 1e-3;
}

double EfficiencyGopPerJ(std::uint64_t ops, double energy_uj) {
  if (!(energy_uj > 0.0)) throw Error(ErrorCode::kZeroEnergy, "energy must be > 0");
  return static_cast<double>(ops) / (energy_uj * 1e-6) / 1e9;
}

ResourceFit EstimateResources(const QuantizedModel& model, const GenConfig& cfg,
                              const DeviceProfile& device) {
  cfg.Validate();
  const CostModel& c = device.cost;
  const double n = model.format.total_bits;
  const double p = cfg.parallel_macs;
  ResourceEstimate est;
  std::size_t len = model.input_length();
  for (const QuantizedLayer& layer : model.layers) {
    std::visit(
        Overloaded{
            [&](const QuantizedLinear& l) {
              const double buffer = static_cast<double>(l.in_features + l.out_features) * n;
              const double acc = AccumulatorWidth(model.format.total_bits, l.in_features);
              est.luts += Ceil(c.lut_base_per_layer + c.lut_per_mac_bit * p * n +
                               c.lut_per_buffer_bit * buffer);
              est.ffs += Ceil(c.ff_base_per_layer + c.ff_per_buffer_bit * buffer +
                              c.ff_per_acc_bit * acc);
              est.bram_bits += (l.weights.codes.size() + l.bias.codes.size()) *
                               static_cast<std::uint64_t>(model.format.total_bits);
              est.dsp_slices += cfg.parallel_macs;
              len = l.out_features;
            },
            [&](const QuantizedLstm& l) {
              const std::size_t h = l.hidden_size;
              const double buffer = static_cast<double>(l.steps * l.input_size + 6 * h) * n;
              const double acc = AccumulatorWidth(model.format.total_bits, l.input_size + h) +
                                 2.0 * n + 1.0;
              est.luts += Ceil(c.lut_base_per_layer + c.lut_per_mac_bit * p * n +
                               c.lut_per_buffer_bit * buffer + c.lut_per_activation_bit * 2.0 * n);
              est.ffs += Ceil(c.ff_base_per_layer + c.ff_per_buffer_bit * buffer +
                              c.ff_per_acc_bit * acc);
              est.bram_bits += (l.gate_weights.codes.size() + l.gate_bias.codes.size()) *
                               static_cast<std::uint64_t>(model.format.total_bits);
              est.dsp_slices += cfg.parallel_macs;
              len = h;
            },
            [&](const QuantizedActivation&) {
              const double buffer = 2.0 * static_cast<double>(len) * n;
              est.luts += Ceil(c.lut_base_per_layer + c.lut_per_activation_bit * p * n +
                               c.lut_per_buffer_bit * buffer);
              est.ffs += Ceil(c.ff_base_per_layer + c.ff_per_buffer_bit * buffer);
            },
        },
        layer);
  }

  ResourceFit fit{est, true, {}};
  const ResourceEstimate& cap = device.capacity;
  auto check = [&](std::uint64_t used, std::uint64_t limit, const char* name) {
    if (used > limit) {
      fit.fits = false;
      fit.exceeded.push_back(std::string(name) + " " + std::to_string(used) + " > " +
                             std::to_string(limit));
    }
  };
  check(est.luts, cap.luts, "luts");
  check(est.ffs, cap.ffs, "ffs");
  check(est.bram_bits, cap.bram_bits, "bram_bits");
  check(est.dsp_slices, cap.dsp_slices, "dsp_slices");
  return fit;
}

std::string_view ReportSourceName(ReportSource source) {
  return source == ReportSource::kEstimated ? "estimated" : "measured";
}

PerformanceReport MakeReport(ReportSource source, double power_mw, double time_us,
                             std::uint64_t ops, std::vector<double> channels) {
  PerformanceReport r;
  r.source = source;
  r.power_mw = power_mw;
  r.time_per_inference_us = time_us;
  r.ops = ops;
  r.energy_uj = EnergyUj(power_mw, time_us);
  r.gop_per_j = EfficiencyGopPerJ(ops, r.energy_uj);
  r.channels = std::move(channels);
  return r;
}

PerformanceReport BuildReport(const QuantizedModel& model, const GenConfig& cfg,
                              double power_mw) {
  const double time_us = InferenceTimeUs(CycleCount(model, cfg), cfg.clock_mhz);
  return MakeReport(ReportSource::kEstimated, power_mw, time_us, OpCount(model.graph));
}

ordered_json ReportToJson(const PerformanceReport& report) {
  return ordered_json{{"source", std::string(ReportSourceName(report.source))},
                      {"power_mw", report.power_mw},
                      {"time_per_inference_us", report.time_per_inference_us},
                      {"ops", report.ops},
                      {"energy_uj", report.energy_uj},
                      {"gop_per_j", report.gop_per_j},
                      {"channels", report.channels}};
}

PerformanceReport ReportFromJson(const json& j) {
  auto number = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw Error(ErrorCode::kMalformedDocument, std::string("report needs numeric '") + key + "'");
    }
    return j[key].get<double>();
  };
  if (!j.is_object()) throw Error(ErrorCode::kMalformedDocument, "report must be an object");
  PerformanceReport r;
  const std::string source = j.value("source", "");
  if (source == "estimated") {
    r.source = ReportSource::kEstimated;
  } else if (source == "measured") {
    r.source = ReportSource::kMeasured;
  } else {
    throw Error(ErrorCode::kMalformedDocument, "report source must be estimated|measured");
  }
  r.power_mw = number("power_mw");
  r.time_per_inference_us = number("time_per_inference_us");
  r.energy_uj = number("energy_uj");
  r.gop_per_j = number("gop_per_j");
  if (!j.contains("ops") || !j["ops"].is_number_unsigned()) {
    throw Error(ErrorCode::kMalformedDocument, "report needs unsigned 'ops'");
  }
  r.ops = j["ops"].get<std::uint64_t>();
  if (j.contains("channels")) {
    for (const json& c : j["channels"]) {
      if (!c.is_number()) throw Error(ErrorCode::kMalformedDocument, "channels must be numbers");
      r.channels.push_back(c.get<double>());
    }
  }
  return r;
}

std::string ReportToText(const PerformanceReport& report) {
  return ReportToJson(report).dump(2) + "\n";
}

}  // namespace accelforge
