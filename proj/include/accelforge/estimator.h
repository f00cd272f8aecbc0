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
#ifndef ACCELFORGE_ESTIMATOR_H_
#define ACCELFORGE_ESTIMATOR_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "accelforge/quantizer.h"
#include "json.hpp"

namespace accelforge {

// Time-multiplexing configuration of the generated datapath.
struct GenConfig {
  std::uint32_t parallel_macs = 1;   // P: MAC lanes shared by all rows of a layer
  double clock_mhz = 100.0;
  std::uint32_t layer_overhead = 10;  // K: fixed handshake/drain cycles per layer

  // Throws kInvalidConfig / kNonpositiveClock.
  void Validate() const;
};

struct ResourceEstimate {
  std::uint64_t luts = 0;
  std::uint64_t ffs = 0;
  std::uint64_t bram_bits = 0;
  std::uint64_t dsp_slices = 0;

  bool operator==(const ResourceEstimate&) const = default;
};

// Per-layer affine LUT/FF coefficients. These are calibration constants of
// the generated templates, not vendor figures; override them in devices.json.
struct CostModel {
  double lut_base_per_layer = 96.0;
  double ff_base_per_layer = 64.0;
  double lut_per_mac_bit = 2.0;        // accumulate adder per lane, per data bit
  double lut_per_buffer_bit = 0.5;     // operand muxing over buffered words
  double ff_per_buffer_bit = 1.0;      // input/output/state registers
  double ff_per_acc_bit = 1.0;         // accumulator registers
  double lut_per_activation_bit = 1.0;  // clamp/compare logic per lane
};

struct DeviceProfile {
  std::string name;
  std::string part;  // vendor part string, used only by the synthesis stub
  ResourceEstimate capacity;
  double default_clock_mhz = 100.0;
  CostModel cost;
};

// Built-in XC7S15-like profile. Capacities come from the vendor datasheet
// and are configuration.
DeviceProfile DefaultDevice();
std::vector<DeviceProfile> BuiltinDevices();

// devices.json: {"devices": [{"name", "part", "default_clock_mhz",
// "capacity": {"luts","ffs","bram_bits","dsp_slices"}, "cost_model": {...}}]}
std::vector<DeviceProfile> ParseDeviceProfiles(std::string_view document);
nlohmann::ordered_json DeviceProfilesToJson(const std::vector<DeviceProfile>& devices);
// Throws kInvalidConfig when no profile has that name.
DeviceProfile FindDevice(const std::vector<DeviceProfile>& devices, std::string_view name);

// Accumulator width for a dot product over `terms` operands at n bits.
int AccumulatorWidth(int total_bits, std::size_t terms);

// Cycles of one inference: sum over layers of
//   linear:     ceil(in / P) * out + K
//   lstm:       steps * (ceil((in + h) / P) * 4h + 9h) + K
//   activation: ceil(len / P) + K
std::uint64_t LayerCycleCount(const LayerSpec& layer, std::size_t input_length,
                              const GenConfig& cfg);
std::uint64_t CycleCount(const ModelGraph& graph, const GenConfig& cfg);
std::uint64_t CycleCount(const QuantizedModel& model, const GenConfig& cfg);

// cycles / MHz, in microseconds. Throws kNonpositiveClock.
double InferenceTimeUs(std::uint64_t cycles, double clock_mhz);
// mW * us * 1e-3, in microjoules. Throws kNegativeInput.
double EnergyUj(double power_mw, double time_us);
// ops / (uJ * 1e-6) / 1e9. Throws kZeroEnergy for energy <= 0.
double EfficiencyGopPerJ(std::uint64_t ops, double energy_uj);

struct ResourceFit {
  ResourceEstimate estimate;
  bool fits = true;
  std::vector<std::string> exceeded;  // names of resources over capacity
};

ResourceFit EstimateResources(const QuantizedModel& model, const GenConfig& cfg,
                              const DeviceProfile& device);

enum class ReportSource { kEstimated, kMeasured };

std::string_view ReportSourceName(ReportSource source);

// Shared schema of estimated and measured results.
struct PerformanceReport {
  ReportSource source = ReportSource::kEstimated;
  double power_mw = 0.0;
  double time_per_inference_us = 0.0;
  std::uint64_t ops = 0;
  double energy_uj = 0.0;
  double gop_per_j = 0.0;
  std::vector<double> channels;  // per-channel mW, may be empty
};

// Fills energy and efficiency from power, time and ops.
PerformanceReport MakeReport(ReportSource source, double power_mw, double time_us,
                             std::uint64_t ops, std::vector<double> channels = {});

// Estimated report for a model: cycles from the cost model at cfg.clock_mhz,
// ops from the model graph, power supplied by the caller's power profile.
PerformanceReport BuildReport(const QuantizedModel& model, const GenConfig& cfg,
                              double power_mw);

nlohmann::ordered_json ReportToJson(const PerformanceReport& report);
PerformanceReport ReportFromJson(const nlohmann::json& j);
// Pretty JSON text with a trailing newline.
std::string ReportToText(const PerformanceReport& report);

}  // namespace accelforge

#endif  // ACCELFORGE_ESTIMATOR_H_
