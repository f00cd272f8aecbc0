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
#ifndef ACCELFORGE_NODESIM_DEVICE_H_
#define ACCELFORGE_NODESIM_DEVICE_H_

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "accelforge/estimator.h"
#include "accelforge/rtlgen.h"
#include "json.hpp"

namespace accelforge::nodesim {

inline constexpr std::size_t kChannelCount = 8;

// Default channel map of the simulated board.
enum Channel : std::size_t {
  kMcu = 0,
  kFpgaCore = 1,
  kFpgaIo = 2,
  kSensors = 3,
  kExtension = 4,
  kFlash = 5,
  kSupplyOverhead = 6,
  kBatteryTotal = 7,
};

enum class FpgaState { kOff = 0, kConfiguring = 1, kIdle = 2, kRunning = 3 };

std::string_view FpgaStateName(FpgaState state);

using ChannelPowers = std::array<double, kChannelCount>;  // mW

// Per-channel power for each FPGA state. JSON form:
//   {"fpga_off": [8 x mW], "fpga_configuring": [...], "fpga_idle": [...],
//    "fpga_running": [...], "channel_names": [8 x text] (optional)}
struct PowerProfile {
  std::array<ChannelPowers, 4> by_state{};
  std::array<std::string, kChannelCount> channel_names{
      "mcu", "fpga_core", "fpga_io", "sensors", "extension", "flash", "supply_overhead",
      "battery_total"};

  const ChannelPowers& operator[](FpgaState s) const {
    return by_state[static_cast<std::size_t>(s)];
  }
  ChannelPowers& operator[](FpgaState s) { return by_state[static_cast<std::size_t>(s)]; }

  static PowerProfile Default();
  // Throws kInvalidProfile on missing states, wrong channel count or negative power.
  static PowerProfile Parse(std::string_view document);
  nlohmann::ordered_json ToJson() const;
};

// Energy-meter channel: a 48-bit wrapping energy register in picojoules plus
// a sample counter and elapsed-time register. Reading latches all three and
// clears the live registers in one step.
class ChannelAccumulator {
 public:
  static constexpr std::uint64_t kEnergyMask = (std::uint64_t{1} << 48) - 1;

  struct Reading {
    std::uint64_t energy_pj = 0;
    std::uint64_t samples = 0;
    std::uint64_t elapsed_ns = 0;
    std::uint32_t avg_uw = 0;  // 0 when samples == 0
  };

  void Accumulate(std::uint64_t energy_pj, std::uint64_t dt_ns);
  Reading LatchAndClear();

  std::uint64_t energy_pj() const { return energy_pj_; }
  std::uint64_t samples() const { return samples_; }
  const Reading& latched() const { return latched_; }

 private:
  std::uint64_t energy_pj_ = 0;
  std::uint64_t samples_ = 0;
  std::uint64_t elapsed_ns_ = 0;
  Reading latched_;
};

struct DeviceConfig {
  PowerProfile profile = PowerProfile::Default();
  double noise_mw = 0.0;  // stddev of Gaussian noise added per step and channel
  std::uint64_t noise_seed = 1;
  double config_time_us = 1000.0;  // dwell in Configuring on FPGA_ON / reload
  // Fault injection for end-to-end checks: flips the low bit of the first
  // weight code of the loaded model.
  bool corrupt_model = false;
};

struct InferenceResult {
  std::vector<Code> outputs;
  std::uint64_t elapsed_ns = 0;
};

// The simulated node. Not synchronized; DeviceLoop serializes access.
class Device {
 public:
  explicit Device(DeviceConfig config = {});

  FpgaState fpga_state() const { return state_; }
  bool manifest_loaded() const { return manifest_.has_value(); }
  const AcceleratorManifest* manifest() const { return manifest_ ? &*manifest_ : nullptr; }
  std::uint64_t sim_time_ns() const { return sim_time_ns_; }
  double sim_time_us() const { return static_cast<double>(sim_time_ns_) / 1000.0; }
  const DeviceConfig& config() const { return config_; }
  const ChannelAccumulator& channel(std::size_t ch) const { return channels_.at(ch); }

  // Replaces the loaded accelerator; a powered FPGA reconfigures.
  void LoadManifest(AcceleratorManifest manifest);
  void FpgaOn();
  void FpgaOff();

  // Advances simulated time in the current state and returns the energy (pJ)
  // added to each channel. Throws kNonpositiveStep for dt <= 0 or dt below
  // the 1 ns time base.
  std::array<std::uint64_t, kChannelCount> StepTime(double dt_us);
  std::array<std::uint64_t, kChannelCount> StepTimeNs(std::uint64_t dt_ns);

  // Idle -> Running for cycles/clock of simulated time -> Idle. Throws
  // kFpgaOff, kNoManifest, kBadInputLength.
  InferenceResult RunInference(std::span<const Code> input);

  // Throws kBadChannel for ch >= 8.
  ChannelAccumulator::Reading ReadChannel(std::size_t ch);

  // One streaming interval: advances time and returns the per-channel mean
  // power over it in uW. Accumulators are not latched.
  std::array<std::uint32_t, kChannelCount> StreamTick(double interval_us);

  // Runs `runs` inferences with all channels read before and after the batch.
  PerformanceReport MeasureReport(unsigned runs);

 private:
  void Configure();

  DeviceConfig config_;
  FpgaState state_ = FpgaState::kOff;
  std::optional<AcceleratorManifest> manifest_;
  std::uint64_t sim_time_ns_ = 0;
  std::array<ChannelAccumulator, kChannelCount> channels_{};
  std::mt19937_64 noise_rng_;
};

// round(energy * 1000 / elapsed) with integer arithmetic; 0 for elapsed 0.
std::uint32_t AveragePowerUw(std::uint64_t energy_pj, std::uint64_t elapsed_ns);

}  // namespace accelforge::nodesim

#endif  // ACCELFORGE_NODESIM_DEVICE_H_
