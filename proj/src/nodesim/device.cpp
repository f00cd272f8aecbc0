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
#include "accelforge/nodesim/device.h"

#include <cmath>
#include <limits>

#include "accelforge/fixsim.h"

namespace accelforge::nodesim {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<const char*, 4> kStateKeys = {"fpga_off", "fpga_configuring", "fpga_idle",
                                                   "fpga_running"};

}  // namespace

std::string_view FpgaStateName(FpgaState state) {
  switch (state) {
    case FpgaState::kOff: return "off";
    case FpgaState::kConfiguring: return "configuring";
    case FpgaState::kIdle: return "idle";
    case FpgaState::kRunning: return "running";
  }
  return "off";
}

PowerProfile PowerProfile::Default() {
  PowerProfile p;
  p[FpgaState::kOff] = {25, 0, 0, 3, 0, 0, 2, 30};
  p[FpgaState::kConfiguring] = {25, 40, 10, 3, 0, 15, 2, 95};
  p[FpgaState::kIdle] = {25, 5, 2, 3, 0, 0, 2, 37};
  p[FpgaState::kRunning] = {25, 71, 8, 3, 0, 0, 2, 109};
  return p;
}

PowerProfile PowerProfile::Parse(std::string_view document) {
  json doc = json::parse(document.begin(), document.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::kInvalidProfile, "power profile must be a JSON object");
  }
  PowerProfile p;
  for (std::size_t s = 0; s < kStateKeys.size(); ++s) {
    auto it = doc.find(kStateKeys[s]);
    if (it == doc.end() || !it->is_array() || it->size() != kChannelCount) {
      throw Error(ErrorCode::kInvalidProfile,
                  std::string("'") + kStateKeys[s] + "' must list exactly 8 channel powers");
    }
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      const json& v = (*it)[c];
      if (!v.is_number() || !(v.get<double>() >= 0.0) || !std::isfinite(v.get<double>())) {
        throw Error(ErrorCode::kInvalidProfile,
                    std::string("'") + kStateKeys[s] + "' powers must be finite and >= 0");
      }
      p.by_state[s][c] = v.get<double>();
    }
  }
  if (auto it = doc.find("channel_names"); it != doc.end()) {
    if (!it->is_array() || it->size() != kChannelCount) {
      throw Error(ErrorCode::kInvalidProfile, "'channel_names' must have 8 entries");
    }
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      if (!(*it)[c].is_string()) {
        throw Error(ErrorCode::kInvalidProfile, "'channel_names' entries must be strings");
      }
      p.channel_names[c] = (*it)[c].get<std::string>();
    }
  }
  return p;
}

ordered_json PowerProfile::ToJson() const {
  ordered_json j;
  for (std::size_t s = 0; s < kStateKeys.size(); ++s) j[kStateKeys[s]] = by_state[s];
  j["channel_names"] = channel_names;
  return j;
}

std::uint32_t AveragePowerUw(std::uint64_t energy_pj, std::uint64_t elapsed_ns) {
  if (elapsed_ns == 0) return 0;
  const unsigned __int128 num = static_cast<unsigned __int128>(energy_pj) * 1000u;
  const unsigned __int128 avg = (num + elapsed_ns / 2) / elapsed_ns;
  return avg > std::numeric_limits<std::uint32_t>::max()
             ? std::numeric_limits<std::uint32_t>::max()
             : static_cast<std::uint32_t>(avg);
}

void ChannelAccumulator::Accumulate(std::uint64_t energy_pj, std::uint64_t dt_ns) {
  energy_pj_ = (energy_pj_ + energy_pj) & kEnergyMask;
  ++samples_;
  elapsed_ns_ += dt_ns;
}

ChannelAccumulator::Reading ChannelAccumulator::LatchAndClear() {
  latched_.energy_pj = energy_pj_;
  latched_.samples = samples_;
  latched_.elapsed_ns = elapsed_ns_;
  latched_.avg_uw = samples_ > 0 ? AveragePowerUw(energy_pj_, elapsed_ns_) : 0;
  energy_pj_ = 0;
  samples_ = 0;
  elapsed_ns_ = 0;
  return latched_;
}

Device::Device(DeviceConfig config)
    : config_(std::move(config)), noise_rng_(config_.noise_seed) {}

void Device::Configure() {
  state_ = FpgaState::kConfiguring;
  if (config_.config_time_us > 0.0) StepTime(config_.config_time_us);
  state_ = FpgaState::kIdle;
}

void Device::LoadManifest(AcceleratorManifest manifest) {
  if (config_.corrupt_model) {
    for (QuantizedLayer& layer : manifest.model.layers) {
      if (auto* l = std::get_if<QuantizedLinear>(&layer); l && !l->weights.codes.empty()) {
        l->weights.codes[0] ^= 1;
        break;
      }
      if (auto* l = std::get_if<QuantizedLstm>(&layer); l && !l->gate_weights.codes.empty()) {
        l->gate_weights.codes[0] ^= 1;
        break;
      }
    }
  }
  manifest_ = std::move(manifest);
  if (state_ != FpgaState::kOff) Configure();
}

void Device::FpgaOn() {
  if (state_ == FpgaState::kOff) Configure();
}

void Device::FpgaOff() { state_ = FpgaState::kOff; }

std::array<std::uint64_t, kChannelCount> Device::StepTime(double dt_us) {
  if (!(dt_us > 0.0) || !std::isfinite(dt_us)) {
    throw Error(ErrorCode::kNonpositiveStep, "time step must be > 0");
  }
  const auto dt_ns = static_cast<std::uint64_t>(std::llround(dt_us * 1000.0));
  if (dt_ns == 0) throw Error(ErrorCode::kNonpositiveStep, "time step is below 1 ns");
  return StepTimeNs(dt_ns);
}

std::array<std::uint64_t, kChannelCount> Device::StepTimeNs(std::uint64_t dt_ns) {
  if (dt_ns == 0) throw Error(ErrorCode::kNonpositiveStep, "time step must be > 0");
  std::array<std::uint64_t, kChannelCount> added{};
  const ChannelPowers& power = config_.profile[state_];
  std::normal_distribution<double> noise(0.0, config_.noise_mw > 0.0 ? config_.noise_mw : 1.0);
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    double mw = power[c];
    if (config_.noise_mw > 0.0) mw = std::max(0.0, mw + noise(noise_rng_));
    // mW x ns = pJ
    added[c] = static_cast<std::uint64_t>(std::llround(mw * static_cast<double>(dt_ns)));
    channels_[c].Accumulate(added[c], dt_ns);
  }
  sim_time_ns_ += dt_ns;
  return added;
}

InferenceResult Device::RunInference(std::span<const Code> input) {
  if (state_ == FpgaState::kOff || state_ == FpgaState::kConfiguring) {
    throw Error(ErrorCode::kFpgaOff, "FPGA is not powered");
  }
  if (!manifest_) throw Error(ErrorCode::kNoManifest, "no accelerator loaded");
  if (input.size() != manifest_->input_len) {
    throw Error(ErrorCode::kBadInputLength, "got " + std::to_string(input.size()) +
                                                " codes, expected " +
                                                std::to_string(manifest_->input_len));
  }
  for (Code c : input) {
    if (!InRange(c, manifest_->format)) {
      throw Error(ErrorCode::kBadInputLength, "input code " + std::to_string(c) +
                                                  " does not fit " +
                                                  manifest_->format.ToString());
    }
  }

  InferenceResult result;
  result.elapsed_ns = static_cast<std::uint64_t>(std::llround(
      static_cast<double>(manifest_->cycles_per_inference) * 1000.0 / manifest_->clock_mhz));
  state_ = FpgaState::kRunning;
  if (result.elapsed_ns > 0) StepTimeNs(result.elapsed_ns);
  result.outputs = fixsim::InferFixed(manifest_->model, input).outputs;
  state_ = FpgaState::kIdle;
  return result;
}

ChannelAccumulator::Reading Device::ReadChannel(std::size_t ch) {
  if (ch >= kChannelCount) {
    throw Error(ErrorCode::kBadChannel, "channel " + std::to_string(ch) + " does not exist");
  }
  return channels_[ch].LatchAndClear();
}

std::array<std::uint32_t, kChannelCount> Device::StreamTick(double interval_us) {
  const auto dt_ns = static_cast<std::uint64_t>(std::llround(interval_us * 1000.0));
  const auto added = StepTime(interval_us);
  std::array<std::uint32_t, kChannelCount> uw{};
  for (std::size_t c = 0; c < kChannelCount; ++c) uw[c] = AveragePowerUw(added[c], dt_ns);
  return uw;
}

PerformanceReport Device::MeasureReport(unsigned runs) {
  if (runs == 0) throw Error(ErrorCode::kInvalidConfig, "runs must be >= 1");
  if (state_ == FpgaState::kOff || state_ == FpgaState::kConfiguring) {
    throw Error(ErrorCode::kFpgaOff, "FPGA is not powered");
  }
  if (!manifest_) throw Error(ErrorCode::kNoManifest, "no accelerator loaded");

  for (std::size_t c = 0; c < kChannelCount; ++c) ReadChannel(c);
  const auto vectors = GoldenVectors(manifest_->model, std::min<unsigned>(runs, 16));
  std::uint64_t total_ns = 0;
  for (unsigned r = 0; r < runs; ++r) {
    total_ns += RunInference(vectors[r % vectors.size()]).elapsed_ns;
  }
  std::vector<double> channels(kChannelCount);
  for (std::size_t c = 0; c < kChannelCount; ++c) channels[c] = ReadChannel(c).avg_uw / 1000.0;

  const double time_us = static_cast<double>(total_ns) / runs / 1000.0;
  const double power_mw = channels[kFpgaCore];
  return MakeReport(ReportSource::kMeasured, power_mw, time_us, manifest_->ops,
                    std::move(channels));
}

}  // namespace accelforge::nodesim
