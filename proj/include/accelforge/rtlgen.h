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
#ifndef ACCELFORGE_RTLGEN_H_
#define ACCELFORGE_RTLGEN_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "accelforge/estimator.h"
#include "accelforge/quantizer.h"
#include "json.hpp"

namespace accelforge {

struct LayerSchedule {
  std::size_t index = 0;
  std::string kind;
  std::string entity;
  std::uint64_t cycles = 0;
  std::uint64_t ops = 0;
};

// Machine-readable summary of a generated accelerator. The node simulator
// loads this in place of a bitfile, so it carries the quantized model too.
struct AcceleratorManifest {
  std::string model_name;
  std::string top_entity;
  std::string device;
  FixedPointFormat format;
  double clock_mhz = 100.0;
  std::uint32_t parallel_macs = 1;
  std::uint32_t layer_overhead = 10;
  std::uint64_t cycles_per_inference = 0;
  std::uint64_t ops = 0;
  ResourceEstimate resources;
  std::size_t input_len = 0;
  std::size_t output_len = 0;
  std::vector<LayerSchedule> schedule;
  QuantizedModel model;
  std::optional<nlohmann::json> quantization;  // QuantizationReport section
};

nlohmann::ordered_json ManifestToJson(const AcceleratorManifest& manifest);
// Throws kMalformedDocument (or model errors) on invalid input.
AcceleratorManifest ManifestFromJson(const nlohmann::json& j);
AcceleratorManifest ParseManifest(std::string_view document);
std::string ManifestToText(const AcceleratorManifest& manifest);

struct RtlBundle {
  std::map<std::string, std::string> files;  // file name -> contents
  AcceleratorManifest manifest;
  std::vector<std::string> warnings;
};

struct GenOptions {
  DeviceProfile device = DefaultDevice();
  bool force = false;  // emit even when the resource estimate overflows
  // Testbench input vectors; empty selects GoldenVectors(model, 4).
  std::vector<std::vector<Code>> vectors;
  std::optional<nlohmann::json> quantization;
};

// Throws kResourceOverflow naming the exceeded resource(s) unless
// options.force is set, in which case the overflow becomes a warning.
RtlBundle GenerateRtl(const QuantizedModel& model, const GenConfig& cfg,
                      const GenOptions& options = {});

// Writes every bundle file into `dir` (created if needed).
void WriteBundle(const RtlBundle& bundle, const std::filesystem::path& dir);

// Deterministic input vectors: the first is all zeros, the rest are drawn
// from a fixed-seed mt19937_64 over [-2.0, 2.0] in the model's format.
std::vector<std::vector<Code>> GoldenVectors(const QuantizedModel& model, std::size_t count,
                                             std::uint64_t seed = 0x5EEDu);

// VHDL identifier derived from a model name.
std::string VhdlIdentifier(std::string_view name);

// Two's-complement bit-string literal: x"0080" when n is a multiple of 4,
// otherwise the VHDL-2008 sized form, e.g. 18x"3FFFF".
std::string HexLiteral(std::int64_t code, int total_bits);

// VHDL constant declarations for a tensor: <NAME>_DEPTH and <NAME>, one
// literal per code in row-major order. An empty tensor yields depth 0.
std::string RenderRom(const QuantizedTensor& tensor, std::string_view name);

// Recovers the codes of every literal in `text`, in order of appearance.
std::vector<Code> ParseHexLiterals(std::string_view text, FixedPointFormat fmt);

struct TestbenchSpec {
  std::string top_entity;
  std::uint64_t expected_cycles = 0;
  double clock_mhz = 100.0;
};

// Self-checking testbench with inputs and fixsim outputs embedded as
// constants. Throws kInputLengthMismatch for a vector of the wrong length
// and kInvalidConfig for an empty vector list.
std::string GenerateTestbench(const QuantizedModel& model,
                              const std::vector<std::vector<Code>>& vectors,
                              const TestbenchSpec& spec);

// Minimal structural check on generated VHDL: every entity, architecture,
// package and process is closed. Returns problems found, empty if none.
std::vector<std::string> CheckVhdlStructure(std::string_view text);

}  // namespace accelforge

#endif  // ACCELFORGE_RTLGEN_H_
