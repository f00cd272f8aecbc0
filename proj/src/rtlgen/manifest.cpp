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
#include "accelforge/rtlgen.h"

namespace accelforge {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const json& Require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorCode::kMalformedDocument, std::string("manifest is missing '") + key + "'");
  }
  return *it;
}

std::uint64_t RequireUnsigned(const json& j, const char* key) {
  const json& v = Require(j, key);
  if (!v.is_number_unsigned()) {
    throw Error(ErrorCode::kMalformedDocument,
                std::string("manifest field '") + key + "' must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

}  // namespace

ordered_json ManifestToJson(const AcceleratorManifest& m) {
  ordered_json schedule = ordered_json::array();
  for (const LayerSchedule& s : m.schedule) {
    schedule.push_back({{"layer", s.index},
                        {"kind", s.kind},
                        {"entity", s.entity},
                        {"cycles", s.cycles},
                        {"ops", s.ops}});
  }
  ordered_json j{
      {"model_name", m.model_name},
      {"top_entity", m.top_entity},
      {"device", m.device},
      {"format", {{"total_bits", m.format.total_bits}, {"frac_bits", m.format.frac_bits}}},
      {"clock_mhz", m.clock_mhz},
      {"parallel_macs", m.parallel_macs},
      {"layer_overhead", m.layer_overhead},
      {"cycles_per_inference", m.cycles_per_inference},
      {"ops", m.ops},
      {"resources",
       {{"luts", m.resources.luts},
        {"ffs", m.resources.ffs},
        {"bram_bits", m.resources.bram_bits},
        {"dsp_slices", m.resources.dsp_slices}}},
      {"input_len", m.input_len},
      {"output_len", m.output_len},
      {"schedule", std::move(schedule)},
  };
  if (m.quantization) j["quantization"] = *m.quantization;
  j["model"] = QuantizedModelToJson(m.model);
  return j;
}

std::string ManifestToText(const AcceleratorManifest& manifest) {
  return ManifestToJson(manifest).dump(2) + "\n";
}

AcceleratorManifest ManifestFromJson(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kMalformedDocument, "manifest must be an object");
  AcceleratorManifest m;
  const json& top = Require(j, "top_entity");
  if (!top.is_string()) throw Error(ErrorCode::kMalformedDocument, "top_entity must be a string");
  m.top_entity = top.get<std::string>();
  m.model_name = j.value("model_name", m.top_entity);
  m.device = j.value("device", "");
  m.format = FormatFromJson(Require(j, "format"));
  const json& clock = Require(j, "clock_mhz");
  if (!clock.is_number() || !(clock.get<double>() > 0.0)) {
    throw Error(ErrorCode::kNonpositiveClock, "manifest clock_mhz must be > 0");
  }
  m.clock_mhz = clock.get<double>();
  m.parallel_macs = static_cast<std::uint32_t>(j.value("parallel_macs", 1u));
  m.layer_overhead = static_cast<std::uint32_t>(j.value("layer_overhead", 10u));
  m.cycles_per_inference = RequireUnsigned(j, "cycles_per_inference");
  m.ops = RequireUnsigned(j, "ops");
  if (auto it = j.find("resources"); it != j.end() && it->is_object()) {
    m.resources.luts = it->value("luts", std::uint64_t{0});
    m.resources.ffs = it->value("ffs", std::uint64_t{0});
    m.resources.bram_bits = it->value("bram_bits", std::uint64_t{0});
    m.resources.dsp_slices = it->value("dsp_slices", std::uint64_t{0});
  }
  m.model = QuantizedModelFromJson(Require(j, "model"));
  if (!(m.model.format == m.format)) {
    throw Error(ErrorCode::kMalformedDocument, "manifest format differs from its model format");
  }
  m.input_len = j.value("input_len", m.model.input_length());
  m.output_len = j.value("output_len", m.model.output_length());
  if (m.input_len != m.model.input_length() || m.output_len != m.model.output_length()) {
    throw Error(ErrorCode::kShapeMismatch, "manifest lengths disagree with its model");
  }
  if (auto it = j.find("schedule"); it != j.end() && it->is_array()) {
    for (const json& s : *it) {
      m.schedule.push_back(LayerSchedule{s.value("layer", std::size_t{0}), s.value("kind", ""),
                                         s.value("entity", ""), s.value("cycles", std::uint64_t{0}),
                                         s.value("ops", std::uint64_t{0})});
    }
  }
  if (auto it = j.find("quantization"); it != j.end()) m.quantization = *it;
  return m;
}

AcceleratorManifest ParseManifest(std::string_view document) {
  json j = json::parse(document.begin(), document.end(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kMalformedDocument, "manifest is not valid JSON");
  return ManifestFromJson(j);
}

}  // namespace accelforge
