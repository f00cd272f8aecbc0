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
#ifndef ACCELFORGE_QUANTIZER_H_
#define ACCELFORGE_QUANTIZER_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "accelforge/model_ir.h"
#include "json.hpp"

namespace accelforge {

using Code = std::int32_t;

// Two's-complement fixed point: value = code * 2^-frac_bits, with codes in
// [-2^(total_bits-1), 2^(total_bits-1) - 1].
struct FixedPointFormat {
  int total_bits = 16;
  int frac_bits = 8;

  // Throws kInvalidFormat unless 2 <= n <= 32 and 0 <= f < n.
  static FixedPointFormat Make(int total_bits, int frac_bits);
  // Accepts "N.F", e.g. "16.8".
  static FixedPointFormat Parse(std::string_view text);

  std::int64_t min_code() const { return -(std::int64_t{1} << (total_bits - 1)); }
  std::int64_t max_code() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }
  double ulp() const;
  std::string ToString() const;

  bool operator==(const FixedPointFormat&) const = default;
};

struct FixedConversion {
  Code code = 0;
  bool saturated = false;
};

// Round-half-to-even of x * 2^f, saturated to the format range.
// Throws kNonFiniteInput for NaN/inf.
FixedConversion ToFixedChecked(double x, FixedPointFormat fmt);
Code ToFixed(double x, FixedPointFormat fmt);

// Exact; throws kCodeOutOfRange for codes outside the format.
double Dequantize(std::int64_t code, FixedPointFormat fmt);

bool InRange(std::int64_t code, FixedPointFormat fmt);

struct QuantizedTensor {
  std::vector<Code> codes;
  std::vector<std::size_t> shape;
  FixedPointFormat format;

  bool operator==(const QuantizedTensor&) const = default;
};

struct QuantizedLinear {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  QuantizedTensor weights;  // [out x in]
  QuantizedTensor bias;     // [out]
};

struct QuantizedLstm {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::size_t steps = 1;
  QuantizedTensor gate_weights;  // [4h x (in + h)], gate order i, f, g, o
  QuantizedTensor gate_bias;     // [4h]
};

struct QuantizedActivation {
  ActivationKind kind = ActivationKind::kReLU;
};

using QuantizedLayer = std::variant<QuantizedLinear, QuantizedLstm, QuantizedActivation>;

// One uniform format across the whole model.
struct QuantizedModel {
  ModelGraph graph;
  std::vector<QuantizedLayer> layers;
  FixedPointFormat format;

  std::size_t input_length() const { return graph.input_length(); }
  std::size_t output_length() const { return OutputLength(graph); }
};

struct TensorQuantizationError {
  std::string tensor;  // e.g. "layer0.weights"
  std::size_t layer = 0;
  std::size_t elements = 0;
  double max_abs_error = 0.0;
  double mean_squared_error = 0.0;
  std::uint64_t saturation_count = 0;
};

struct QuantizationReport {
  FixedPointFormat format;
  std::vector<TensorQuantizationError> tensors;
  double max_abs_error = 0.0;
  double mean_squared_error = 0.0;
  std::uint64_t saturation_count = 0;
};

QuantizedTensor QuantizeTensor(const std::vector<double>& values,
                               std::vector<std::size_t> shape, FixedPointFormat fmt,
                               TensorQuantizationError* error = nullptr);

// Quantizes every weight and bias tensor. The graph must be valid; a
// non-finite value raises kNonFiniteInput with its layer index.
std::pair<QuantizedModel, QuantizationReport> QuantizeModel(const ModelGraph& graph,
                                                             FixedPointFormat fmt);

nlohmann::json FormatToJson(FixedPointFormat fmt);
FixedPointFormat FormatFromJson(const nlohmann::json& j);
nlohmann::json ReportToJson(const QuantizationReport& report);

// Integer-code form of a quantized model, as carried in accelerator manifests.
nlohmann::json QuantizedModelToJson(const QuantizedModel& model);
// Rebuilds the model; graph weights are the dequantized codes. Throws
// kMalformedDocument or kCodeOutOfRange.
QuantizedModel QuantizedModelFromJson(const nlohmann::json& j);

}  // namespace accelforge

#endif  // ACCELFORGE_QUANTIZER_H_
