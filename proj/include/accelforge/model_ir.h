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
#ifndef ACCELFORGE_MODEL_IR_H_
#define ACCELFORGE_MODEL_IR_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "accelforge/error.h"

namespace accelforge {

// Dense row-major matrix of trained real weights.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const Matrix&) const = default;
};

enum class ActivationKind { kHardSigmoid, kHardTanh, kReLU };

std::string_view ActivationName(ActivationKind kind);
std::optional<ActivationKind> ParseActivationName(std::string_view name);

struct LinearLayer {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Matrix weights;  // [out x in]
  std::vector<double> bias;

  bool operator==(const LinearLayer&) const = default;
};

// Gate rows are stacked in the order input, forget, cell, output (i, f, g, o);
// each row spans the concatenation [x_t, h_{t-1}]. The input is a flattened
// time-major sequence of `steps` vectors; the output is the final hidden state.
struct LstmLayer {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::size_t steps = 1;
  Matrix gate_weights;  // [4h x (in + h)]
  std::vector<double> gate_bias;

  bool operator==(const LstmLayer&) const = default;
};

struct ActivationLayer {
  ActivationKind kind = ActivationKind::kReLU;

  bool operator==(const ActivationLayer&) const = default;
};

using LayerSpec = std::variant<LinearLayer, LstmLayer, ActivationLayer>;

struct ModelGraph {
  std::string name;
  std::vector<std::size_t> input_shape;
  std::vector<LayerSpec> layers;

  // Product of input_shape; the flat length accepted by inference.
  std::size_t input_length() const;
  bool operator==(const ModelGraph&) const = default;
};

enum class Severity { kError, kWarning };

struct Diagnostic {
  Severity severity = Severity::kError;
  std::string code;
  std::string message;
  std::size_t layer = 0;
};

// Flat input length a layer requires, or nullopt for shape-preserving layers.
std::optional<std::size_t> LayerInputLength(const LayerSpec& layer);
std::size_t LayerOutputLength(const LayerSpec& layer, std::size_t input_length);
std::string_view LayerKindName(const LayerSpec& layer);

// Output length of the whole graph (graph assumed valid).
std::size_t OutputLength(const ModelGraph& graph);

// Parses the JSON interchange document and validates it. Throws Error with
// kMalformedDocument, kUnknownLayerKind, kShapeMismatch or the code of the
// first error diagnostic.
ModelGraph ParseModel(std::string_view document);

// Inverse of ParseModel; output is deterministic for a given graph.
std::string SerializeModel(const ModelGraph& graph);

std::vector<Diagnostic> Validate(const ModelGraph& graph);
bool HasErrors(const std::vector<Diagnostic>& diagnostics);

// Operation count: MAC = 2 ops, bias add = 1, activation = 1 per element,
// LSTM adds 13h per step (4h bias, 5h activations, 4h elementwise).
std::uint64_t LayerOpCount(const LayerSpec& layer, std::size_t input_length);
std::uint64_t OpCount(const ModelGraph& graph);

double HardSigmoid(double x);
double HardTanh(double x);
double Relu(double x);
double ApplyActivation(ActivationKind kind, double x);

std::vector<double> InferFloat(const ModelGraph& graph,
                               std::span<const double> input);

}  // namespace accelforge

#endif  // ACCELFORGE_MODEL_IR_H_
