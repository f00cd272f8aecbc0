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
#include "accelforge/model_ir.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "json.hpp"

namespace accelforge {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

bool AllFinite(const std::vector<double>& values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

[[noreturn]] void Malformed(const std::string& what,
                            std::optional<std::size_t> layer = std::nullopt) {
  throw Error(ErrorCode::kMalformedDocument, what, layer);
}

const json& Field(const json& obj, const char* key,
                  std::optional<std::size_t> layer = std::nullopt) {
  auto it = obj.find(key);
  if (it == obj.end()) Malformed(std::string("missing field '") + key + "'", layer);
  return *it;
}

std::size_t Dim(const json& obj, const char* key, std::size_t layer) {
  const json& v = Field(obj, key, layer);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    Malformed(std::string("field '") + key + "' must be a nonnegative integer", layer);
  }
  return v.get<std::size_t>();
}

std::vector<double> RealVector(const json& v, const char* key, std::size_t layer) {
  if (!v.is_array()) Malformed(std::string("field '") + key + "' must be an array", layer);
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& e : v) {
    if (!e.is_number()) Malformed(std::string("non-numeric entry in '") + key + "'", layer);
    out.push_back(e.get<double>());
  }
  return out;
}

Matrix RealMatrix(const json& v, const char* key, std::size_t layer) {
  if (!v.is_array()) Malformed(std::string("field '") + key + "' must be a nested array", layer);
  Matrix m;
  m.rows = v.size();
  for (std::size_t r = 0; r < v.size(); ++r) {
    std::vector<double> row = RealVector(v[r], key, layer);
    if (r == 0) {
      m.cols = row.size();
    } else if (row.size() != m.cols) {
      throw Error(ErrorCode::kShapeMismatch,
                  std::string("ragged rows in '") + key + "'", layer);
    }
    m.data.insert(m.data.end(), row.begin(), row.end());
  }
  return m;
}

LayerSpec ParseLayer(const json& obj, std::size_t index) {
  if (!obj.is_object()) Malformed("layer must be an object", index);
  const json& kind = Field(obj, "kind", index);
  if (!kind.is_string()) Malformed("'kind' must be a string", index);
  const std::string k = kind.get<std::string>();
  if (k == "linear") {
    LinearLayer l;
    l.in_features = Dim(obj, "in_features", index);
    l.out_features = Dim(obj, "out_features", index);
    l.weights = RealMatrix(Field(obj, "weights", index), "weights", index);
    l.bias = RealVector(Field(obj, "bias", index), "bias", index);
    return l;
  }
  if (k == "lstm") {
    LstmLayer l;
    l.input_size = Dim(obj, "input_size", index);
    l.hidden_size = Dim(obj, "hidden_size", index);
    l.steps = obj.contains("steps") ? Dim(obj, "steps", index) : 1;
    l.gate_weights = RealMatrix(Field(obj, "gate_weights", index), "gate_weights", index);
    if (obj.contains("gate_bias")) {
      l.gate_bias = RealVector(obj["gate_bias"], "gate_bias", index);
    } else {
      // Two-bias convention of upstream frameworks: fold into one per gate row.
      std::vector<double> ih = RealVector(Field(obj, "bias_ih", index), "bias_ih", index);
      std::vector<double> hh = RealVector(Field(obj, "bias_hh", index), "bias_hh", index);
      if (ih.size() != hh.size()) {
        throw Error(ErrorCode::kShapeMismatch, "bias_ih and bias_hh differ in length", index);
      }
      l.gate_bias.resize(ih.size());
      for (std::size_t i = 0; i < ih.size(); ++i) l.gate_bias[i] = ih[i] + hh[i];
    }
    return l;
  }
  if (k == "activation") {
    const json& fn = Field(obj, "function", index);
    if (!fn.is_string()) Malformed("'function' must be a string", index);
    auto parsed = ParseActivationName(fn.get<std::string>());
    if (!parsed) {
      throw Error(ErrorCode::kUnknownLayerKind,
                  "unsupported activation '" + fn.get<std::string>() + "'", index);
    }
    return ActivationLayer{*parsed};
  }
  throw Error(ErrorCode::kUnknownLayerKind, "unsupported layer kind '" + k + "'", index);
}

json MatrixToJson(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ErrorCode CodeFromName(const std::string& name) {
  if (name == "DimensionZero") return ErrorCode::kDimensionZero;
  if (name == "NonFiniteWeight") return ErrorCode::kNonFiniteWeight;
  if (name == "EmptyGraph") return ErrorCode::kEmptyGraph;
  return ErrorCode::kShapeMismatch;
}

// Appends diagnostics for the weight/bias shapes of a layer whose dims are
// all nonzero.
void CheckTensors(const Matrix& w, std::size_t rows, std::size_t cols,
                  const std::vector<double>& bias, std::size_t index,
                  std::vector<Diagnostic>& out) {
  if (w.rows != rows || w.cols != cols || w.data.size() != rows * cols) {
    out.push_back({Severity::kError, "ShapeMismatch",
                   "weight matrix is " + std::to_string(w.rows) + "x" +
                       std::to_string(w.cols) + ", expected " +
                       std::to_string(rows) + "x" + std::to_string(cols),
                   index});
  }
  if (bias.size() != rows) {
    out.push_back({Severity::kError, "ShapeMismatch",
                   "bias has " + std::to_string(bias.size()) +
                       " entries, expected " + std::to_string(rows),
                   index});
  }
  if (!AllFinite(w.data) || !AllFinite(bias)) {
    out.push_back({Severity::kError, "NonFiniteWeight",
                   "weights or biases contain NaN or infinity", index});
  }
}

}  // namespace

std::string_view ActivationName(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kHardSigmoid: return "hard_sigmoid";
    case ActivationKind::kHardTanh: return "hard_tanh";
    case ActivationKind::kReLU: return "relu";
  }
  return "relu";
}

std::optional<ActivationKind> ParseActivationName(std::string_view name) {
  if (name == "hard_sigmoid") return ActivationKind::kHardSigmoid;
  if (name == "hard_tanh") return ActivationKind::kHardTanh;
  if (name == "relu") return ActivationKind::kReLU;
  return std::nullopt;
}

std::size_t ModelGraph::input_length() const {
  if (input_shape.empty()) return 0;
  return std::accumulate(input_shape.begin(), input_shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::optional<std::size_t> LayerInputLength(const LayerSpec& layer) {
  return std::visit(
      Overloaded{
          [](const LinearLayer& l) -> std::optional<std::size_t> { return l.in_features; },
          [](const LstmLayer& l) -> std::optional<std::size_t> {
            return l.steps * l.input_size;
          },
          [](const ActivationLayer&) -> std::optional<std::size_t> { return std::nullopt; },
      },
      layer);
}

std::size_t LayerOutputLength(const LayerSpec& layer, std::size_t input_length) {
  return std::visit(
      Overloaded{
          [](const LinearLayer& l) { return l.out_features; },
          [](const LstmLayer& l) { return l.hidden_size; },
          [&](const ActivationLayer&) { return input_length; },
      },
      layer);
}

std::string_view LayerKindName(const LayerSpec& layer) {
  return std::visit(Overloaded{
                        [](const LinearLayer&) { return std::string_view("linear"); },
                        [](const LstmLayer&) { return std::string_view("lstm"); },
                        [](const ActivationLayer&) { return std::string_view("activation"); },
                    },
                    layer);
}

std::size_t OutputLength(const ModelGraph& graph) {
  std::size_t len = graph.input_length();
  for (const LayerSpec& layer : graph.layers) len = LayerOutputLength(layer, len);
  return len;
}

ModelGraph ParseModel(std::string_view document) {
  json doc = json::parse(document.begin(), document.end(), nullptr,
                         /*allow_exceptions=*/false);
  if (doc.is_discarded()) Malformed("document is not valid JSON");
  if (!doc.is_object()) Malformed("top level must be an object");

  ModelGraph graph;
  const json& name = Field(doc, "name");
  if (!name.is_string()) Malformed("'name' must be a string");
  graph.name = name.get<std::string>();

  const json& shape = Field(doc, "input_shape");
  if (!shape.is_array()) Malformed("'input_shape' must be an array");
  for (const json& d : shape) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 0) {
      Malformed("'input_shape' entries must be nonnegative integers");
    }
    graph.input_shape.push_back(d.get<std::size_t>());
  }

  const json& layers = Field(doc, "layers");
  if (!layers.is_array()) Malformed("'layers' must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    graph.layers.push_back(ParseLayer(layers[i], i));
  }

  for (const Diagnostic& d : Validate(graph)) {
    if (d.severity == Severity::kError) {
      throw Error(CodeFromName(d.code), d.message, d.layer);
    }
  }
  return graph;
}

std::string SerializeModel(const ModelGraph& graph) {
  json doc;
  doc["name"] = graph.name;
  doc["input_shape"] = graph.input_shape;
  json layers = json::array();
  for (const LayerSpec& layer : graph.layers) {
    json obj;
    std::visit(Overloaded{
                   [&](const LinearLayer& l) {
                     obj["kind"] = "linear";
                     obj["in_features"] = l.in_features;
                     obj["out_features"] = l.out_features;
                     obj["weights"] = MatrixToJson(l.weights);
                     obj["bias"] = l.bias;
                   },
                   [&](const LstmLayer& l) {
                     obj["kind"] = "lstm";
                     obj["input_size"] = l.input_size;
                     obj["hidden_size"] = l.hidden_size;
                     obj["steps"] = l.steps;
                     obj["gate_weights"] = MatrixToJson(l.gate_weights);
                     obj["gate_bias"] = l.gate_bias;
                   },
                   [&](const ActivationLayer& l) {
                     obj["kind"] = "activation";
                     obj["function"] = std::string(ActivationName(l.kind));
                   },
               },
               layer);
    layers.push_back(std::move(obj));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(2) + "\n";
}

std::vector<Diagnostic> Validate(const ModelGraph& graph) {
  std::vector<Diagnostic> out;
  if (graph.input_shape.empty() ||
      std::find(graph.input_shape.begin(), graph.input_shape.end(), 0u) !=
          graph.input_shape.end()) {
    out.push_back({Severity::kError, "DimensionZero",
                   "input_shape must be a nonempty list of positive integers", 0});
  }
  if (graph.layers.empty()) {
    out.push_back({Severity::kError, "EmptyGraph", "graph has no layers", 0});
    return out;
  }

  std::size_t current = graph.input_length();
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const LayerSpec& layer = graph.layers[i];
    bool dims_ok = true;
    std::visit(
        Overloaded{
            [&](const LinearLayer& l) {
              if (l.in_features == 0 || l.out_features == 0) {
                out.push_back({Severity::kError, "DimensionZero",
                               "linear dimensions must be >= 1", i});
                dims_ok = false;
                return;
              }
              CheckTensors(l.weights, l.out_features, l.in_features, l.bias, i, out);
            },
            [&](const LstmLayer& l) {
              if (l.input_size == 0 || l.hidden_size == 0 || l.steps == 0) {
                out.push_back({Severity::kError, "DimensionZero",
                               "lstm dimensions must be >= 1", i});
                dims_ok = false;
                return;
              }
              CheckTensors(l.gate_weights, 4 * l.hidden_size,
                           l.input_size + l.hidden_size, l.gate_bias, i, out);
            },
            [&](const ActivationLayer&) {
              if (i > 0 && std::holds_alternative<ActivationLayer>(graph.layers[i - 1])) {
                out.push_back({Severity::kWarning, "ConsecutiveActivation",
                               "activation directly follows another activation", i});
              }
            },
        },
        layer);

    if (dims_ok && current != 0) {
      if (auto need = LayerInputLength(layer); need && *need != current) {
        out.push_back({Severity::kError, "ShapeMismatch",
                       "layer expects input length " + std::to_string(*need) +
                           " but receives " + std::to_string(current),
                       i});
      }
    }
    current = LayerOutputLength(layer, current);
  }
  return out;
}

bool HasErrors(const std::vector<Diagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) {
    return d.severity == Severity::kError;
  });
}

std::uint64_t LayerOpCount(const LayerSpec& layer, std::size_t input_length) {
  return std::visit(
      Overloaded{
          [](const LinearLayer& l) -> std::uint64_t {
            return 2ull * l.in_features * l.out_features + l.out_features;
          },
          [](const LstmLayer& l) -> std::uint64_t {
            const std::uint64_t h = l.hidden_size;
            return l.steps * (8 * h * (l.input_size + h) + 13 * h);
          },
          [&](const ActivationLayer&) -> std::uint64_t { return input_length; },
      },
      layer);
}

std::uint64_t OpCount(const ModelGraph& graph) {
  std::uint64_t total = 0;
  std::size_t len = graph.input_length();
  for (const LayerSpec& layer : graph.layers) {
    total += LayerOpCount(layer, len);
    len = LayerOutputLength(layer, len);
  }
  return total;
}

double HardSigmoid(double x) { return std::clamp(x / 4.0 + 0.5, 0.0, 1.0); }
double HardTanh(double x) { return std::clamp(x, -1.0, 1.0); }
double Relu(double x) { return x > 0.0 ? x : 0.0; }

double ApplyActivation(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::kHardSigmoid: return HardSigmoid(x);
    case ActivationKind::kHardTanh: return HardTanh(x);
    case ActivationKind::kReLU: return Relu(x);
  }
  return x;
}

std::vector<double> InferFloat(const ModelGraph& graph, std::span<const double> input) {
  if (input.size() != graph.input_length()) {
    throw Error(ErrorCode::kInputLengthMismatch,
                "got " + std::to_string(input.size()) + " values, expected " +
                    std::to_string(graph.input_length()));
  }
  std::vector<double> x(input.begin(), input.end());
  for (const LayerSpec& layer : graph.layers) {
    x = std::visit(
        Overloaded{
            [&](const LinearLayer& l) {
              std::vector<double> y(l.out_features);
              for (std::size_t r = 0; r < l.out_features; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < l.in_features; ++c) acc += l.weights.at(r, c) * x[c];
                y[r] = acc + l.bias[r];
              }
              return y;
            },
            [&](const LstmLayer& l) {
              const std::size_t h = l.hidden_size;
              const std::size_t width = l.input_size + h;
              std::vector<double> hidden(h, 0.0), cell(h, 0.0), concat(width), z(4 * h);
              for (std::size_t t = 0; t < l.steps; ++t) {
                std::copy_n(x.begin() + t * l.input_size, l.input_size, concat.begin());
                std::copy(hidden.begin(), hidden.end(), concat.begin() + l.input_size);
                for (std::size_t r = 0; r < 4 * h; ++r) {
                  double acc = 0.0;
                  for (std::size_t c = 0; c < width; ++c) acc += l.gate_weights.at(r, c) * concat[c];
                  z[r] = acc + l.gate_bias[r];
                }
                for (std::size_t j = 0; j < h; ++j) {
                  const double i_g = HardSigmoid(z[j]);
                  const double f_g = HardSigmoid(z[h + j]);
                  const double g_g = HardTanh(z[2 * h + j]);
                  const double o_g = HardSigmoid(z[3 * h + j]);
                  cell[j] = f_g * cell[j] + i_g * g_g;
                  hidden[j] = o_g * HardTanh(cell[j]);
                }
              }
              return hidden;
            },
            [&](const ActivationLayer& l) {
              std::vector<double> y(x.size());
              std::transform(x.begin(), x.end(), y.begin(),
                             [&](double v) { return ApplyActivation(l.kind, v); });
              return y;
            },
        },
        layer);
  }
  return x;
}

}  // namespace accelforge
