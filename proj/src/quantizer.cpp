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
#include "accelforge/quantizer.h"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace accelforge {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

double RoundHalfEven(double v) {
  const double lo = std::floor(v);
  const double frac = v - lo;  // exact for finite doubles
  if (frac > 0.5) return lo + 1.0;
  if (frac < 0.5) return lo;
  return std::fmod(lo, 2.0) == 0.0 ? lo : lo + 1.0;
}

json TensorToJson(const QuantizedTensor& t) { return t.codes; }

QuantizedTensor TensorFromJson(const json& j, std::vector<std::size_t> shape,
                               FixedPointFormat fmt, std::size_t layer) {
  if (!j.is_array()) {
    throw Error(ErrorCode::kMalformedDocument, "tensor must be a flat code array", layer);
  }
  QuantizedTensor t;
  t.shape = std::move(shape);
  t.format = fmt;
  std::size_t expected = 1;
  for (std::size_t d : t.shape) expected *= d;
  if (j.size() != expected) {
    throw Error(ErrorCode::kShapeMismatch, "tensor has " + std::to_string(j.size()) +
                                               " codes, expected " + std::to_string(expected),
                layer);
  }
  for (const json& e : j) {
    if (!e.is_number_integer()) {
      throw Error(ErrorCode::kMalformedDocument, "tensor codes must be integers", layer);
    }
    const auto code = e.get<std::int64_t>();
    if (!InRange(code, fmt)) {
      throw Error(ErrorCode::kCodeOutOfRange, std::to_string(code), layer);
    }
    t.codes.push_back(static_cast<Code>(code));
  }
  return t;
}

std::vector<double> Dequantized(const QuantizedTensor& t) {
  std::vector<double> out(t.codes.size());
  std::transform(t.codes.begin(), t.codes.end(), out.begin(),
                 [&](Code c) { return Dequantize(c, t.format); });
  return out;
}

std::size_t JsonDim(const json& obj, const char* key, std::size_t layer) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_unsigned()) {
    throw Error(ErrorCode::kMalformedDocument, std::string("missing or invalid '") + key + "'",
                layer);
  }
  return it->get<std::size_t>();
}

}  // namespace

FixedPointFormat FixedPointFormat::Make(int total_bits, int frac_bits) {
  if (total_bits < 2 || total_bits > 32 || frac_bits < 0 || frac_bits >= total_bits) {
    throw Error(ErrorCode::kInvalidFormat, "fixed-point format " + std::to_string(total_bits) +
                                               "." + std::to_string(frac_bits) +
                                               " requires 2 <= N <= 32 and 0 <= F < N");
  }
  return FixedPointFormat{total_bits, frac_bits};
}

FixedPointFormat FixedPointFormat::Parse(std::string_view text) {
  const auto dot = text.find('.');
  if (dot == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidFormat, "expected N.F, got '" + std::string(text) + "'");
  }
  int n = 0, f = 0;
  const auto head = text.substr(0, dot);
  const auto tail = text.substr(dot + 1);
  auto r1 = std::from_chars(head.data(), head.data() + head.size(), n);
  auto r2 = std::from_chars(tail.data(), tail.data() + tail.size(), f);
  if (head.empty() || tail.empty() || r1.ec != std::errc() || r2.ec != std::errc() ||
      r1.ptr != head.data() + head.size() || r2.ptr != tail.data() + tail.size()) {
    throw Error(ErrorCode::kInvalidFormat, "expected N.F, got '" + std::string(text) + "'");
  }
  return Make(n, f);
}

double FixedPointFormat::ulp() const { return std::ldexp(1.0, -frac_bits); }

std::string FixedPointFormat::ToString() const {
  return std::to_string(total_bits) + "." + std::to_string(frac_bits);
}

FixedConversion ToFixedChecked(double x, FixedPointFormat fmt) {
  if (!std::isfinite(x)) {
    throw Error(ErrorCode::kNonFiniteInput, "cannot quantize a non-finite value");
  }
  const double scaled = RoundHalfEven(std::ldexp(x, fmt.frac_bits));
  const auto lo = static_cast<double>(fmt.min_code());
  const auto hi = static_cast<double>(fmt.max_code());
  if (scaled < lo) return {static_cast<Code>(fmt.min_code()), true};
  if (scaled > hi) return {static_cast<Code>(fmt.max_code()), true};
  return {static_cast<Code>(scaled), false};
}

Code ToFixed(double x, FixedPointFormat fmt) { return ToFixedChecked(x, fmt).code; }

bool InRange(std::int64_t code, FixedPointFormat fmt) {
  return code >= fmt.min_code() && code <= fmt.max_code();
}

double Dequantize(std::int64_t code, FixedPointFormat fmt) {
  if (!InRange(code, fmt)) {
    throw Error(ErrorCode::kCodeOutOfRange, std::to_string(code) + " does not fit " +
                                                fmt.ToString());
  }
  return std::ldexp(static_cast<double>(code), -fmt.frac_bits);
}

QuantizedTensor QuantizeTensor(const std::vector<double>& values,
                               std::vector<std::size_t> shape, FixedPointFormat fmt,
                               TensorQuantizationError* error) {
  QuantizedTensor t;
  t.shape = std::move(shape);
  t.format = fmt;
  t.codes.reserve(values.size());
  double max_abs = 0.0, sum_sq = 0.0;
  std::uint64_t saturated = 0;
  for (double v : values) {
    const FixedConversion conv = ToFixedChecked(v, fmt);
    const double err = std::abs(v - Dequantize(conv.code, fmt));
    max_abs = std::max(max_abs, err);
    sum_sq += err * err;
    saturated += conv.saturated ? 1 : 0;
    t.codes.push_back(conv.code);
  }
  if (error) {
    error->elements = values.size();
    error->max_abs_error = max_abs;
    error->mean_squared_error = values.empty() ? 0.0 : sum_sq / values.size();
    error->saturation_count = saturated;
  }
  return t;
}

std::pair<QuantizedModel, QuantizationReport> QuantizeModel(const ModelGraph& graph,
                                                             FixedPointFormat fmt) {
  QuantizedModel model;
  model.graph = graph;
  model.format = fmt;
  QuantizationReport report;
  report.format = fmt;

  auto quantize = [&](const std::vector<double>& values, std::vector<std::size_t> shape,
                      std::size_t layer, const char* what) {
    TensorQuantizationError err;
    err.tensor = "layer" + std::to_string(layer) + "." + what;
    err.layer = layer;
    QuantizedTensor t;
    try {
      t = QuantizeTensor(values, std::move(shape), fmt, &err);
    } catch (const Error& e) {
      throw Error(e.code(), err.tensor, layer);
    }
    report.tensors.push_back(err);
    return t;
  };

  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    model.layers.push_back(std::visit(
        Overloaded{
            [&](const LinearLayer& l) -> QuantizedLayer {
              QuantizedLinear q;
              q.in_features = l.in_features;
              q.out_features = l.out_features;
              q.weights = quantize(l.weights.data, {l.out_features, l.in_features}, i, "weights");
              q.bias = quantize(l.bias, {l.out_features}, i, "bias");
              return q;
            },
            [&](const LstmLayer& l) -> QuantizedLayer {
              QuantizedLstm q;
              q.input_size = l.input_size;
              q.hidden_size = l.hidden_size;
              q.steps = l.steps;
              q.gate_weights = quantize(l.gate_weights.data,
                                        {4 * l.hidden_size, l.input_size + l.hidden_size}, i,
                                        "gate_weights");
              q.gate_bias = quantize(l.gate_bias, {4 * l.hidden_size}, i, "gate_bias");
              return q;
            },
            [&](const ActivationLayer& l) -> QuantizedLayer {
              return QuantizedActivation{l.kind};
            },
        },
        graph.layers[i]));
  }

  double sum_sq = 0.0;
  std::size_t elements = 0;
  for (const TensorQuantizationError& t : report.tensors) {
    report.max_abs_error = std::max(report.max_abs_error, t.max_abs_error);
    report.saturation_count += t.saturation_count;
    sum_sq += t.mean_squared_error * static_cast<double>(t.elements);
    elements += t.elements;
  }
  report.mean_squared_error = elements ? sum_sq / static_cast<double>(elements) : 0.0;
  return {std::move(model), std::move(report)};
}

json FormatToJson(FixedPointFormat fmt) {
  return json{{"total_bits", fmt.total_bits}, {"frac_bits", fmt.frac_bits}};
}

FixedPointFormat FormatFromJson(const json& j) {
  if (!j.is_object() || !j.contains("total_bits") || !j.contains("frac_bits") ||
      !j["total_bits"].is_number_integer() || !j["frac_bits"].is_number_integer()) {
    throw Error(ErrorCode::kMalformedDocument, "format needs integer total_bits/frac_bits");
  }
  return FixedPointFormat::Make(j["total_bits"].get<int>(), j["frac_bits"].get<int>());
}

json ReportToJson(const QuantizationReport& report) {
  json tensors = json::array();
  for (const TensorQuantizationError& t : report.tensors) {
    tensors.push_back({{"tensor", t.tensor},
                       {"layer", t.layer},
                       {"elements", t.elements},
                       {"max_abs_error", t.max_abs_error},
                       {"mean_squared_error", t.mean_squared_error},
                       {"saturation_count", t.saturation_count}});
  }
  return json{{"format", report.format.ToString()},
              {"max_abs_error", report.max_abs_error},
              {"mean_squared_error", report.mean_squared_error},
              {"saturation_count", report.saturation_count},
              {"tensors", std::move(tensors)}};
}

json QuantizedModelToJson(const QuantizedModel& model) {
  json layers = json::array();
  for (const QuantizedLayer& layer : model.layers) {
    layers.push_back(std::visit(
        Overloaded{
            [](const QuantizedLinear& l) {
              return json{{"kind", "linear"},
                          {"in_features", l.in_features},
                          {"out_features", l.out_features},
                          {"weights", TensorToJson(l.weights)},
                          {"bias", TensorToJson(l.bias)}};
            },
            [](const QuantizedLstm& l) {
              return json{{"kind", "lstm"},
                          {"input_size", l.input_size},
                          {"hidden_size", l.hidden_size},
                          {"steps", l.steps},
                          {"gate_weights", TensorToJson(l.gate_weights)},
                          {"gate_bias", TensorToJson(l.gate_bias)}};
            },
            [](const QuantizedActivation& l) {
              return json{{"kind", "activation"},
                          {"function", std::string(ActivationName(l.kind))}};
            },
        },
        layer));
  }
  return json{{"name", model.graph.name},
              {"input_shape", model.graph.input_shape},
              {"format", FormatToJson(model.format)},
              {"layers", std::move(layers)}};
}

QuantizedModel QuantizedModelFromJson(const json& j) {
  if (!j.is_object() || !j.contains("name") || !j.contains("input_shape") ||
      !j.contains("format") || !j.contains("layers") || !j["layers"].is_array() ||
      !j["name"].is_string() || !j["input_shape"].is_array()) {
    throw Error(ErrorCode::kMalformedDocument, "quantized model is missing required fields");
  }
  QuantizedModel model;
  model.format = FormatFromJson(j["format"]);
  model.graph.name = j["name"].get<std::string>();
  for (const json& d : j["input_shape"]) {
    if (!d.is_number_unsigned()) {
      throw Error(ErrorCode::kMalformedDocument, "input_shape entries must be unsigned");
    }
    model.graph.input_shape.push_back(d.get<std::size_t>());
  }
  const FixedPointFormat fmt = model.format;
  const json& layers = j["layers"];
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const json& obj = layers[i];
    const std::string kind = obj.value("kind", "");
    if (kind == "linear") {
      QuantizedLinear q;
      q.in_features = JsonDim(obj, "in_features", i);
      q.out_features = JsonDim(obj, "out_features", i);
      q.weights = TensorFromJson(obj.value("weights", json()), {q.out_features, q.in_features},
                                 fmt, i);
      q.bias = TensorFromJson(obj.value("bias", json()), {q.out_features}, fmt, i);
      LinearLayer l{q.in_features, q.out_features,
                    Matrix{q.out_features, q.in_features, Dequantized(q.weights)},
                    Dequantized(q.bias)};
      model.graph.layers.push_back(std::move(l));
      model.layers.push_back(std::move(q));
    } else if (kind == "lstm") {
      QuantizedLstm q;
      q.input_size = JsonDim(obj, "input_size", i);
      q.hidden_size = JsonDim(obj, "hidden_size", i);
      q.steps = JsonDim(obj, "steps", i);
      const std::size_t rows = 4 * q.hidden_size, cols = q.input_size + q.hidden_size;
      q.gate_weights = TensorFromJson(obj.value("gate_weights", json()), {rows, cols}, fmt, i);
      q.gate_bias = TensorFromJson(obj.value("gate_bias", json()), {rows}, fmt, i);
      LstmLayer l{q.input_size, q.hidden_size, q.steps,
                  Matrix{rows, cols, Dequantized(q.gate_weights)}, Dequantized(q.gate_bias)};
      model.graph.layers.push_back(std::move(l));
      model.layers.push_back(std::move(q));
    } else if (kind == "activation") {
      auto fn = ParseActivationName(obj.value("function", ""));
      if (!fn) throw Error(ErrorCode::kUnknownLayerKind, "unsupported activation", i);
      model.graph.layers.push_back(ActivationLayer{*fn});
      model.layers.push_back(QuantizedActivation{*fn});
    } else {
      throw Error(ErrorCode::kUnknownLayerKind, "unsupported layer kind '" + kind + "'", i);
    }
  }
  for (const Diagnostic& d : Validate(model.graph)) {
    if (d.severity == Severity::kError) {
      throw Error(ErrorCode::kShapeMismatch, d.code + ": " + d.message, d.layer);
    }
  }
  return model;
}

}  // namespace accelforge
