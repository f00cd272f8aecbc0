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
#include "accelforge/fixsim.h"

#include <algorithm>

namespace accelforge::fixsim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void CheckLength(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorCode::kLengthMismatch, std::string(what) + ": got " + std::to_string(got) +
                                                ", expected " + std::to_string(want));
  }
}

Code RequantizeCounted(const WideAccumulator& acc, FixedPointFormat fmt,
                       InferenceStats* stats) {
  const Requantized r = RequantizeChecked(acc, fmt);
  if (stats && r.saturated) ++stats->saturations;
  return r.code;
}

}  // namespace

WideAccumulator MacDot(std::span<const Code> weights, std::span<const Code> inputs,
                       FixedPointFormat fmt, Code bias) {
  CheckLength(inputs.size(), weights.size(), "mac_dot operands");
  WideAccumulator acc{static_cast<__int128>(bias) << fmt.frac_bits, 2 * fmt.frac_bits};
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc.value += static_cast<__int128>(weights[i]) * inputs[i];
  }
  return acc;
}

Requantized RequantizeChecked(const WideAccumulator& acc, FixedPointFormat fmt) {
  const int shift = acc.frac_bits - fmt.frac_bits;
  __int128 v = acc.value;
  if (shift > 0) {
    v = (v + (static_cast<__int128>(1) << (shift - 1))) >> shift;
  } else if (shift < 0) {
    v <<= -shift;
  }
  if (v > fmt.max_code()) return {static_cast<Code>(fmt.max_code()), true};
  if (v < fmt.min_code()) return {static_cast<Code>(fmt.min_code()), true};
  return {static_cast<Code>(v), false};
}

Code Requantize(const WideAccumulator& acc, FixedPointFormat fmt) {
  return RequantizeChecked(acc, fmt).code;
}

Code HardSigmoidFixed(Code x, FixedPointFormat fmt) {
  const std::int64_t y = (std::int64_t{x} >> 2) + ToFixed(0.5, fmt);
  return static_cast<Code>(std::clamp<std::int64_t>(y, 0, ToFixed(1.0, fmt)));
}

Code HardTanhFixed(Code x, FixedPointFormat fmt) {
  return std::clamp(x, ToFixed(-1.0, fmt), ToFixed(1.0, fmt));
}

Code ReluFixed(Code x) { return x > 0 ? x : 0; }

Code ActivationFixed(ActivationKind kind, Code x, FixedPointFormat fmt) {
  switch (kind) {
    case ActivationKind::kHardSigmoid: return HardSigmoidFixed(x, fmt);
    case ActivationKind::kHardTanh: return HardTanhFixed(x, fmt);
    case ActivationKind::kReLU: return ReluFixed(x);
  }
  return x;
}

std::vector<Code> LinearForward(const QuantizedLinear& layer, std::span<const Code> x,
                                InferenceStats* stats) {
  CheckLength(x.size(), layer.in_features, "linear input");
  CheckLength(layer.weights.codes.size(), layer.in_features * layer.out_features, "linear weights");
  CheckLength(layer.bias.codes.size(), layer.out_features, "linear bias");
  const FixedPointFormat fmt = layer.weights.format;
  const std::span<const Code> w(layer.weights.codes);
  std::vector<Code> y(layer.out_features);
  for (std::size_t r = 0; r < layer.out_features; ++r) {
    const WideAccumulator acc =
        MacDot(w.subspan(r * layer.in_features, layer.in_features), x, fmt, layer.bias.codes[r]);
    y[r] = RequantizeCounted(acc, fmt, stats);
  }
  if (stats) stats->ops += 2ull * layer.in_features * layer.out_features + layer.out_features;
  return y;
}

LstmState LstmStep(const QuantizedLstm& cell, std::span<const Code> x,
                   std::span<const Code> h, std::span<const Code> c,
                   InferenceStats* stats) {
  const std::size_t n_h = cell.hidden_size;
  CheckLength(x.size(), cell.input_size, "lstm input");
  CheckLength(h.size(), n_h, "lstm hidden state");
  CheckLength(c.size(), n_h, "lstm cell state");
  const FixedPointFormat fmt = cell.gate_weights.format;

  std::vector<Code> concat(x.begin(), x.end());
  concat.insert(concat.end(), h.begin(), h.end());
  const QuantizedLinear gates_layer{cell.input_size + n_h, 4 * n_h, cell.gate_weights,
                                    cell.gate_bias};
  const std::vector<Code> z = LinearForward(gates_layer, concat, stats);

  LstmState next{std::vector<Code>(n_h), std::vector<Code>(n_h)};
  for (std::size_t j = 0; j < n_h; ++j) {
    const Code i_g = HardSigmoidFixed(z[j], fmt);
    const Code f_g = HardSigmoidFixed(z[n_h + j], fmt);
    const Code g_g = HardTanhFixed(z[2 * n_h + j], fmt);
    const Code o_g = HardSigmoidFixed(z[3 * n_h + j], fmt);

    WideAccumulator cell_acc{static_cast<__int128>(f_g) * c[j] +
                                 static_cast<__int128>(i_g) * g_g,
                             2 * fmt.frac_bits};
    next.c[j] = RequantizeCounted(cell_acc, fmt, stats);

    WideAccumulator out_acc{static_cast<__int128>(o_g) * HardTanhFixed(next.c[j], fmt),
                            2 * fmt.frac_bits};
    next.h[j] = RequantizeCounted(out_acc, fmt, stats);
  }
  // 5h activations and 4h elementwise multiply/add.
  if (stats) stats->ops += 9ull * n_h;
  return next;
}

FixedInference InferFixed(const QuantizedModel& model, std::span<const Code> x) {
  if (x.size() != model.input_length()) {
    throw Error(ErrorCode::kInputLengthMismatch,
                "got " + std::to_string(x.size()) + " codes, expected " +
                    std::to_string(model.input_length()));
  }
  for (Code v : x) {
    if (!InRange(v, model.format)) {
      throw Error(ErrorCode::kCodeOutOfRange, std::to_string(v) + " does not fit " +
                                                  model.format.ToString());
    }
  }

  FixedInference result;
  InferenceStats& stats = result.stats;
  std::vector<Code> current(x.begin(), x.end());
  for (const QuantizedLayer& layer : model.layers) {
    current = std::visit(
        Overloaded{
            [&](const QuantizedLinear& l) { return LinearForward(l, current, &stats); },
            [&](const QuantizedLstm& l) {
              const std::span<const Code> seq(current);
              std::vector<Code> h(l.hidden_size, 0), c(l.hidden_size, 0);
              for (std::size_t t = 0; t < l.steps; ++t) {
                LstmState s = LstmStep(l, seq.subspan(t * l.input_size, l.input_size), h, c,
                                       &stats);
                h = std::move(s.h);
                c = std::move(s.c);
              }
              return h;
            },
            [&](const QuantizedActivation& l) {
              std::vector<Code> y(current.size());
              std::transform(current.begin(), current.end(), y.begin(),
                             [&](Code v) { return ActivationFixed(l.kind, v, model.format); });
              stats.ops += current.size();
              return y;
            },
        },
        layer);
  }
  result.outputs = std::move(current);
  return result;
}

}  // namespace accelforge::fixsim
