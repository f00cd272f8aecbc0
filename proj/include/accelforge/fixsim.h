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
#ifndef ACCELFORGE_FIXSIM_H_
#define ACCELFORGE_FIXSIM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "accelforge/quantizer.h"

// Bit-exact integer semantics of the generated datapath. The RTL templates
// and the node simulator both defer to these functions; testbench golden
// vectors are produced here.
namespace accelforge::fixsim {

// Accumulator wide enough for 2n + ceil(log2(in + 1)) bits at n <= 32 and
// in_features <= 2^16 (81 bits).
struct WideAccumulator {
  __int128 value = 0;
  int frac_bits = 0;
};

// sum(w_i * x_i) + (bias << f), all at 2f fractional bits. Throws
// kLengthMismatch when the spans differ in length.
WideAccumulator MacDot(std::span<const Code> weights, std::span<const Code> inputs,
                       FixedPointFormat fmt, Code bias = 0);

struct Requantized {
  Code code = 0;
  bool saturated = false;
};

// Round half up (add 2^(f-1), arithmetic shift right by f), then saturate.
Requantized RequantizeChecked(const WideAccumulator& acc, FixedPointFormat fmt);
Code Requantize(const WideAccumulator& acc, FixedPointFormat fmt);

Code HardSigmoidFixed(Code x, FixedPointFormat fmt);
Code HardTanhFixed(Code x, FixedPointFormat fmt);
Code ReluFixed(Code x);
Code ActivationFixed(ActivationKind kind, Code x, FixedPointFormat fmt);

struct InferenceStats {
  std::uint64_t ops = 0;
  std::uint64_t saturations = 0;
};

std::vector<Code> LinearForward(const QuantizedLinear& layer, std::span<const Code> x,
                                InferenceStats* stats = nullptr);

struct LstmState {
  std::vector<Code> h;
  std::vector<Code> c;
};

// One cell update. x has input_size codes; h and c have hidden_size codes.
LstmState LstmStep(const QuantizedLstm& cell, std::span<const Code> x,
                   std::span<const Code> h, std::span<const Code> c,
                   InferenceStats* stats = nullptr);

struct FixedInference {
  std::vector<Code> outputs;
  InferenceStats stats;
};

// Throws kInputLengthMismatch or kCodeOutOfRange on bad input.
FixedInference InferFixed(const QuantizedModel& model, std::span<const Code> x);

}  // namespace accelforge::fixsim

#endif  // ACCELFORGE_FIXSIM_H_
