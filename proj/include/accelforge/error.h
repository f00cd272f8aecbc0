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
#ifndef ACCELFORGE_ERROR_H_
#define ACCELFORGE_ERROR_H_

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace accelforge {

enum class ErrorCode {
  // model-ir
  kMalformedDocument,
  kUnknownLayerKind,
  kShapeMismatch,
  kDimensionZero,
  kNonFiniteWeight,
  kEmptyGraph,
  kInputLengthMismatch,
  // quantizer / fixsim
  kInvalidFormat,
  kNonFiniteInput,
  kCodeOutOfRange,
  kLengthMismatch,
  // rtlgen / estimator
  kResourceOverflow,
  kNonpositiveClock,
  kNegativeInput,
  kZeroEnergy,
  kInvalidConfig,
  // nodesim
  kNonpositiveStep,
  kBadChannel,
  kFpgaOff,
  kNoManifest,
  kBadInputLength,
  kInvalidProfile,
  // workflow
  kMissingManifest,
  kConnectionFailed,
  kDeviceError,
  kOutputMismatch,
  kOpsMismatch,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// Single exception type used across the toolchain. `layer` is set when the
// failure can be attributed to one layer of a model graph.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> layer = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> layer() const noexcept { return layer_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> layer_;
};

}  // namespace accelforge

#endif  // ACCELFORGE_ERROR_H_
