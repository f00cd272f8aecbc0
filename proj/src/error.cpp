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
#include "accelforge/error.h"

namespace accelforge {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedDocument: return "MalformedDocument";
    case ErrorCode::kUnknownLayerKind: return "UnknownLayerKind";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDimensionZero: return "DimensionZero";
    case ErrorCode::kNonFiniteWeight: return "NonFiniteWeight";
    case ErrorCode::kEmptyGraph: return "EmptyGraph";
    case ErrorCode::kInputLengthMismatch: return "InputLengthMismatch";
    case ErrorCode::kInvalidFormat: return "InvalidFormat";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kCodeOutOfRange: return "CodeOutOfRange";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kResourceOverflow: return "ResourceOverflow";
    case ErrorCode::kNonpositiveClock: return "NonpositiveClock";
    case ErrorCode::kNegativeInput: return "NegativeInput";
    case ErrorCode::kZeroEnergy: return "ZeroEnergy";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNonpositiveStep: return "NonpositiveStep";
    case ErrorCode::kBadChannel: return "BadChannel";
    case ErrorCode::kFpgaOff: return "FpgaOff";
    case ErrorCode::kNoManifest: return "NoManifest";
    case ErrorCode::kBadInputLength: return "BadInputLength";
    case ErrorCode::kInvalidProfile: return "InvalidProfile";
    case ErrorCode::kMissingManifest: return "MissingManifest";
    case ErrorCode::kConnectionFailed: return "ConnectionFailed";
    case ErrorCode::kDeviceError: return "DeviceError";
    case ErrorCode::kOutputMismatch: return "OutputMismatch";
    case ErrorCode::kOpsMismatch: return "OpsMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string Decorate(ErrorCode code, const std::string& message,
                     std::optional<std::size_t> layer) {
  std::string out(ErrorCodeName(code));
  if (layer) out += " @" + std::to_string(*layer);
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> layer)
    : std::runtime_error(Decorate(code, message, layer)),
      code_(code),
      layer_(layer) {}

}  // namespace accelforge
