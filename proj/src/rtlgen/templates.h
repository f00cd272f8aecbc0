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
#ifndef ACCELFORGE_SRC_RTLGEN_TEMPLATES_H_
#define ACCELFORGE_SRC_RTLGEN_TEMPLATES_H_

#include <cstdint>
#include <string>
#include <vector>

#include "accelforge/estimator.h"
#include "accelforge/quantizer.h"

// VHDL-2008 text templates. Every function returns a complete file body.
namespace accelforge::rtl {

struct DatapathConstants {
  FixedPointFormat format;
  int acc_width = 0;
  std::uint32_t parallel_macs = 1;
  std::uint32_t layer_overhead = 10;
};

std::string LinearRomPackage(const std::string& model, const std::string& pkg,
                             const QuantizedLinear& layer, const DatapathConstants& dp);
std::string LinearEntity(const std::string& model, const std::string& entity,
                         const std::string& pkg, const QuantizedLinear& layer);

std::string LstmRomPackage(const std::string& model, const std::string& pkg,
                           const QuantizedLstm& layer, const DatapathConstants& dp);
std::string LstmEntity(const std::string& model, const std::string& entity,
                       const std::string& pkg, const QuantizedLstm& layer);

std::string ActivationEntity(const std::string& model, const std::string& entity,
                             ActivationKind kind, std::size_t length,
                             const DatapathConstants& dp);

struct TopInstance {
  std::string entity;
  std::string label;
  std::size_t in_len = 0;
  std::size_t out_len = 0;
};

std::string TopEntity(const std::string& model, const std::string& top,
                      const std::vector<TopInstance>& layers, FixedPointFormat fmt);

std::string SynthScript(const std::string& model, const std::string& top,
                        const std::vector<std::string>& sources, const std::string& part,
                        double clock_mhz);

// Shared by the templates and the testbench generator.
std::string FileHeader(const std::string& model, const std::string& what);

}  // namespace accelforge::rtl

#endif  // ACCELFORGE_SRC_RTLGEN_TEMPLATES_H_
