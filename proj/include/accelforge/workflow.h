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
#ifndef ACCELFORGE_WORKFLOW_H_
#define ACCELFORGE_WORKFLOW_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "accelforge/error.h"
#include "accelforge/estimator.h"

namespace accelforge::workflow {

enum ExitCode : int {
  kExitOk = 0,
  kExitFail = 1,         // threshold verdict FAIL
  kExitInput = 2,        // validation / input errors
  kExitResource = 3,     // resource overflow
  kExitConnectivity = 4, // node unreachable or node-side error
  kExitMismatch = 5,     // node outputs differ from fixsim
};

int ExitCodeFor(ErrorCode code);

// Optional acceptance limits. JSON: {"max_quant_mse", "min_gop_per_j",
// "max_time_us"}, each nonnegative and optional.
struct Thresholds {
  std::optional<double> max_quant_mse;
  std::optional<double> min_gop_per_j;
  std::optional<double> max_time_us;

  static Thresholds Parse(std::string_view document);
  static Thresholds Load(const std::filesystem::path& path);
};

std::string ReadFile(const std::filesystem::path& path);
// Writes through a temporary file and rename.
void WriteFile(const std::filesystem::path& path, std::string_view contents);

// Directory name used for a model's bundle under the translate output root.
std::string BundleDirName(std::string_view model_name);

struct TranslateOptions {
  std::filesystem::path model;
  std::string fixed = "16.8";
  std::optional<std::uint32_t> parallel_macs;
  std::optional<double> clock_mhz;  // defaults to the device clock
  std::optional<std::uint32_t> layer_overhead;
  std::string device = "xc7s15";
  std::optional<std::filesystem::path> devices_file;
  std::filesystem::path out = "build";
  bool force = false;
  std::optional<std::filesystem::path> thresholds;
};

struct EstimateOptions {
  std::filesystem::path build;
  std::optional<std::filesystem::path> power_profile;
  std::optional<std::filesystem::path> out;
};

struct MeasureOptions {
  std::string address = "127.0.0.1:7070";
  std::filesystem::path build;
  unsigned runs = 100;
  std::optional<std::filesystem::path> out;
};

struct CompareOptions {
  std::filesystem::path estimated;
  std::filesystem::path measured;
  std::optional<std::filesystem::path> thresholds;
  bool allow_ops_mismatch = false;
};

struct NodeSimOptions {
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 7070;
  std::optional<std::filesystem::path> power_profile;
  double noise_mw = 0.0;
  std::uint64_t noise_seed = 1;
  bool inject_fault = false;
};

struct ComparisonRow {
  std::string metric;
  double estimated = 0.0;
  double measured = 0.0;
  double delta = 0.0;
  std::optional<double> delta_pct;  // absent when the estimate is 0
};

struct ThresholdCheck {
  std::string name;
  double limit = 0.0;
  double value = 0.0;
  bool pass = true;
};

struct Comparison {
  std::vector<ComparisonRow> rows;  // power, time per inference, efficiency
  std::vector<ThresholdCheck> checks;
  bool ops_match = true;
  bool pass = true;
};

Comparison CompareReports(const PerformanceReport& estimated, const PerformanceReport& measured,
                          const Thresholds& thresholds = {});
std::string FormatComparison(const Comparison& comparison);

// Each command returns its process exit code and reports failures on `err`.
int CmdTranslate(const TranslateOptions& options, std::ostream& out, std::ostream& err);
int CmdEstimate(const EstimateOptions& options, std::ostream& out, std::ostream& err);
int CmdMeasure(const MeasureOptions& options, std::ostream& out, std::ostream& err);
int CmdCompare(const CompareOptions& options, std::ostream& out, std::ostream& err);
// Serves until SIGINT or SIGTERM.
int CmdNodeSim(const NodeSimOptions& options, std::ostream& out, std::ostream& err);

}  // namespace accelforge::workflow

#endif  // ACCELFORGE_WORKFLOW_H_
