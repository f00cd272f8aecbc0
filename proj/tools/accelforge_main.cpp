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
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "accelforge/workflow.h"

namespace wf = accelforge::workflow;

int main(int argc, char** argv) {
  CLI::App app{"accelforge: model to FPGA accelerator workflow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "accelforge 0.1.0");

  wf::TranslateOptions translate;
  std::string thresholds_t, devices_file;
  auto* t = app.add_subcommand("translate", "Quantize a model and emit an RTL bundle");
  t->add_option("--model", translate.model, "Model JSON")->required()->check(CLI::ExistingFile);
  t->add_option("--fixed", translate.fixed, "Fixed-point format N.F")->capture_default_str();
  t->add_option("--p", translate.parallel_macs, "Parallel MAC lanes per layer");
  t->add_option("--clock", translate.clock_mhz, "Clock in MHz (default: device clock)");
  t->add_option("--overhead", translate.layer_overhead, "Per-layer overhead cycles");
  t->add_option("--device", translate.device, "Device profile name")->capture_default_str();
  t->add_option("--devices", devices_file, "Device profile table (JSON)")
      ->check(CLI::ExistingFile);
  t->add_option("--out", translate.out, "Output root")->capture_default_str();
  t->add_flag("--force", translate.force, "Emit even when resources overflow");
  t->add_option("--thresholds", thresholds_t, "Thresholds JSON (max_quant_mse)")
      ->check(CLI::ExistingFile);

  wf::EstimateOptions estimate;
  std::string profile_e, out_e;
  auto* e = app.add_subcommand("estimate", "Estimated performance report from a bundle");
  e->add_option("--build", estimate.build, "Bundle directory")->required();
  e->add_option("--power-profile", profile_e, "Power profile JSON")->check(CLI::ExistingFile);
  e->add_option("--out", out_e, "Report file (default: stdout)");

  wf::NodeSimOptions node;
  std::string profile_n;
  auto* n = app.add_subcommand("node-sim", "Run the simulated node");
  n->add_option("--port", node.port, "TCP port")->capture_default_str();
  n->add_option("--bind", node.bind_address, "Bind address")->capture_default_str();
  n->add_option("--power-profile", profile_n, "Power profile JSON")->check(CLI::ExistingFile);
  n->add_option("--noise-mw", node.noise_mw, "Gaussian power noise (mW)")->capture_default_str();
  n->add_option("--noise-seed", node.noise_seed, "Noise seed")->capture_default_str();
  n->add_flag("--inject-fault", node.inject_fault, "Corrupt loaded models (testing)");

  wf::MeasureOptions measure;
  std::string out_m;
  auto* m = app.add_subcommand("measure", "Measured performance report from the node");
  m->add_option("--addr", measure.address, "Node HOST:PORT")->capture_default_str();
  m->add_option("--build", measure.build, "Bundle directory")->required();
  m->add_option("--runs", measure.runs, "Inference count")->capture_default_str();
  m->add_option("--out", out_m, "Report file (default: stdout)");

  wf::CompareOptions compare;
  std::string thresholds_c;
  auto* c = app.add_subcommand("compare", "Compare estimated and measured reports");
  c->add_option("estimated", compare.estimated, "Estimated report")->required();
  c->add_option("measured", compare.measured, "Measured report")->required();
  c->add_option("--thresholds", thresholds_c, "Thresholds JSON")->check(CLI::ExistingFile);
  c->add_flag("--allow-ops-mismatch", compare.allow_ops_mismatch,
              "Compare reports of different op counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : wf::kExitInput;
  }

  if (*t) {
    if (!thresholds_t.empty()) translate.thresholds = thresholds_t;
    if (!devices_file.empty()) translate.devices_file = devices_file;
    return wf::CmdTranslate(translate, std::cout, std::cerr);
  }
  if (*e) {
    if (!profile_e.empty()) estimate.power_profile = profile_e;
    if (!out_e.empty()) estimate.out = out_e;
    return wf::CmdEstimate(estimate, std::cout, std::cerr);
  }
  if (*n) {
    if (!profile_n.empty()) node.power_profile = profile_n;
    return wf::CmdNodeSim(node, std::cout, std::cerr);
  }
  if (*m) {
    if (!out_m.empty()) measure.out = out_m;
    return wf::CmdMeasure(measure, std::cout, std::cerr);
  }
  if (!thresholds_c.empty()) compare.thresholds = thresholds_c;
  return wf::CmdCompare(compare, std::cout, std::cerr);
}
