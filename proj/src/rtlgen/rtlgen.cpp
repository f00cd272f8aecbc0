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
#include "accelforge/rtlgen.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <regex>

#include "accelforge/fixsim.h"
#include "fmt/format.h"
#include "rtlgen/templates.h"

namespace accelforge {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::string RenderWordArray(const std::vector<Code>& codes, int total_bits) {
  std::string out;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    out += fmt::format("    {} => {}{}\n", i, HexLiteral(codes[i], total_bits),
                       i + 1 < codes.size() ? "," : "");
  }
  return out;
}

std::string ToLower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string VhdlIdentifier(std::string_view name) {
  std::string out;
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      out += static_cast<char>(std::tolower(c));
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  if (out.empty() || !std::isalpha(static_cast<unsigned char>(out.front()))) out = "m_" + out;
  while (out.back() == '_') out.pop_back();
  return out;
}

std::string HexLiteral(std::int64_t code, int total_bits) {
  const int digits = (total_bits + 3) / 4;
  const std::uint64_t mask = (total_bits >= 64) ? ~0ull : ((1ull << total_bits) - 1);
  const std::uint64_t bits = static_cast<std::uint64_t>(code) & mask;
  if (total_bits % 4 == 0) return fmt::format("x\"{:0{}X}\"", bits, digits);
  return fmt::format("{}x\"{:0{}X}\"", total_bits, bits, digits);
}

std::string RenderRom(const QuantizedTensor& tensor, std::string_view name) {
  std::string out = fmt::format("  constant {}_DEPTH : natural := {};\n", name,
                                tensor.codes.size());
  if (tensor.codes.empty()) {
    out += fmt::format(
        "  constant {0} : word_array_t(0 to {0}_DEPTH - 1) := (others => (others => '0'));\n",
        name);
    return out;
  }
  out += fmt::format("  constant {0} : word_array_t(0 to {0}_DEPTH - 1) := (\n", name);
  out += RenderWordArray(tensor.codes, tensor.format.total_bits);
  out += "  );\n";
  return out;
}

std::vector<Code> ParseHexLiterals(std::string_view text, FixedPointFormat fmt) {
  static const std::regex kLiteral(R"re((\d*)[xX]"([0-9A-Fa-f_]+)")re");
  std::vector<Code> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kLiteral); it != std::sregex_iterator();
       ++it) {
    std::string digits = (*it)[2].str();
    digits.erase(std::remove(digits.begin(), digits.end(), '_'), digits.end());
    std::uint64_t bits = std::stoull(digits, nullptr, 16);
    const int n = fmt.total_bits;
    bits &= (1ull << n) - 1;
    std::int64_t value = static_cast<std::int64_t>(bits);
    if (bits & (1ull << (n - 1))) value -= std::int64_t{1} << n;
    out.push_back(static_cast<Code>(value));
  }
  return out;
}

std::vector<std::vector<Code>> GoldenVectors(const QuantizedModel& model, std::size_t count,
                                             std::uint64_t seed) {
  const FixedPointFormat fmt = model.format;
  const std::int64_t lo = std::max<std::int64_t>(fmt.min_code(), ToFixed(-2.0, fmt));
  const std::int64_t hi = std::min<std::int64_t>(fmt.max_code(), ToFixed(2.0, fmt));
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Code>> out;
  for (std::size_t v = 0; v < count; ++v) {
    std::vector<Code> vec(model.input_length(), 0);
    if (v > 0) {
      for (Code& c : vec) c = static_cast<Code>(lo + static_cast<std::int64_t>(rng() % span));
    }
    out.push_back(std::move(vec));
  }
  return out;
}

std::string GenerateTestbench(const QuantizedModel& model,
                              const std::vector<std::vector<Code>>& vectors,
                              const TestbenchSpec& spec) {
  if (vectors.empty()) throw Error(ErrorCode::kInvalidConfig, "testbench needs >= 1 vector");
  const std::size_t in_len = model.input_length();
  const std::size_t out_len = model.output_length();
  std::vector<Code> inputs, expected;
  for (std::size_t v = 0; v < vectors.size(); ++v) {
    if (vectors[v].size() != in_len) {
      throw Error(ErrorCode::kInputLengthMismatch,
                  fmt::format("vector {} has {} codes, expected {}", v, vectors[v].size(), in_len));
    }
    inputs.insert(inputs.end(), vectors[v].begin(), vectors[v].end());
    const fixsim::FixedInference r = fixsim::InferFixed(model, vectors[v]);
    expected.insert(expected.end(), r.outputs.begin(), r.outputs.end());
  }

  const int n = model.format.total_bits;
  const auto period_ps = static_cast<std::int64_t>(std::llround(1e6 / spec.clock_mhz));
  const std::string tb = VhdlIdentifier(model.graph.name) + "_tb";
  return fmt::format(
      R"({header}
library ieee;
use ieee.std_logic_1164.all;
use ieee.numeric_std.all;

-- Self-checking testbench. Expected outputs come from the bit-exact
-- fixed-point interpreter and are embedded below.
entity {tb} is
end entity {tb};

architecture sim of {tb} is
  constant DATA_WIDTH      : positive := {n};
  constant IN_LEN          : positive := {in_len};
  constant OUT_LEN         : positive := {out_len};
  constant NUM_VECTORS     : positive := {nv};
  constant EXPECTED_CYCLES : natural  := {cycles};
  constant CLK_PERIOD      : time     := {period} ps;

  subtype word_t is std_logic_vector(DATA_WIDTH - 1 downto 0);
  type word_array_t is array (natural range <>) of word_t;

  constant TB_INPUTS : word_array_t(0 to NUM_VECTORS * IN_LEN - 1) := (
{inputs}  );

  constant TB_EXPECTED : word_array_t(0 to NUM_VECTORS * OUT_LEN - 1) := (
{expected}  );

  signal clk   : std_logic := '0';
  signal rst   : std_logic := '1';
  signal start : std_logic := '0';
  signal done  : std_logic;
  signal x_in  : std_logic_vector(IN_LEN * DATA_WIDTH - 1 downto 0) := (others => '0');
  signal y_out : std_logic_vector(OUT_LEN * DATA_WIDTH - 1 downto 0);
begin
  clk <= not clk after CLK_PERIOD / 2;

  dut : entity work.{top}
    port map (
      clk   => clk,
      rst   => rst,
      start => start,
      x_in  => x_in,
      y_out => y_out,
      done  => done
    );

  stimulus : process
    variable cycles : natural;
    variable errors : natural := 0;
    variable got    : word_t;
  begin
    for i in 0 to 3 loop
      wait until rising_edge(clk);
    end loop;
    rst <= '0';

    for v in 0 to NUM_VECTORS - 1 loop
      for i in 0 to IN_LEN - 1 loop
        x_in((i + 1) * DATA_WIDTH - 1 downto i * DATA_WIDTH) <= TB_INPUTS(v * IN_LEN + i);
      end loop;
      wait until rising_edge(clk);
      start <= '1';
      wait until rising_edge(clk);
      start  <= '0';
      cycles := 1;
      while done /= '1' loop
        wait until rising_edge(clk);
        cycles := cycles + 1;
      end loop;

      for i in 0 to OUT_LEN - 1 loop
        got := y_out((i + 1) * DATA_WIDTH - 1 downto i * DATA_WIDTH);
        if got /= TB_EXPECTED(v * OUT_LEN + i) then
          errors := errors + 1;
          report "vector " & integer'image(v) & " output " & integer'image(i) &
                 ": got " & integer'image(to_integer(signed(got))) &
                 ", expected " & integer'image(to_integer(signed(TB_EXPECTED(v * OUT_LEN + i))))
            severity error;
        end if;
      end loop;
      report "vector " & integer'image(v) & " cycles " & integer'image(cycles);
      assert cycles = EXPECTED_CYCLES
        report "cycle count " & integer'image(cycles) & " differs from model " &
               integer'image(EXPECTED_CYCLES)
        severity warning;
    end loop;

    assert errors = 0 report "TESTBENCH FAILED with " & integer'image(errors) & " mismatches"
      severity failure;
    report "TESTBENCH PASSED";
    std.env.finish;
  end process stimulus;
end architecture sim;
)",
      fmt::arg("header", rtl::FileHeader(model.graph.name, "Testbench")), fmt::arg("tb", tb),
      fmt::arg("n", n), fmt::arg("in_len", in_len), fmt::arg("out_len", out_len),
      fmt::arg("nv", vectors.size()), fmt::arg("cycles", spec.expected_cycles),
      fmt::arg("period", period_ps), fmt::arg("inputs", RenderWordArray(inputs, n)),
      fmt::arg("expected", RenderWordArray(expected, n)), fmt::arg("top", spec.top_entity));
}

RtlBundle GenerateRtl(const QuantizedModel& model, const GenConfig& cfg,
                      const GenOptions& options) {
  cfg.Validate();
  for (const Diagnostic& d : Validate(model.graph)) {
    if (d.severity == Severity::kError) {
      throw Error(ErrorCode::kShapeMismatch, d.code + ": " + d.message, d.layer);
    }
  }

  RtlBundle bundle;
  const ResourceFit fit = EstimateResources(model, cfg, options.device);
  if (!fit.fits) {
    std::string what;
    for (const std::string& e : fit.exceeded) what += (what.empty() ? "" : ", ") + e;
    if (!options.force) {
      throw Error(ErrorCode::kResourceOverflow, what + " on device " + options.device.name);
    }
    bundle.warnings.push_back("resource estimate exceeds " + options.device.name + ": " + what);
  }

  const std::string& name = model.graph.name;
  const std::string prefix = VhdlIdentifier(name);
  const std::string top = prefix + "_top";
  const FixedPointFormat fmt = model.format;

  AcceleratorManifest& m = bundle.manifest;
  m.model_name = name;
  m.top_entity = top;
  m.device = options.device.name;
  m.format = fmt;
  m.clock_mhz = cfg.clock_mhz;
  m.parallel_macs = cfg.parallel_macs;
  m.layer_overhead = cfg.layer_overhead;
  m.cycles_per_inference = CycleCount(model, cfg);
  m.ops = OpCount(model.graph);
  m.resources = fit.estimate;
  m.input_len = model.input_length();
  m.output_len = model.output_length();
  m.model = model;
  m.quantization = options.quantization;

  std::vector<rtl::TopInstance> instances;
  std::vector<std::string> sources;
  std::size_t len = model.input_length();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& spec = model.graph.layers[i];
    rtl::DatapathConstants dp{fmt, 0, cfg.parallel_macs, cfg.layer_overhead};
    rtl::TopInstance inst;
    inst.in_len = len;
    inst.out_len = LayerOutputLength(spec, len);
    std::visit(
        Overloaded{
            [&](const QuantizedLinear& l) {
              const std::string stem = fmt::format("linear{}", i);
              const std::string pkg = fmt::format("{}_rom_{}_pkg", prefix, stem);
              inst.entity = prefix + "_" + stem;
              dp.acc_width = AccumulatorWidth(fmt.total_bits, l.in_features) + 1;
              bundle.files["rom_" + stem + ".vhd"] = rtl::LinearRomPackage(name, pkg, l, dp);
              bundle.files[stem + ".vhd"] = rtl::LinearEntity(name, inst.entity, pkg, l);
              sources.push_back("rom_" + stem + ".vhd");
              sources.push_back(stem + ".vhd");
              inst.label = "u_" + stem;
            },
            [&](const QuantizedLstm& l) {
              const std::string stem = fmt::format("lstm{}", i);
              const std::string pkg = fmt::format("{}_rom_{}_pkg", prefix, stem);
              inst.entity = prefix + "_" + stem;
              dp.acc_width = AccumulatorWidth(fmt.total_bits, l.input_size + l.hidden_size) + 1;
              bundle.files["rom_" + stem + ".vhd"] = rtl::LstmRomPackage(name, pkg, l, dp);
              bundle.files[stem + ".vhd"] = rtl::LstmEntity(name, inst.entity, pkg, l);
              sources.push_back("rom_" + stem + ".vhd");
              sources.push_back(stem + ".vhd");
              inst.label = "u_" + stem;
            },
            [&](const QuantizedActivation& l) {
              const std::string stem = fmt::format("act{}", i);
              inst.entity = prefix + "_" + stem;
              dp.acc_width = AccumulatorWidth(fmt.total_bits, 1) + 1;
              bundle.files[stem + ".vhd"] =
                  rtl::ActivationEntity(name, inst.entity, l.kind, len, dp);
              sources.push_back(stem + ".vhd");
              inst.label = "u_" + stem;
            },
        },
        model.layers[i]);

    m.schedule.push_back(LayerSchedule{i, std::string(LayerKindName(spec)), inst.entity,
                                       LayerCycleCount(spec, len, cfg), LayerOpCount(spec, len)});
    instances.push_back(inst);
    len = inst.out_len;
  }

  bundle.files["top.vhd"] = rtl::TopEntity(name, top, instances, fmt);
  sources.push_back("top.vhd");
  bundle.files["synth.tcl"] =
      rtl::SynthScript(name, top, sources, options.device.part, cfg.clock_mhz);

  const std::vector<std::vector<Code>> vectors =
      options.vectors.empty() ? GoldenVectors(model, 4) : options.vectors;
  bundle.files["tb_top.vhd"] =
      GenerateTestbench(model, vectors, TestbenchSpec{top, m.cycles_per_inference, cfg.clock_mhz});
  bundle.files["manifest.json"] = ManifestToText(m);
  return bundle;
}

void WriteBundle(const RtlBundle& bundle, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& [file, text] : bundle.files) {
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + (dir / file).string());
  }
}

std::vector<std::string> CheckVhdlStructure(std::string_view text) {
  struct Open {
    std::string kind;
    std::string name;
    std::size_t line;
  };
  static const std::regex kEntity(R"(^\s*entity\s+(\w+)\s+is\b)");
  static const std::regex kArch(R"(^\s*architecture\s+(\w+)\s+of\s+\w+\s+is\b)");
  static const std::regex kPackage(R"(^\s*package\s+(\w+)\s+is\b)");
  static const std::regex kFunction(R"(^\s*function\s+(\w+)\b.*\bis\s*$)");
  static const std::regex kProcess(R"(^\s*(\w+\s*:\s*)?process\b)");
  static const std::regex kIf(R"(^\s*if\b.*\bthen\s*$)");
  static const std::regex kCase(R"(^\s*case\b.*\bis\s*$)");
  static const std::regex kLoop(R"(^\s*(for|while)\b.*\bloop\s*$)");
  static const std::regex kEnd(R"(^\s*end\s+(entity|architecture|package|function|process|if|case|loop)\b\s*(\w*)\s*;)");

  std::vector<std::string> problems;
  std::vector<Open> stack;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  const std::string lowered = ToLower(text);
  while (pos <= lowered.size()) {
    std::size_t eol = lowered.find('\n', pos);
    if (eol == std::string::npos) eol = lowered.size();
    std::string line = lowered.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto c = line.find("--"); c != std::string::npos) line.erase(c);

    std::smatch m;
    if (std::regex_search(line, m, kEnd)) {
      const std::string kind = m[1].str();
      const std::string name = m[2].str();
      if (stack.empty()) {
        problems.push_back(fmt::format("line {}: 'end {}' without opener", line_no, kind));
        continue;
      }
      const Open top = stack.back();
      stack.pop_back();
      if (top.kind != kind) {
        problems.push_back(fmt::format("line {}: 'end {}' closes {} opened at line {}", line_no,
                                       kind, top.kind, top.line));
      } else if (!name.empty() && !top.name.empty() && name != top.name) {
        problems.push_back(fmt::format("line {}: 'end {} {}' does not match '{}'", line_no, kind,
                                       name, top.name));
      }
      continue;
    }
    if (std::regex_search(line, m, kEntity)) {
      stack.push_back({"entity", m[1].str(), line_no});
    } else if (std::regex_search(line, m, kArch)) {
      stack.push_back({"architecture", m[1].str(), line_no});
    } else if (std::regex_search(line, m, kPackage)) {
      stack.push_back({"package", m[1].str(), line_no});
    } else if (std::regex_search(line, m, kFunction)) {
      stack.push_back({"function", "", line_no});
    } else if (std::regex_search(line, m, kProcess)) {
      stack.push_back({"process", "", line_no});
    } else if (std::regex_search(line, m, kIf)) {
      stack.push_back({"if", "", line_no});
    } else if (std::regex_search(line, m, kCase)) {
      stack.push_back({"case", "", line_no});
    } else if (std::regex_search(line, m, kLoop)) {
      stack.push_back({"loop", "", line_no});
    }
  }
  for (const Open& o : stack) {
    problems.push_back(fmt::format("line {}: {} {} is never closed", o.line, o.kind, o.name));
  }
  return problems;
}

}  // namespace accelforge
