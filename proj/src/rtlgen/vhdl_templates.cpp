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
#include <cmath>

#include "accelforge/rtlgen.h"
#include "fmt/format.h"
#include "rtlgen/templates.h"

namespace accelforge::rtl {

namespace {

using fmt::arg;

constexpr const char* kLibraries = R"(library ieee;
use ieee.std_logic_1164.all;
use ieee.numeric_std.all;
)";

// Constants shared by every datapath: word format, saturation bounds and the
// activation breakpoints, all as integer codes.
std::string ScalarConstants(const DatapathConstants& dp) {
  const FixedPointFormat f = dp.format;
  const std::int64_t round_bias = f.frac_bits > 0 ? (std::int64_t{1} << (f.frac_bits - 1)) : 0;
  return fmt::format(
      R"(  constant DATA_WIDTH     : positive := {n};
  constant FRAC_BITS      : natural  := {f};
  constant MAX_CODE       : integer  := {max};
  constant MIN_CODE       : integer  := -MAX_CODE - 1;
  constant HALF_CODE      : integer  := {half};
  constant ONE_CODE       : integer  := {one};
  constant NEG_ONE_CODE   : integer  := {neg_one};
  constant PARALLEL_MACS  : positive := {p};
  constant LAYER_OVERHEAD : natural  := {k};
  constant ACC_WIDTH      : positive := {acc};

  subtype word_t is signed(DATA_WIDTH - 1 downto 0);
  type word_array_t is array (natural range <>) of word_t;

  constant ROUND_BIAS : signed(ACC_WIDTH - 1 downto 0) := to_signed({round}, ACC_WIDTH);
)",
      arg("n", f.total_bits), arg("f", f.frac_bits), arg("max", f.max_code()),
      arg("half", ToFixed(0.5, f)), arg("one", ToFixed(1.0, f)),
      arg("neg_one", ToFixed(-1.0, f)), arg("p", dp.parallel_macs),
      arg("k", dp.layer_overhead), arg("acc", dp.acc_width), arg("round", round_bias));
}

constexpr const char* kHelperFunctions = R"(  function word_at(v : std_logic_vector; idx : natural) return word_t is
  begin
    return signed(v((idx + 1) * DATA_WIDTH - 1 downto idx * DATA_WIDTH));
  end function;

  function bias_term(b : word_t) return signed is
  begin
    return shift_left(resize(b, ACC_WIDTH), FRAC_BITS);
  end function;

  -- Round half up at FRAC_BITS, then saturate to the word range.
  function requantize(a : signed) return word_t is
    variable v : signed(ACC_WIDTH - 1 downto 0);
  begin
    v := shift_right(resize(a, ACC_WIDTH) + ROUND_BIAS, FRAC_BITS);
    if v > MAX_CODE then
      return to_signed(MAX_CODE, DATA_WIDTH);
    elsif v < MIN_CODE then
      return to_signed(MIN_CODE, DATA_WIDTH);
    end if;
    return resize(v, DATA_WIDTH);
  end function;
)";

constexpr const char* kActivationFunctions = R"(  function hard_sigmoid(x : word_t) return word_t is
    variable t : signed(DATA_WIDTH downto 0);
  begin
    t := resize(shift_right(x, 2), DATA_WIDTH + 1) + HALF_CODE;
    if t < 0 then
      return to_signed(0, DATA_WIDTH);
    elsif t > ONE_CODE then
      return to_signed(ONE_CODE, DATA_WIDTH);
    end if;
    return resize(t, DATA_WIDTH);
  end function;

  function hard_tanh(x : word_t) return word_t is
  begin
    if x > ONE_CODE then
      return to_signed(ONE_CODE, DATA_WIDTH);
    elsif x < NEG_ONE_CODE then
      return to_signed(NEG_ONE_CODE, DATA_WIDTH);
    end if;
    return x;
  end function;

  function relu(x : word_t) return word_t is
  begin
    if x < 0 then
      return to_signed(0, DATA_WIDTH);
    end if;
    return x;
  end function;
)";

std::size_t CeilDiv(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

std::string FileHeader(const std::string& model, const std::string& what) {
  return fmt::format("-- {} for model '{}'.\n-- Generated by accelforge. Do not edit.\n", what,
                     model);
}

std::string LinearRomPackage(const std::string& model, const std::string& pkg,
                             const QuantizedLinear& layer, const DatapathConstants& dp) {
  return fmt::format(
      R"({header}
{libs}
package {pkg} is
{scalars}
  constant IN_FEATURES  : positive := {in};
  constant OUT_FEATURES : positive := {out};
  constant CHUNKS       : positive := {chunks};

  -- Weights, row-major [OUT_FEATURES x IN_FEATURES].
{w}
{b}end package {pkg};
)",
      arg("header", FileHeader(model, "Weight ROM")), arg("libs", kLibraries), arg("pkg", pkg),
      arg("scalars", ScalarConstants(dp)), arg("in", layer.in_features),
      arg("out", layer.out_features), arg("chunks", CeilDiv(layer.in_features, dp.parallel_macs)),
      arg("w", RenderRom(layer.weights, "W_ROM")), arg("b", RenderRom(layer.bias, "B_ROM")));
}

std::string LinearEntity(const std::string& model, const std::string& entity,
                         const std::string& pkg, const QuantizedLinear& /*layer*/) {
  return fmt::format(
      R"({header}
{libs}
use work.{pkg}.all;

-- Time-multiplexed dense layer: PARALLEL_MACS lanes walk each output row in
-- CHUNKS cycles, fed from the weight ROM. One requantization per row.
entity {ent} is
  port (
    clk   : in  std_logic;
    rst   : in  std_logic;
    start : in  std_logic;
    x_in  : in  std_logic_vector(IN_FEATURES * DATA_WIDTH - 1 downto 0);
    y_out : out std_logic_vector(OUT_FEATURES * DATA_WIDTH - 1 downto 0);
    done  : out std_logic
  );
end entity {ent};

architecture rtl of {ent} is
  type state_t is (S_IDLE, S_MAC, S_DRAIN);

  signal state     : state_t := S_IDLE;
  signal row       : natural range 0 to OUT_FEATURES - 1 := 0;
  signal chunk     : natural range 0 to CHUNKS - 1 := 0;
  signal drain_cnt : natural range 0 to LAYER_OVERHEAD + 1 := 0;
  signal acc       : signed(ACC_WIDTH - 1 downto 0) := (others => '0');
  signal y_reg     : std_logic_vector(OUT_FEATURES * DATA_WIDTH - 1 downto 0) := (others => '0');
  signal done_reg  : std_logic := '0';

{helpers}
begin
  y_out <= y_reg;
  done  <= done_reg;

  datapath : process (clk)
    variable sum : signed(ACC_WIDTH - 1 downto 0);
    variable col : natural;
  begin
    if rising_edge(clk) then
      done_reg <= '0';
      if rst = '1' then
        state     <= S_IDLE;
        row       <= 0;
        chunk     <= 0;
        drain_cnt <= 0;
        acc       <= (others => '0');
      else
        case state is
          when S_IDLE =>
            if start = '1' then
              row   <= 0;
              chunk <= 0;
              acc   <= bias_term(B_ROM(0));
              state <= S_MAC;
            end if;

          when S_MAC =>
            sum := acc;
            for lane in 0 to PARALLEL_MACS - 1 loop
              col := chunk * PARALLEL_MACS + lane;
              if col < IN_FEATURES then
                sum := sum + resize(W_ROM(row * IN_FEATURES + col) * word_at(x_in, col), ACC_WIDTH);
              end if;
            end loop;
            if chunk = CHUNKS - 1 then
              y_reg((row + 1) * DATA_WIDTH - 1 downto row * DATA_WIDTH) <= std_logic_vector(requantize(sum));
              chunk <= 0;
              if row = OUT_FEATURES - 1 then
                drain_cnt <= 1;
                state     <= S_DRAIN;
              else
                row <= row + 1;
                acc <= bias_term(B_ROM(row + 1));
              end if;
            else
              chunk <= chunk + 1;
              acc   <= sum;
            end if;

          when S_DRAIN =>
            if drain_cnt >= LAYER_OVERHEAD - 1 then
              done_reg <= '1';
              state    <= S_IDLE;
            else
              drain_cnt <= drain_cnt + 1;
            end if;
        end case;
      end if;
    end if;
  end process datapath;
end architecture rtl;
)",
      arg("header", FileHeader(model, "Dense layer")), arg("libs", kLibraries), arg("pkg", pkg),
      arg("ent", entity), arg("helpers", kHelperFunctions));
}

std::string LstmRomPackage(const std::string& model, const std::string& pkg,
                           const QuantizedLstm& layer, const DatapathConstants& dp) {
  const std::size_t width = layer.input_size + layer.hidden_size;
  return fmt::format(
      R"({header}
{libs}
package {pkg} is
{scalars}
  constant IN_SIZE : positive := {in};
  constant HIDDEN  : positive := {h};
  constant STEPS   : positive := {steps};
  constant ROWS    : positive := 4 * HIDDEN;
  constant WIDTH   : positive := IN_SIZE + HIDDEN;
  constant CHUNKS  : positive := {chunks};

  -- Gate weights, row-major [ROWS x WIDTH]; rows ordered i, f, g, o and
  -- columns over the concatenation [x_t, h_(t-1)].
{w}
{b}end package {pkg};
)",
      arg("header", FileHeader(model, "LSTM gate ROM")), arg("libs", kLibraries),
      arg("pkg", pkg), arg("scalars", ScalarConstants(dp)), arg("in", layer.input_size),
      arg("h", layer.hidden_size), arg("steps", layer.steps),
      arg("chunks", CeilDiv(width, dp.parallel_macs)),
      arg("w", RenderRom(layer.gate_weights, "GW_ROM")),
      arg("b", RenderRom(layer.gate_bias, "GB_ROM")));
}

std::string LstmEntity(const std::string& model, const std::string& entity,
                       const std::string& pkg, const QuantizedLstm& /*layer*/) {
  return fmt::format(
      R"({header}
{libs}
use work.{pkg}.all;

-- LSTM cell with a shared MAC group for the gate rows followed by a
-- nine-cycle elementwise pass per hidden unit:
--   i, f, o = hard_sigmoid, g = hard_tanh
--   c' = requantize(f * c + i * g), h' = requantize(o * hard_tanh(c'))
entity {ent} is
  port (
    clk   : in  std_logic;
    rst   : in  std_logic;
    start : in  std_logic;
    x_in  : in  std_logic_vector(STEPS * IN_SIZE * DATA_WIDTH - 1 downto 0);
    y_out : out std_logic_vector(HIDDEN * DATA_WIDTH - 1 downto 0);
    done  : out std_logic
  );
end entity {ent};

architecture rtl of {ent} is
  type state_t is (S_IDLE, S_GATES, S_ELEM, S_DRAIN);

  signal state     : state_t := S_IDLE;
  signal step      : natural range 0 to STEPS - 1 := 0;
  signal row       : natural range 0 to ROWS - 1 := 0;
  signal chunk     : natural range 0 to CHUNKS - 1 := 0;
  signal unit      : natural range 0 to HIDDEN - 1 := 0;
  signal phase     : natural range 0 to 8 := 0;
  signal drain_cnt : natural range 0 to LAYER_OVERHEAD + 1 := 0;
  signal acc       : signed(ACC_WIDTH - 1 downto 0) := (others => '0');
  signal eacc      : signed(ACC_WIDTH - 1 downto 0) := (others => '0');
  signal z         : word_array_t(0 to ROWS - 1) := (others => (others => '0'));
  signal h_reg     : word_array_t(0 to HIDDEN - 1) := (others => (others => '0'));
  signal c_reg     : word_array_t(0 to HIDDEN - 1) := (others => (others => '0'));
  signal gi, gf, gg, go, tc : word_t := (others => '0');
  signal done_reg  : std_logic := '0';

{helpers}
{activations}
  function operand(x : std_logic_vector; h : word_array_t; t, col : natural) return word_t is
  begin
    if col < IN_SIZE then
      return word_at(x, t * IN_SIZE + col);
    end if;
    return h(col - IN_SIZE);
  end function;

  function pack(h : word_array_t) return std_logic_vector is
    variable v : std_logic_vector(HIDDEN * DATA_WIDTH - 1 downto 0);
  begin
    for j in 0 to HIDDEN - 1 loop
      v((j + 1) * DATA_WIDTH - 1 downto j * DATA_WIDTH) := std_logic_vector(h(j));
    end loop;
    return v;
  end function;
begin
  y_out <= pack(h_reg);
  done  <= done_reg;

  datapath : process (clk)
    variable sum : signed(ACC_WIDTH - 1 downto 0);
    variable col : natural;
  begin
    if rising_edge(clk) then
      done_reg <= '0';
      if rst = '1' then
        state     <= S_IDLE;
        step      <= 0;
        row       <= 0;
        chunk     <= 0;
        unit      <= 0;
        phase     <= 0;
        drain_cnt <= 0;
      else
        case state is
          when S_IDLE =>
            if start = '1' then
              step  <= 0;
              row   <= 0;
              chunk <= 0;
              h_reg <= (others => (others => '0'));
              c_reg <= (others => (others => '0'));
              acc   <= bias_term(GB_ROM(0));
              state <= S_GATES;
            end if;

          when S_GATES =>
            sum := acc;
            for lane in 0 to PARALLEL_MACS - 1 loop
              col := chunk * PARALLEL_MACS + lane;
              if col < WIDTH then
                sum := sum + resize(GW_ROM(row * WIDTH + col) * operand(x_in, h_reg, step, col), ACC_WIDTH);
              end if;
            end loop;
            if chunk = CHUNKS - 1 then
              z(row) <= requantize(sum);
              chunk  <= 0;
              if row = ROWS - 1 then
                row   <= 0;
                unit  <= 0;
                phase <= 0;
                state <= S_ELEM;
              else
                row <= row + 1;
                acc <= bias_term(GB_ROM(row + 1));
              end if;
            else
              chunk <= chunk + 1;
              acc   <= sum;
            end if;

          when S_ELEM =>
            case phase is
              when 0 => gi <= hard_sigmoid(z(unit));
              when 1 => gf <= hard_sigmoid(z(HIDDEN + unit));
              when 2 => gg <= hard_tanh(z(2 * HIDDEN + unit));
              when 3 => go <= hard_sigmoid(z(3 * HIDDEN + unit));
              when 4 => eacc <= resize(gf * c_reg(unit), ACC_WIDTH);
              when 5 => eacc <= eacc + resize(gi * gg, ACC_WIDTH);
              when 6 => c_reg(unit) <= requantize(eacc);
              when 7 => tc <= hard_tanh(c_reg(unit));
              when others => h_reg(unit) <= requantize(resize(go * tc, ACC_WIDTH));
            end case;
            if phase = 8 then
              phase <= 0;
              if unit = HIDDEN - 1 then
                unit <= 0;
                if step = STEPS - 1 then
                  drain_cnt <= 1;
                  state     <= S_DRAIN;
                else
                  step  <= step + 1;
                  acc   <= bias_term(GB_ROM(0));
                  state <= S_GATES;
                end if;
              else
                unit <= unit + 1;
              end if;
            else
              phase <= phase + 1;
            end if;

          when S_DRAIN =>
            if drain_cnt >= LAYER_OVERHEAD - 1 then
              done_reg <= '1';
              state    <= S_IDLE;
            else
              drain_cnt <= drain_cnt + 1;
            end if;
        end case;
      end if;
    end if;
  end process datapath;
end architecture rtl;
)",
      arg("header", FileHeader(model, "LSTM layer")), arg("libs", kLibraries), arg("pkg", pkg),
      arg("ent", entity), arg("helpers", kHelperFunctions),
      arg("activations", kActivationFunctions));
}

std::string ActivationEntity(const std::string& model, const std::string& entity,
                             ActivationKind kind, std::size_t length,
                             const DatapathConstants& dp) {
  const char* fn = kind == ActivationKind::kHardSigmoid ? "hard_sigmoid"
                   : kind == ActivationKind::kHardTanh  ? "hard_tanh"
                                                        : "relu";
  return fmt::format(
      R"({header}
{libs}
-- Elementwise {fn} over LENGTH words, PARALLEL_MACS lanes per cycle.
entity {ent} is
  port (
    clk   : in  std_logic;
    rst   : in  std_logic;
    start : in  std_logic;
    x_in  : in  std_logic_vector({bits} - 1 downto 0);
    y_out : out std_logic_vector({bits} - 1 downto 0);
    done  : out std_logic
  );
end entity {ent};

architecture rtl of {ent} is
{scalars}
  constant LENGTH : positive := {len};
  constant CHUNKS : positive := {chunks};

  type state_t is (S_IDLE, S_RUN, S_DRAIN);

  signal state     : state_t := S_IDLE;
  signal chunk     : natural range 0 to CHUNKS - 1 := 0;
  signal drain_cnt : natural range 0 to LAYER_OVERHEAD + 1 := 0;
  signal y_reg     : std_logic_vector(LENGTH * DATA_WIDTH - 1 downto 0) := (others => '0');
  signal done_reg  : std_logic := '0';

{helpers}
{activations}begin
  y_out <= y_reg;
  done  <= done_reg;

  datapath : process (clk)
    variable idx : natural;
  begin
    if rising_edge(clk) then
      done_reg <= '0';
      if rst = '1' then
        state     <= S_IDLE;
        chunk     <= 0;
        drain_cnt <= 0;
      else
        case state is
          when S_IDLE =>
            if start = '1' then
              chunk <= 0;
              state <= S_RUN;
            end if;

          when S_RUN =>
            for lane in 0 to PARALLEL_MACS - 1 loop
              idx := chunk * PARALLEL_MACS + lane;
              if idx < LENGTH then
                y_reg((idx + 1) * DATA_WIDTH - 1 downto idx * DATA_WIDTH) <= std_logic_vector({fn}(word_at(x_in, idx)));
              end if;
            end loop;
            if chunk = CHUNKS - 1 then
              chunk     <= 0;
              drain_cnt <= 1;
              state     <= S_DRAIN;
            else
              chunk <= chunk + 1;
            end if;

          when S_DRAIN =>
            if drain_cnt >= LAYER_OVERHEAD - 1 then
              done_reg <= '1';
              state    <= S_IDLE;
            else
              drain_cnt <= drain_cnt + 1;
            end if;
        end case;
      end if;
    end if;
  end process datapath;
end architecture rtl;
)",
      arg("header", FileHeader(model, "Activation layer")), arg("libs", kLibraries),
      arg("fn", fn), arg("ent", entity), arg("bits", length * dp.format.total_bits),
      arg("scalars", ScalarConstants(dp)), arg("len", length),
      arg("chunks", CeilDiv(length, dp.parallel_macs)), arg("helpers", kHelperFunctions),
      arg("activations", kActivationFunctions));
}

std::string TopEntity(const std::string& model, const std::string& top,
                      const std::vector<TopInstance>& layers, FixedPointFormat fmt) {
  const int n = fmt.total_bits;
  const std::size_t in_bits = layers.front().in_len * n;
  const std::size_t out_bits = layers.back().out_len * n;

  std::string signals;
  std::string body;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    signals += fmt::format(
        "  signal start_{0} : std_logic;\n  signal done_{0}  : std_logic;\n"
        "  signal data_{1}  : std_logic_vector({2} - 1 downto 0);\n",
        i, i + 1, layers[i].out_len * n);
    body += fmt::format(R"(
  start_{i} <= {src};

  {label} : entity work.{ent}
    port map (
      clk   => clk,
      rst   => rst,
      start => start_{i},
      x_in  => data_{i},
      y_out => data_{next},
      done  => done_{i}
    );
)",
                        arg("i", i), arg("next", i + 1),
                        arg("src", i == 0 ? std::string("start") : fmt::format("done_{}", i - 1)),
                        arg("label", layers[i].label), arg("ent", layers[i].entity));
  }
  return fmt::format(
      R"({header}
{libs}
-- Layer chain with a start/done handshake; each layer starts when its
-- predecessor signals done.
entity {top} is
  port (
    clk   : in  std_logic;
    rst   : in  std_logic;
    start : in  std_logic;
    x_in  : in  std_logic_vector({in_bits} - 1 downto 0);
    y_out : out std_logic_vector({out_bits} - 1 downto 0);
    done  : out std_logic
  );
end entity {top};

architecture rtl of {top} is
  signal data_0 : std_logic_vector({in_bits} - 1 downto 0);
{signals}begin
  data_0 <= x_in;
{body}
  y_out <= data_{last};
  done  <= done_{last_done};
end architecture rtl;
)",
      arg("header", FileHeader(model, "Accelerator top level")), arg("libs", kLibraries),
      arg("top", top), arg("in_bits", in_bits), arg("out_bits", out_bits),
      arg("signals", signals), arg("body", body), arg("last", layers.size()),
      arg("last_done", layers.size() - 1));
}

std::string SynthScript(const std::string& model, const std::string& top,
                        const std::vector<std::string>& sources, const std::string& part,
                        double clock_mhz) {
  std::string files;
  for (const std::string& s : sources) files += "  " + s + " \\\n";
  return fmt::format(
      R"(# Synthesis script stub for model '{model}'.
# Generated by accelforge. Do not edit.
# Device-specific settings are confined to this file; the VHDL sources use
# no vendor primitives.

set part {part}
set top  {top}

read_vhdl -vhdl2008 [list \
{files}]

synth_design -top $top -part $part
create_clock -name clk -period {period:.3f} [get_ports clk]

report_utilization -file utilization.rpt
report_timing_summary -file timing.rpt
report_power -file power.rpt

# Implementation and bitstream generation are left to the vendor flow:
#   opt_design; place_design; route_design; write_bitstream $top.bit
)",
      arg("model", model), arg("part", part), arg("top", top), arg("files", files),
      arg("period", 1000.0 / clock_mhz));
}

}  // namespace accelforge::rtl
