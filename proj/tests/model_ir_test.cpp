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
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "accelforge/model_ir.h"
#include "test_util.h"

namespace accelforge {
namespace {

ErrorCode ParseError(std::string_view doc) {
  try {
    ParseModel(doc);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "document was accepted";
  return ErrorCode::kIoError;
}

std::optional<std::size_t> ParseErrorLayer(std::string_view doc) {
  try {
    ParseModel(doc);
  } catch (const Error& e) {
    return e.layer();
  }
  return std::nullopt;
}

constexpr const char* kLinear21 = R"({
  "name": "tiny", "input_shape": [2],
  "layers": [{"kind": "linear", "in_features": 2, "out_features": 1,
              "weights": [[0.5, -0.25]], "bias": [0.0]}]})";

TEST(ParseModel, MinimalLinear) {
  const ModelGraph g = ParseModel(kLinear21);
  EXPECT_EQ(g.name, "tiny");
  EXPECT_EQ(g.input_shape, std::vector<std::size_t>{2});
  ASSERT_EQ(g.layers.size(), 1u);
  const auto& l = std::get<LinearLayer>(g.layers[0]);
  EXPECT_EQ(l.weights.data, (std::vector<double>{0.5, -0.25}));
  EXPECT_EQ(l.bias, std::vector<double>{0.0});
}

TEST(ParseModel, UnknownKind) {
  EXPECT_EQ(ParseError(R"({"name":"m","input_shape":[4],"layers":[{"kind":"conv2d"}]})"),
            ErrorCode::kUnknownLayerKind);
  EXPECT_EQ(ParseError(R"({"name":"m","input_shape":[4],
      "layers":[{"kind":"activation","function":"gelu"}]})"),
            ErrorCode::kUnknownLayerKind);
}

TEST(ParseModel, ChainMismatchNamesLayer) {
  constexpr const char* doc = R"({"name":"m","input_shape":[4],"layers":[
    {"kind":"linear","in_features":4,"out_features":2,
     "weights":[[1,0,0,0],[0,1,0,0]],"bias":[0,0]},
    {"kind":"linear","in_features":3,"out_features":1,"weights":[[1,1,1]],"bias":[0]}]})";
  EXPECT_EQ(ParseError(doc), ErrorCode::kShapeMismatch);
  EXPECT_EQ(ParseErrorLayer(doc), std::optional<std::size_t>(1));
}

TEST(ParseModel, MalformedDocuments) {
  EXPECT_EQ(ParseError("not json"), ErrorCode::kMalformedDocument);
  EXPECT_EQ(ParseError("[1,2]"), ErrorCode::kMalformedDocument);
  EXPECT_EQ(ParseError(R"({"name":"m","input_shape":[2]})"), ErrorCode::kMalformedDocument);
  EXPECT_EQ(ParseError(R"({"name":"m","input_shape":[2],"layers":[{"kind":"linear",
      "in_features":2,"out_features":1,"weights":[[0.5,"x"]],"bias":[0]}]})"),
            ErrorCode::kMalformedDocument);
}

TEST(ParseModel, RaggedWeightsAreShapeMismatch) {
  EXPECT_EQ(ParseError(R"({"name":"m","input_shape":[2],"layers":[{"kind":"linear",
      "in_features":2,"out_features":2,"weights":[[1,2],[3]],"bias":[0,0]}]})"),
            ErrorCode::kShapeMismatch);
}

TEST(ParseModel, EmptyGraphRejected) {
  EXPECT_EQ(ParseError(R"({"name":"m","input_shape":[2],"layers":[]})"), ErrorCode::kEmptyGraph);
}

TEST(ParseModel, LstmBiasPairIsFolded) {
  const ModelGraph g = ParseModel(R"({"name":"m","input_shape":[1],"layers":[
    {"kind":"lstm","input_size":1,"hidden_size":1,
     "gate_weights":[[0.1,0.2],[0.3,0.4],[0.5,0.6],[0.7,0.8]],
     "bias_ih":[0.5,0.25,1,2],"bias_hh":[0.25,0.25,-1,0.5]}]})");
  const auto& l = std::get<LstmLayer>(g.layers[0]);
  EXPECT_EQ(l.steps, 1u);
  EXPECT_EQ(l.gate_bias, (std::vector<double>{0.75, 0.5, 0.0, 2.5}));
}

TEST(Validate, ValidTwoLayerGraphIsClean) {
  ModelGraph g;
  g.name = "two";
  g.input_shape = {2};
  g.layers.push_back(LinearLayer{2, 3, Matrix{3, 2, std::vector<double>(6, 0.1)}, {0, 0, 0}});
  g.layers.push_back(LinearLayer{3, 1, Matrix{1, 3, {1, 2, 3}}, {0.5}});
  EXPECT_TRUE(Validate(g).empty());
}

TEST(Validate, LstmHiddenZero) {
  ModelGraph g;
  g.name = "z";
  g.input_shape = {2};
  g.layers.push_back(LstmLayer{2, 0, 1, Matrix{0, 2, {}}, {}});
  const auto d = Validate(g);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].severity, Severity::kError);
  EXPECT_EQ(d[0].code, "DimensionZero");
  EXPECT_EQ(d[0].layer, 0u);
}

TEST(Validate, NanWeight) {
  ModelGraph g;
  g.name = "nan";
  g.input_shape = {2};
  g.layers.push_back(
      LinearLayer{2, 1, Matrix{1, 2, {std::numeric_limits<double>::quiet_NaN(), 1.0}}, {0.0}});
  const auto d = Validate(g);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].code, "NonFiniteWeight");
  EXPECT_EQ(d[0].layer, 0u);
  EXPECT_TRUE(HasErrors(d));
}

TEST(Validate, DiagnosticsOrderedByLayer) {
  ModelGraph g;
  g.name = "multi";
  g.input_shape = {2};
  g.layers.push_back(LinearLayer{2, 2, Matrix{2, 2, {1, 0, 0, 1}}, {0}});  // bias too short
  g.layers.push_back(ActivationLayer{ActivationKind::kReLU});
  g.layers.push_back(ActivationLayer{ActivationKind::kHardTanh});
  g.layers.push_back(
      LinearLayer{2, 1, Matrix{1, 2, {std::numeric_limits<double>::infinity(), 0}}, {0}});
  const auto d = Validate(g);
  ASSERT_GE(d.size(), 3u);
  for (std::size_t i = 1; i < d.size(); ++i) EXPECT_LE(d[i - 1].layer, d[i].layer);
  EXPECT_EQ(d.front().code, "ShapeMismatch");
  bool warned = false;
  for (const auto& x : d) warned |= x.severity == Severity::kWarning;
  EXPECT_TRUE(warned);
}

TEST(OpCount, Examples) {
  ModelGraph lin;
  lin.input_shape = {4};
  lin.layers.push_back(LinearLayer{4, 2, Matrix{2, 4, std::vector<double>(8, 0.0)}, {0, 0}});
  EXPECT_EQ(OpCount(lin), 18u);

  ModelGraph lstm;
  lstm.input_shape = {4};
  lstm.layers.push_back(LstmLayer{4, 3, 1, Matrix{12, 7, std::vector<double>(84, 0.0)},
                                  std::vector<double>(12, 0.0)});
  EXPECT_EQ(OpCount(lstm), 207u);

  ModelGraph act;
  act.input_shape = {5};
  act.layers.push_back(ActivationLayer{ActivationKind::kReLU});
  EXPECT_EQ(OpCount(act), 5u);
}

// Forward pass that counts each scalar multiply, add and activation call.
struct Counting {
  std::uint64_t ops = 0;
  double Mul(double a, double b) { ++ops; return a * b; }
  double Add(double a, double b) { ++ops; return a + b; }
  double Act(ActivationKind k, double x) { ++ops; return ApplyActivation(k, x); }

  std::vector<double> Dense(const Matrix& w, const std::vector<double>& b,
                            const std::vector<double>& x) {
    std::vector<double> y(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < w.cols; ++c) acc = Add(acc, Mul(w.at(r, c), x[c]));
      y[r] = Add(acc, b[r]);
    }
    return y;
  }

  std::vector<double> Run(const ModelGraph& g, std::vector<double> x) {
    for (const auto& spec : g.layers) {
      if (const auto* l = std::get_if<LinearLayer>(&spec)) {
        x = Dense(l->weights, l->bias, x);
      } else if (const auto* l = std::get_if<LstmLayer>(&spec)) {
        const std::size_t h_n = l->hidden_size;
        std::vector<double> h(h_n, 0.0), c(h_n, 0.0);
        for (std::size_t t = 0; t < l->steps; ++t) {
          std::vector<double> cat(x.begin() + t * l->input_size,
                                  x.begin() + (t + 1) * l->input_size);
          cat.insert(cat.end(), h.begin(), h.end());
          const auto z = Dense(l->gate_weights, l->gate_bias, cat);
          for (std::size_t j = 0; j < h_n; ++j) {
            const double i = Act(ActivationKind::kHardSigmoid, z[j]);
            const double f = Act(ActivationKind::kHardSigmoid, z[h_n + j]);
            const double gg = Act(ActivationKind::kHardTanh, z[2 * h_n + j]);
            const double o = Act(ActivationKind::kHardSigmoid, z[3 * h_n + j]);
            c[j] = Add(Mul(f, c[j]), Mul(i, gg));
            h[j] = Mul(o, Act(ActivationKind::kHardTanh, c[j]));
          }
        }
        x = h;
      } else {
        for (auto& v : x) v = Act(std::get<ActivationLayer>(spec).kind, v);
      }
    }
    return x;
  }
};

TEST(OpCount, MatchesInstrumentedInterpreterOnSmallSweep) {
  const auto fmt = FixedPointFormat::Make(16, 8);
  testing::Rng rng(11);
  // Every single-layer shape with dims <= 8.
  for (std::size_t in = 1; in <= 8; ++in) {
    for (std::size_t out = 1; out <= 8; ++out) {
      ModelGraph g;
      g.input_shape = {in};
      g.layers.push_back(testing::GridLinear(rng, in, out, fmt, 1.0));
      Counting counter;
      const auto x = testing::GridValues(rng, in, fmt, -1, 1);
      const auto y = counter.Run(g, x);
      EXPECT_EQ(counter.ops, OpCount(g)) << in << "x" << out;
      const auto ref = InferFloat(g, x);
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);

      for (std::size_t steps = 1; steps <= 3; ++steps) {
        ModelGraph l;
        l.input_shape = {steps * in};
        l.layers.push_back(testing::GridLstm(rng, in, out, steps, fmt, 1.0));
        Counting lc;
        const auto lx = testing::GridValues(rng, steps * in, fmt, -1, 1);
        const auto ly = lc.Run(l, lx);
        EXPECT_EQ(lc.ops, OpCount(l)) << "lstm " << in << "x" << out << "x" << steps;
        const auto lref = InferFloat(l, lx);
        for (std::size_t i = 0; i < ly.size(); ++i) EXPECT_NEAR(ly[i], lref[i], 1e-12);
      }
    }
  }
  for (int trial = 0; trial < 300; ++trial) {
    const ModelGraph g = testing::RandomGraph(rng, fmt, 8, 4);
    ASSERT_FALSE(HasErrors(Validate(g)));
    Counting counter;
    counter.Run(g, testing::GridValues(rng, g.input_length(), fmt, -1, 1));
    EXPECT_EQ(counter.ops, OpCount(g));
  }
}

TEST(InferFloat, Examples) {
  ModelGraph id;
  id.input_shape = {2};
  id.layers.push_back(LinearLayer{2, 2, Matrix{2, 2, {1, 0, 0, 1}}, {0, 0}});
  const std::vector<double> x{3, 4};
  EXPECT_EQ(InferFloat(id, x), x);

  EXPECT_EQ(HardSigmoid(0.0), 0.5);
  EXPECT_EQ(HardSigmoid(2.5), 1.0);
  EXPECT_EQ(HardSigmoid(-3.0), 0.0);
  EXPECT_EQ(HardTanh(-4.0), -1.0);
  EXPECT_EQ(Relu(-0.5), 0.0);

  ModelGraph zero;
  zero.input_shape = {6};
  zero.layers.push_back(LstmLayer{3, 4, 2, Matrix{16, 7, std::vector<double>(112, 0.0)},
                                  std::vector<double>(16, 0.0)});
  const auto h = InferFloat(zero, std::vector<double>{1, -2, 3, 0.5, 9, -7});
  EXPECT_EQ(h, std::vector<double>(4, 0.0));
}

TEST(InferFloat, LengthChecked) {
  const ModelGraph g = ParseModel(kLinear21);
  try {
    InferFloat(g, std::vector<double>{1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInputLengthMismatch);
  }
}

TEST(InferFloat, ChainConsistency) {
  const auto fmt = FixedPointFormat::Make(16, 8);
  testing::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const ModelGraph g = testing::RandomGraph(rng, fmt, 8, 4);
    const auto y = InferFloat(g, std::vector<double>(g.input_length(), 0.25));
    EXPECT_EQ(y.size(), OutputLength(g));
    EXPECT_THROW(InferFloat(g, std::vector<double>(g.input_length() + 1, 0.0)), Error);
  }
}

TEST(Serialize, RoundTripIsIdentity) {
  testing::Rng rng(3);
  std::uniform_real_distribution<double> any(-1e3, 1e3);
  const auto fmt = FixedPointFormat::Make(16, 8);
  for (int trial = 0; trial < 300; ++trial) {
    ModelGraph g = testing::RandomGraph(rng, fmt, 8, 5);
    g.name = "model_" + std::to_string(trial);
    // Off-grid values exercise decimal round-tripping.
    for (auto& spec : g.layers) {
      if (auto* l = std::get_if<LinearLayer>(&spec)) {
        for (auto& w : l->weights.data) w = any(rng);
      } else if (auto* l = std::get_if<LstmLayer>(&spec)) {
        for (auto& b : l->gate_bias) b = any(rng) * 1e-7;
      }
    }
    const std::string text = SerializeModel(g);
    EXPECT_EQ(ParseModel(text), g);
    EXPECT_EQ(SerializeModel(ParseModel(text)), text);
  }
}

TEST(Serialize, FixturesRoundTrip) {
  for (const char* name : {"linear2x1", "mlp", "lstm"}) {
    const auto path = testing::SourcePath(std::string("tests/fixtures/") + name + ".json");
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    const ModelGraph g = ParseModel(ss.str());
    EXPECT_EQ(ParseModel(SerializeModel(g)), g) << name;
  }
}

}  // namespace
}  // namespace accelforge
