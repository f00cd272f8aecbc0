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
#ifndef ACCELFORGE_TESTS_TEST_UTIL_H_
#define ACCELFORGE_TESTS_TEST_UTIL_H_

#include <stdlib.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "accelforge/model_ir.h"
#include "accelforge/quantizer.h"

namespace accelforge::testing {

inline std::filesystem::path SourcePath(const std::string& relative) {
  return std::filesystem::path(ACCELFORGE_SOURCE_DIR) / relative;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "accelforge-XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

using Rng = std::mt19937_64;

inline Code RandomCode(Rng& rng, FixedPointFormat fmt, double lo, double hi) {
  const auto a = std::max<std::int64_t>(fmt.min_code(), std::llround(lo / fmt.ulp()));
  const auto b = std::min<std::int64_t>(fmt.max_code(), std::llround(hi / fmt.ulp()));
  return static_cast<Code>(std::uniform_int_distribution<std::int64_t>(a, b)(rng));
}

// Real values that sit exactly on the format grid.
inline std::vector<double> GridValues(Rng& rng, std::size_t n, FixedPointFormat fmt, double lo,
                                      double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = RandomCode(rng, fmt, lo, hi) * fmt.ulp();
  return v;
}

inline std::vector<Code> RandomCodes(Rng& rng, std::size_t n, FixedPointFormat fmt, double lo,
                                     double hi) {
  std::vector<Code> v(n);
  for (auto& x : v) x = RandomCode(rng, fmt, lo, hi);
  return v;
}

inline LinearLayer GridLinear(Rng& rng, std::size_t in, std::size_t out, FixedPointFormat fmt,
                              double range) {
  return LinearLayer{in, out, Matrix{out, in, GridValues(rng, in * out, fmt, -range, range)},
                     GridValues(rng, out, fmt, -range, range)};
}

inline LstmLayer GridLstm(Rng& rng, std::size_t in, std::size_t h, std::size_t steps,
                          FixedPointFormat fmt, double range) {
  return LstmLayer{in, h, steps,
                   Matrix{4 * h, in + h, GridValues(rng, 4 * h * (in + h), fmt, -range, range)},
                   GridValues(rng, 4 * h, fmt, -range, range)};
}

// Random chain of 1..max_layers layers with dimensions <= max_dim and
// weights on the format grid.
inline ModelGraph RandomGraph(Rng& rng, FixedPointFormat fmt, std::size_t max_dim,
                              std::size_t max_layers, double range = 2.0) {
  auto dim = [&] { return std::uniform_int_distribution<std::size_t>(1, max_dim)(rng); };
  ModelGraph g;
  g.name = "random";
  const std::size_t n_layers = std::uniform_int_distribution<std::size_t>(1, max_layers)(rng);
  std::size_t width = 0;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
    if (kind == 2 && i > 0) {
      const auto act = static_cast<ActivationKind>(std::uniform_int_distribution<int>(0, 2)(rng));
      g.layers.push_back(ActivationLayer{act});
    } else if (kind == 1) {
      // Inside a chain the previous output is one step of the sequence.
      const std::size_t in = i == 0 ? dim() : width, h = dim();
      const std::size_t steps = i == 0 ? std::uniform_int_distribution<std::size_t>(1, 4)(rng) : 1;
      if (i == 0) g.input_shape = {steps, in};
      g.layers.push_back(GridLstm(rng, in, h, steps, fmt, range));
      width = h;
    } else {
      const std::size_t in = i == 0 ? dim() : width, out = dim();
      if (i == 0) g.input_shape = {in};
      g.layers.push_back(GridLinear(rng, in, out, fmt, range));
      width = out;
    }
  }
  return g;
}

}  // namespace accelforge::testing

#endif  // ACCELFORGE_TESTS_TEST_UTIL_H_
