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
#ifndef ACCELFORGE_TESTS_VHDL_UTIL_H_
#define ACCELFORGE_TESTS_VHDL_UTIL_H_

#include <cstdint>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

namespace accelforge::testing {

// Test-side literal decoder, independent of the library's parser. Throws on
// literals whose width does not match n.
inline std::vector<std::int64_t> DecodeLiterals(const std::string& text, int n) {
  static const std::regex kLit(R"re((?:(\d+))?x"([0-9A-F]+)")re");
  std::vector<std::int64_t> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kLit);
       it != std::sregex_iterator(); ++it) {
    const std::string width = (*it)[1].str();
    const std::string hex = (*it)[2].str();
    const bool sized_ok = width.empty()
                              ? n % 4 == 0 && static_cast<int>(hex.size()) * 4 == n
                              : std::stoi(width) == n &&
                                    hex.size() == static_cast<std::size_t>((n + 3) / 4);
    const std::uint64_t raw = std::stoull(hex, nullptr, 16);
    if (!sized_ok || raw >= (std::uint64_t{1} << n)) {
      throw std::runtime_error("malformed " + std::to_string(n) + "-bit literal " +
                               (*it)[0].str());
    }
    const std::int64_t half = std::int64_t{1} << (n - 1);
    out.push_back(static_cast<std::int64_t>(raw) >= half ? static_cast<std::int64_t>(raw) - 2 * half
                                                        : static_cast<std::int64_t>(raw));
  }
  return out;
}

inline std::string Block(const std::string& text, const std::string& constant) {
  const auto at = text.find("constant " + constant + " ");
  if (at == std::string::npos) return {};
  return text.substr(at, text.find(");", at) - at);
}

}  // namespace accelforge::testing

#endif  // ACCELFORGE_TESTS_VHDL_UTIL_H_
