// Copyright 2026 The Reflectiva Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "reflectiva/text.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "reflectiva/util.hpp"

namespace reflectiva {

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string lowered = to_lower(text);
  std::string stripped;
  stripped.reserve(lowered.size());
  for (std::size_t i = 0; i < lowered.size(); ++i) {
    const char c = lowered[i];
    if (std::ispunct(static_cast<unsigned char>(c))) {
      const bool decimal_point = c == '.' && i > 0 && i + 1 < lowered.size() &&
                                 is_digit(lowered[i - 1]) && is_digit(lowered[i + 1]);
      if (!decimal_point) continue;
    }
    stripped.push_back(c);
  }

  std::istringstream words(stripped);
  std::string word;
  std::string out;
  while (words >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

std::vector<std::string> answer_tokens(std::string_view text) {
  std::istringstream words(normalize_answer(text));
  std::vector<std::string> out;
  std::string word;
  while (words >> word) out.push_back(word);
  return out;
}

std::optional<double> parse_number(std::string_view text) {
  const std::string_view t = trim(text);
  if (t.empty()) return std::nullopt;
  std::string cleaned;
  cleaned.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const char c = t[i];
    if (c == ',' && i > 0 && i + 1 < t.size() && is_digit(t[i - 1]) && is_digit(t[i + 1])) continue;
    cleaned.push_back(c);
  }
  const char* first = cleaned.data();
  const char* last = cleaned.data() + cleaned.size();
  if (*first == '+') ++first;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::fixed);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace reflectiva
