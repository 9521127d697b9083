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

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reflectiva {

/// Lowercase, drop punctuation (a '.' between two digits survives so decimals stay
/// numeric), drop the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);

/// Whitespace tokens of normalize_answer(text).
std::vector<std::string> answer_tokens(std::string_view text);

/// Parses the whole trimmed string as a real number. Thousands separators
/// ("1,200") are accepted; anything else trailing is rejected.
std::optional<double> parse_number(std::string_view text);

}  // namespace reflectiva
