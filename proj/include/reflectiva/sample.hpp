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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace reflectiva {

enum class Split { Train, Val, Test };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);

/// An image-question pair. `subset` tags the evaluation breakdown a sample belongs to
/// ("unseen_question", "unseen_entity", "single_hop", "two_hop"); empty when unused.
struct QuerySample {
  std::string id;
  std::string question;
  std::string image_ref;
  std::optional<std::vector<float>> image_embedding;
  std::vector<std::string> gold_answers;
  std::optional<std::string> gold_doc_id;
  std::string dataset;
  Split split = Split::Test;
  std::string subset;
  std::vector<std::string> captions;

  bool operator==(const QuerySample&) const = default;
};

/// Checks the per-sample invariants; `embedding_dim` 0 skips the dimension check.
void validate_sample(const QuerySample& sample, std::size_t embedding_dim = 0);

nlohmann::json to_json(const QuerySample& sample);
QuerySample sample_from_json(const nlohmann::json& j);

/// JSONL, one sample per line. Errors cite the line.
std::vector<QuerySample> load_samples(const std::filesystem::path& path);
void save_samples(const std::vector<QuerySample>& samples, const std::filesystem::path& path);

}  // namespace reflectiva
