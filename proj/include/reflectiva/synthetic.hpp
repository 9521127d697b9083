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

// Seeded synthetic knowledge base, query set and mock-backend scripts for
// desk-scale runs and tests.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reflectiva/kb_store.hpp"
#include "reflectiva/sample.hpp"

namespace reflectiva {

struct SyntheticConfig {
  std::size_t num_docs = 60;
  std::size_t dim = 32;
  std::size_t num_samples = 50;
  double noret_fraction = 0.2;          // samples answerable without the KB
  double retrieval_miss_fraction = 0.15;  // query vector unrelated to the gold page
  double decision_error_fraction = 0.1;   // scripted wrong retrieval decision
  double judgment_miss_fraction = 0.1;    // answer passage scripted <NOREL>
  double false_rel_fraction = 0.1;        // other gold passages scripted <REL>
  std::size_t min_sections = 2;
  std::size_t max_sections = 5;
  double query_noise = 0.3;  // norm of the perturbation added to the gold vector
  std::uint64_t seed = 0;
};

/// What the scripts say about one sample; lets tests derive outcomes independently.
struct SampleFacts {
  std::string sample_id;
  bool needs_kb = true;
  bool scripted_ret = true;
  bool retrieval_miss = false;
  std::optional<std::size_t> answer_section;  // in the gold page
  bool answer_judged_rel = true;
  std::vector<double> gold_rel_probs;  // per gold section, probability given to <REL>
  std::string answer_sentence;
  std::string wrong_answer;
};

struct SyntheticWorld {
  std::vector<Document> documents;
  std::size_t dim = 0;
  std::vector<QuerySample> samples;
  std::vector<SampleFacts> facts;  // parallel to samples
  nlohmann::json scripts;          // MockBackend::load_scripts format

  KnowledgeBase knowledge_base() const;
};

/// Judgment probability for questions that have no specific script.
inline constexpr double kUnscriptedRelProb = 0.2;

SyntheticWorld make_synthetic_world(const SyntheticConfig& config);

/// Writes kb.jsonl, samples.jsonl and scripts.json into `dir`.
void write_synthetic_world(const SyntheticWorld& world, const std::filesystem::path& dir);

}  // namespace reflectiva
