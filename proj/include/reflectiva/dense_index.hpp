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

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reflectiva/embedder.hpp"
#include "reflectiva/kb_store.hpp"
#include "reflectiva/kernels.hpp"

namespace reflectiva {

enum class RetrievalMode { TextualTitle, TextualTitleSummary, Visual };

std::string_view to_string(RetrievalMode mode) noexcept;
/// Accepts "textual_title", "textual_title_summary", "visual".
RetrievalMode parse_retrieval_mode(std::string_view text);

struct RetrievalHit {
  std::string doc_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RetrievalHit&) const = default;
};

/// Exact cosine index over unit-normalized document vectors. Immutable once built;
/// `search` is safe from any number of threads.
class DenseIndex {
 public:
  /// Vectors are normalized on insertion. Throws ValidationError on duplicate ids,
  /// wrong lengths, or zero vectors.
  DenseIndex(RetrievalMode mode, std::size_t dim, std::vector<std::pair<std::string, std::vector<float>>> entries);

  RetrievalMode mode() const noexcept { return mode_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& doc_id(std::size_t row) const { return ids_.at(row); }
  std::span<const float> vector(std::size_t row) const { return matrix().row(row); }
  /// Row of `doc_id`, or size() when absent.
  std::size_t row_of(std::string_view doc_id) const;

  /// Top-k by cosine, ties broken by insertion order. k larger than the index is clamped.
  std::vector<RetrievalHit> search(std::span<const float> query, std::size_t k) const;
  /// Same contract on the serial reference kernel.
  std::vector<RetrievalHit> search_serial(std::span<const float> query, std::size_t k) const;

  /// Writes `path` (header + one {"doc_id"} per line) and the `.vec` sidecar next to it.
  void save(const std::filesystem::path& path) const;
  static DenseIndex load(const std::filesystem::path& path);

  kernels::MatrixView matrix() const noexcept { return {vectors_, dim_}; }

  bool operator==(const DenseIndex& o) const {
    return mode_ == o.mode_ && dim_ == o.dim_ && ids_ == o.ids_ && vectors_ == o.vectors_;
  }

 private:
  std::vector<float> prepare_query(std::span<const float> query, std::size_t k) const;
  std::vector<RetrievalHit> to_hits(const std::vector<kernels::ScoredRow>& rows) const;

  RetrievalMode mode_;
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> vectors_;
  std::unordered_map<std::string, std::size_t> row_by_id_;
};

/// Text fed to the embedder for a document in a textual mode.
std::string index_text(const Document& doc, RetrievalMode mode);

/// One entry per eligible document in KB order. Visual mode uses the stored image
/// embeddings (documents without one are skipped); textual modes need `embedder`.
DenseIndex build_index(const KnowledgeBase& kb, RetrievalMode mode, const TextEmbedder* embedder);

/// Concatenated passages of the first min(k, hits) documents, in (rank, section) order.
std::vector<Passage> candidate_passages(const KnowledgeBase& kb, const std::vector<RetrievalHit>& hits,
                                        std::size_t k);

struct RecallQuery {
  std::vector<float> embedding;
  std::string gold_doc_id;
};

struct RecallEntry {
  std::size_t k = 0;
  double recall = 0.0;
  std::size_t num_queries = 0;

  bool operator==(const RecallEntry&) const = default;
};

struct RecallReport {
  std::vector<RecallEntry> entries;
  std::size_t excluded = 0;
  std::vector<std::string> errors;
};

/// Queries whose gold id is not indexed are excluded and reported in `errors`.
RecallReport recall_at_k(const DenseIndex& index, const std::vector<RecallQuery>& queries,
                         const std::vector<std::size_t>& ks);

/// `[{"k", "recall", "num_queries"}, ...]`
nlohmann::json to_json(const RecallReport& report);

}  // namespace reflectiva
