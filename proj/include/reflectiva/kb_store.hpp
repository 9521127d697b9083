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
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace reflectiva {

struct Section {
  std::string title;
  std::string body;

  bool operator==(const Section&) const = default;
};

/// One knowledge-base entry: metadata (title, summary), textual passages (sections)
/// and an optional precomputed image embedding.
struct Document {
  std::string id;
  std::string title;
  std::string summary;
  std::vector<Section> sections;
  std::optional<std::vector<float>> image_embedding;

  bool operator==(const Document&) const = default;
};

/// A section of a document, addressed by (doc_id, section_index). `text` is always the
/// section body verbatim.
struct Passage {
  std::string doc_id;
  std::size_t section_index = 0;
  std::string text;

  bool operator==(const Passage&) const = default;
};

enum class EmbeddingStorage { Inline, Sidecar };

struct KbManifest {
  std::filesystem::path path;
  std::size_t count = 0;
  std::string checksum;  // fnv1a64 of the JSONL bytes, hex
  EmbeddingStorage storage = EmbeddingStorage::Inline;
};

/// Non-fatal observations made while loading.
struct KbLoadStats {
  std::size_t missing_embedding = 0;
  std::size_t empty_summary = 0;
};

/// Immutable after construction; safe for concurrent readers.
class KnowledgeBase {
 public:
  /// Validates every document invariant; throws ValidationError on the first violation.
  KnowledgeBase(std::vector<Document> documents, std::size_t embedding_dim, KbManifest manifest = {},
                KbLoadStats stats = {});

  std::size_t size() const noexcept { return documents_.size(); }
  std::size_t embedding_dim() const noexcept { return embedding_dim_; }
  const std::vector<Document>& documents() const noexcept { return documents_; }
  const KbManifest& manifest() const noexcept { return manifest_; }
  const KbLoadStats& load_stats() const noexcept { return stats_; }

  const Document* find(std::string_view id) const;
  /// Throws LookupError for unknown ids.
  const Document& at(std::string_view id) const;

  /// One passage per section, in section order.
  std::vector<Passage> passages_of(std::string_view doc_id) const;
  Passage passage(std::string_view doc_id, std::size_t section_index) const;

  bool operator==(const KnowledgeBase& other) const {
    return embedding_dim_ == other.embedding_dim_ && documents_ == other.documents_;
  }

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t embedding_dim_;
  KbManifest manifest_;
  KbLoadStats stats_;
};

inline constexpr double kUnitNormTolerance = 1e-4;

/// Loads the JSONL knowledge base (manifest line first). Inline or `.vec` sidecar
/// embeddings, as declared by the manifest.
KnowledgeBase load_kb(const std::filesystem::path& path);

/// Serializes in the same format `load_kb` reads. With `sidecar`, embeddings go to the
/// `.vec` file next to `path` and documents without one get a zero row.
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path, bool sidecar = false);

}  // namespace reflectiva
