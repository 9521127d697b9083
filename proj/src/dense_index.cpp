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

#include "reflectiva/dense_index.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "reflectiva/error.hpp"
#include "reflectiva/util.hpp"

namespace reflectiva {

using nlohmann::json;

std::string_view to_string(RetrievalMode mode) noexcept {
  switch (mode) {
    case RetrievalMode::TextualTitle:
      return "textual_title";
    case RetrievalMode::TextualTitleSummary:
      return "textual_title_summary";
    case RetrievalMode::Visual:
      return "visual";
  }
  return "visual";
}

RetrievalMode parse_retrieval_mode(std::string_view text) {
  if (text == "textual_title") return RetrievalMode::TextualTitle;
  if (text == "textual_title_summary") return RetrievalMode::TextualTitleSummary;
  if (text == "visual") return RetrievalMode::Visual;
  throw ConfigError("unknown retrieval mode '" + std::string(text) + "'");
}

DenseIndex::DenseIndex(RetrievalMode mode, std::size_t dim,
                       std::vector<std::pair<std::string, std::vector<float>>> entries)
    : mode_(mode), dim_(dim) {
  if (dim_ == 0) throw ValidationError("index dimension must be positive");
  ids_.reserve(entries.size());
  vectors_.reserve(entries.size() * dim_);
  for (auto& [id, vec] : entries) {
    if (vec.size() != dim_) {
      throw ValidationError("entry " + id + " has length " + std::to_string(vec.size()) + ", index dim is " +
                            std::to_string(dim_));
    }
    if (normalize_in_place(vec) == 0.0) throw ValidationError("entry " + id + " is a zero vector");
    if (!row_by_id_.emplace(id, ids_.size()).second) throw ValidationError("duplicate index entry " + id);
    ids_.push_back(std::move(id));
    vectors_.insert(vectors_.end(), vec.begin(), vec.end());
  }
}

std::size_t DenseIndex::row_of(std::string_view doc_id) const {
  const auto it = row_by_id_.find(std::string(doc_id));
  return it == row_by_id_.end() ? ids_.size() : it->second;
}

std::vector<float> DenseIndex::prepare_query(std::span<const float> query, std::size_t k) const {
  if (k == 0) throw ValidationError("k must be positive");
  if (query.size() != dim_) {
    throw ValidationError("query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                          std::to_string(dim_));
  }
  std::vector<float> q(query.begin(), query.end());
  if (normalize_in_place(q) == 0.0) throw ValidationError("query is a zero vector");
  return q;
}

std::vector<RetrievalHit> DenseIndex::to_hits(const std::vector<kernels::ScoredRow>& rows) const {
  std::vector<RetrievalHit> hits;
  hits.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) hits.push_back({ids_[rows[i].row], rows[i].score, i + 1});
  return hits;
}

std::vector<RetrievalHit> DenseIndex::search(std::span<const float> query, std::size_t k) const {
  const auto q = prepare_query(query, k);
  return to_hits(kernels::top_k_omp(matrix(), q, k));
}

std::vector<RetrievalHit> DenseIndex::search_serial(std::span<const float> query, std::size_t k) const {
  const auto q = prepare_query(query, k);
  return to_hits(kernels::top_k_serial(matrix(), q, k));
}

void DenseIndex::save(const std::filesystem::path& path) const {
  std::string text = json{{"mode", to_string(mode_)}, {"dim", dim_}, {"count", ids_.size()}}.dump();
  text.push_back('\n');
  for (const auto& id : ids_) {
    text += json{{"doc_id", id}}.dump();
    text.push_back('\n');
  }
  std::string bytes;
  bytes.reserve(vectors_.size() * 4);
  for (float v : vectors_) append_f32_le(bytes, v);
  write_file_atomic(sidecar_path(path), bytes);
  write_file_atomic(path, text);
}

DenseIndex DenseIndex::load(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  json header;
  std::vector<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    if (header.is_null()) {
      header = std::move(j);
      continue;
    }
    try {
      ids.push_back(j.at("doc_id").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad index entry: ") + e.what(), line_no);
    }
  }
  if (header.is_null()) throw ParseError("empty index file " + path.string(), 0);

  RetrievalMode mode{};
  std::size_t dim = 0;
  std::size_t count = 0;
  try {
    mode = parse_retrieval_mode(header.at("mode").get<std::string>());
    dim = header.at("dim").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad index header: ") + e.what(), 1);
  }
  if (ids.size() != count) {
    throw ParseError("index header declares " + std::to_string(count) + " entries, file has " +
                         std::to_string(ids.size()),
                     0);
  }
  const std::string bytes = read_file(sidecar_path(path));
  if (bytes.size() != count * dim * 4) throw ParseError("index sidecar size does not match header", 0);
  const std::vector<float> flat = decode_f32_le(bytes);

  std::vector<std::pair<std::string, std::vector<float>>> entries;
  entries.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    entries.emplace_back(std::move(ids[i]),
                         std::vector<float>(flat.begin() + static_cast<std::ptrdiff_t>(i * dim),
                                            flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim)));
  }
  return DenseIndex(mode, dim, std::move(entries));
}

std::string index_text(const Document& doc, RetrievalMode mode) {
  if (mode == RetrievalMode::TextualTitleSummary) return doc.title + "\n" + doc.summary;
  return doc.title;
}

DenseIndex build_index(const KnowledgeBase& kb, RetrievalMode mode, const TextEmbedder* embedder) {
  std::vector<std::pair<std::string, std::vector<float>>> entries;
  entries.reserve(kb.size());

  if (mode == RetrievalMode::Visual) {
    std::size_t skipped = 0;
    for (const auto& doc : kb.documents()) {
      if (!doc.image_embedding) {
        ++skipped;
        continue;
      }
      entries.emplace_back(doc.id, *doc.image_embedding);
    }
    if (entries.empty()) throw ValidationError("visual index requested but no document carries an image embedding");
    if (skipped > 0) std::cerr << "warning: visual index skipped " << skipped << " document(s) without embeddings\n";
    return DenseIndex(mode, kb.embedding_dim(), std::move(entries));
  }

  if (embedder == nullptr) throw ConfigError("textual retrieval mode needs a text embedder");
  for (const auto& doc : kb.documents()) {
    try {
      entries.emplace_back(doc.id, embedder->embed(index_text(doc, mode)));
    } catch (const Error& e) {
      throw Error("embedding document " + doc.id + " failed: " + e.what());
    }
  }
  return DenseIndex(mode, embedder->dim(), std::move(entries));
}

std::vector<Passage> candidate_passages(const KnowledgeBase& kb, const std::vector<RetrievalHit>& hits,
                                        std::size_t k) {
  std::vector<Passage> out;
  const std::size_t n = std::min(k, hits.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto passages = kb.passages_of(hits[i].doc_id);
    out.insert(out.end(), std::make_move_iterator(passages.begin()), std::make_move_iterator(passages.end()));
  }
  return out;
}

RecallReport recall_at_k(const DenseIndex& index, const std::vector<RecallQuery>& queries,
                         const std::vector<std::size_t>& ks) {
  RecallReport report;
  if (ks.empty()) return report;
  for (std::size_t k : ks) {
    if (k == 0) throw ValidationError("recall k must be positive");
  }
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());

  std::vector<std::size_t> gold_rows;
  std::vector<float> flat;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    const std::size_t row = index.row_of(q.gold_doc_id);
    if (row == index.size()) {
      report.errors.push_back("query " + std::to_string(i) + ": gold document " + q.gold_doc_id + " not in index");
      continue;
    }
    if (q.embedding.size() != index.dim()) {
      report.errors.push_back("query " + std::to_string(i) + ": dimension mismatch");
      continue;
    }
    std::vector<float> v = q.embedding;
    if (normalize_in_place(v) == 0.0) {
      report.errors.push_back("query " + std::to_string(i) + ": zero vector");
      continue;
    }
    gold_rows.push_back(row);
    flat.insert(flat.end(), v.begin(), v.end());
  }
  report.excluded = queries.size() - gold_rows.size();

  const auto results = kernels::top_k_batch_omp(index.matrix(), flat, max_k);
  // rank_of[i] = 1-based rank of the gold row, or 0 when outside max_k.
  std::vector<std::size_t> rank_of(results.size(), 0);
  for (std::size_t i = 0; i < results.size(); ++i) {
    for (std::size_t r = 0; r < results[i].size(); ++r) {
      if (results[i][r].row == gold_rows[i]) {
        rank_of[i] = r + 1;
        break;
      }
    }
  }
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (std::size_t rank : rank_of) hits += (rank != 0 && rank <= k) ? 1 : 0;
    const double recall = rank_of.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(rank_of.size());
    report.entries.push_back({k, recall, rank_of.size()});
  }
  return report;
}

json to_json(const RecallReport& report) {
  json out = json::array();
  for (const auto& e : report.entries) out.push_back({{"k", e.k}, {"recall", e.recall}, {"num_queries", e.num_queries}});
  return out;
}

}  // namespace reflectiva
