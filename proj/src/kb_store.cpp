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

#include "reflectiva/kb_store.hpp"

#include <cmath>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "reflectiva/error.hpp"
#include "reflectiva/util.hpp"

namespace reflectiva {

using nlohmann::json;

namespace {

void validate_document(const Document& doc, std::size_t dim) {
  if (doc.id.empty()) throw ValidationError("document with empty id");
  if (trim(doc.title).empty()) throw ValidationError("document " + doc.id + ": empty title");
  for (std::size_t i = 0; i < doc.sections.size(); ++i) {
    if (trim(doc.sections[i].body).empty()) {
      throw ValidationError("document " + doc.id + ": section " + std::to_string(i) + " has an empty body");
    }
  }
  if (doc.image_embedding) {
    const auto& emb = *doc.image_embedding;
    if (emb.size() != dim) {
      throw ValidationError("document " + doc.id + ": embedding length " + std::to_string(emb.size()) +
                            " does not match embedding_dim " + std::to_string(dim));
    }
    const double norm = l2_norm(emb);
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitNormTolerance) {
      std::ostringstream msg;
      msg << "document " << doc.id << ": embedding not unit-normalized (norm " << norm << ")";
      throw ValidationError(msg.str());
    }
  }
}

Document parse_document(const json& j, std::size_t line) {
  try {
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.title = j.at("title").get<std::string>();
    if (auto it = j.find("summary"); it != j.end() && !it->is_null()) doc.summary = it->get<std::string>();
    for (const auto& s : j.at("sections")) {
      doc.sections.push_back({s.value("title", std::string{}), s.at("text").get<std::string>()});
    }
    if (auto it = j.find("image_embedding"); it != j.end() && !it->is_null()) {
      doc.image_embedding = it->get<std::vector<float>>();
    }
    return doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad document record: ") + e.what(), line);
  }
}

std::vector<std::vector<float>> read_sidecar(const std::filesystem::path& path, std::size_t rows,
                                             std::size_t dim) {
  const std::string bytes = read_file(path);
  const std::size_t expected = rows * dim * sizeof(float);
  if (bytes.size() != expected) {
    throw ParseError("sidecar " + path.string() + " has " + std::to_string(bytes.size()) +
                         " bytes, expected " + std::to_string(expected),
                     0);
  }
  const std::vector<float> flat = decode_f32_le(bytes);
  std::vector<std::vector<float>> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r].assign(flat.begin() + static_cast<std::ptrdiff_t>(r * dim),
                  flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim));
  }
  return out;
}

}  // namespace

KnowledgeBase::KnowledgeBase(std::vector<Document> documents, std::size_t embedding_dim, KbManifest manifest,
                             KbLoadStats stats)
    : documents_(std::move(documents)), embedding_dim_(embedding_dim), manifest_(std::move(manifest)), stats_(stats) {
  if (documents_.empty()) throw ValidationError("knowledge base has no documents");
  if (embedding_dim_ == 0) throw ValidationError("embedding_dim must be positive");
  by_id_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    validate_document(documents_[i], embedding_dim_);
    if (!by_id_.emplace(documents_[i].id, i).second) {
      throw ValidationError("duplicate document id " + documents_[i].id);
    }
  }
  if (manifest_.count == 0) manifest_.count = documents_.size();
}

const Document* KnowledgeBase::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &documents_[it->second];
}

const Document& KnowledgeBase::at(std::string_view id) const {
  if (const Document* doc = find(id)) return *doc;
  throw LookupError("unknown document id " + std::string(id));
}

std::vector<Passage> KnowledgeBase::passages_of(std::string_view doc_id) const {
  const Document& doc = at(doc_id);
  std::vector<Passage> out;
  out.reserve(doc.sections.size());
  for (std::size_t i = 0; i < doc.sections.size(); ++i) out.push_back({doc.id, i, doc.sections[i].body});
  return out;
}

Passage KnowledgeBase::passage(std::string_view doc_id, std::size_t section_index) const {
  const Document& doc = at(doc_id);
  if (section_index >= doc.sections.size()) {
    throw LookupError("document " + doc.id + " has no section " + std::to_string(section_index));
  }
  return {doc.id, section_index, doc.sections[section_index].body};
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::istringstream in(bytes);
  std::string line;
  std::size_t line_no = 0;

  json manifest_json;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      manifest_json = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    break;
  }
  if (!manifest_json.is_object() || !manifest_json.value("manifest", false)) {
    throw ParseError("first record must be the manifest", line_no);
  }

  KbManifest manifest;
  manifest.path = path;
  manifest.checksum = hex64(fnv1a64(bytes));
  std::size_t dim = 0;
  std::size_t declared = 0;
  try {
    dim = manifest_json.at("embedding_dim").get<std::size_t>();
    declared = manifest_json.at("count").get<std::size_t>();
    const std::string storage = manifest_json.value("embeddings", std::string("inline"));
    if (storage == "sidecar") {
      manifest.storage = EmbeddingStorage::Sidecar;
    } else if (storage != "inline") {
      throw ParseError("unknown embeddings storage '" + storage + "'", line_no);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what(), line_no);
  }

  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    Document doc = parse_document(j, line_no);
    if (!seen.insert(doc.id).second) throw ParseError("duplicate document id " + doc.id, line_no);
    if (manifest.storage == EmbeddingStorage::Sidecar && doc.image_embedding) {
      throw ParseError("document " + doc.id + " has an inline embedding but the manifest declares a sidecar", line_no);
    }
    if (doc.image_embedding && doc.image_embedding->size() != dim) {
      throw ParseError("document " + doc.id + ": embedding length mismatch (" +
                           std::to_string(doc.image_embedding->size()) + " != " + std::to_string(dim) + ")",
                       line_no);
    }
    try {
      validate_document(doc, dim);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
    docs.push_back(std::move(doc));
  }
  if (docs.size() != declared) {
    throw ParseError("manifest declares " + std::to_string(declared) + " documents, file has " +
                         std::to_string(docs.size()),
                     0);
  }

  if (manifest.storage == EmbeddingStorage::Sidecar) {
    auto rows = read_sidecar(sidecar_path(path), docs.size(), dim);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      // An all-zero row stands for "no embedding".
      if (l2_norm(rows[i]) == 0.0) continue;
      docs[i].image_embedding = std::move(rows[i]);
    }
  }

  KbLoadStats stats;
  for (const auto& doc : docs) {
    if (!doc.image_embedding) ++stats.missing_embedding;
    if (doc.summary.empty()) ++stats.empty_summary;
  }
  if (stats.missing_embedding > 0) {
    std::cerr << "warning: " << stats.missing_embedding
              << " document(s) without image_embedding; they are excluded from visual indexing\n";
  }
  manifest.count = docs.size();
  return KnowledgeBase(std::move(docs), dim, std::move(manifest), stats);
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path, bool sidecar) {
  std::string out;
  json manifest = {{"manifest", true}, {"embedding_dim", kb.embedding_dim()}, {"count", kb.size()}};
  if (sidecar) manifest["embeddings"] = "sidecar";
  out += manifest.dump();
  out.push_back('\n');

  std::string vec_bytes;
  for (const auto& doc : kb.documents()) {
    json sections = json::array();
    for (const auto& s : doc.sections) sections.push_back({{"title", s.title}, {"text", s.body}});
    json j = {{"id", doc.id}, {"title", doc.title}, {"summary", doc.summary}, {"sections", std::move(sections)}};
    if (sidecar) {
      j["image_embedding"] = nullptr;
      for (std::size_t c = 0; c < kb.embedding_dim(); ++c) {
        append_f32_le(vec_bytes, doc.image_embedding ? (*doc.image_embedding)[c] : 0.0f);
      }
    } else if (doc.image_embedding) {
      j["image_embedding"] = *doc.image_embedding;
    } else {
      j["image_embedding"] = nullptr;
    }
    out += j.dump();
    out.push_back('\n');
  }
  if (sidecar) write_file_atomic(sidecar_path(path), vec_bytes);
  write_file_atomic(path, out);
}

}  // namespace reflectiva
