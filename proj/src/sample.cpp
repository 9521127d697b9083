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

#include "reflectiva/sample.hpp"

#include <sstream>

#include "reflectiva/error.hpp"
#include "reflectiva/util.hpp"

namespace reflectiva {

using nlohmann::json;

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "test";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

void validate_sample(const QuerySample& s, std::size_t embedding_dim) {
  if (s.id.empty()) throw ValidationError("sample with empty id");
  if (trim(s.question).empty()) throw ValidationError("sample " + s.id + ": empty question");
  if ((s.split == Split::Train || s.split == Split::Val) && s.gold_answers.empty()) {
    throw ValidationError("sample " + s.id + ": train/val samples need gold answers");
  }
  if (embedding_dim != 0 && s.image_embedding && s.image_embedding->size() != embedding_dim) {
    throw ValidationError("sample " + s.id + ": image embedding has dimension " +
                          std::to_string(s.image_embedding->size()) + ", expected " + std::to_string(embedding_dim));
  }
}

json to_json(const QuerySample& s) {
  json j;
  j["id"] = s.id;
  j["question"] = s.question;
  j["image_ref"] = s.image_ref;
  j["image_embedding"] = s.image_embedding ? json(*s.image_embedding) : json(nullptr);
  j["gold_answers"] = s.gold_answers;
  j["gold_doc_id"] = s.gold_doc_id ? json(*s.gold_doc_id) : json(nullptr);
  j["dataset"] = s.dataset;
  j["split"] = to_string(s.split);
  if (!s.subset.empty()) j["subset"] = s.subset;
  if (!s.captions.empty()) j["captions"] = s.captions;
  return j;
}

QuerySample sample_from_json(const json& j) {
  QuerySample s;
  s.id = j.at("id").get<std::string>();
  s.question = j.at("question").get<std::string>();
  s.image_ref = j.value("image_ref", std::string{});
  if (auto it = j.find("image_embedding"); it != j.end() && !it->is_null()) {
    s.image_embedding = it->get<std::vector<float>>();
  }
  if (auto it = j.find("gold_answers"); it != j.end() && !it->is_null()) {
    s.gold_answers = it->get<std::vector<std::string>>();
  }
  if (auto it = j.find("gold_doc_id"); it != j.end() && !it->is_null()) s.gold_doc_id = it->get<std::string>();
  s.dataset = j.value("dataset", std::string{});
  s.split = parse_split(j.value("split", std::string("test")));
  s.subset = j.value("subset", std::string{});
  if (auto it = j.find("captions"); it != j.end() && !it->is_null()) {
    s.captions = it->get<std::vector<std::string>>();
  }
  return s;
}

std::vector<QuerySample> load_samples(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<QuerySample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      QuerySample s = sample_from_json(json::parse(line));
      validate_sample(s);
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad sample record: ") + e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

void save_samples(const std::vector<QuerySample>& samples, const std::filesystem::path& path) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json(s).dump();
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

}  // namespace reflectiva
