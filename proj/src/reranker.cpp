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

#include "reflectiva/reranker.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "reflectiva/error.hpp"
#include "reflectiva/text.hpp"

namespace reflectiva {

using nlohmann::json;

double LexicalOverlapScorer::score(std::string_view question, std::string_view passage) const {
  const auto q = answer_tokens(question);
  const std::set<std::string> qset(q.begin(), q.end());
  if (qset.empty()) return 0.0;
  const auto p = answer_tokens(passage);
  const std::set<std::string> pset(p.begin(), p.end());
  std::size_t hit = 0;
  for (const auto& t : qset) hit += pset.count(t);
  return static_cast<double>(hit) / static_cast<double>(qset.size());
}

std::vector<std::pair<std::size_t, double>> top_by_text_score(const TextScorer& scorer, std::string_view question,
                                                              const std::vector<Passage>& passages, std::size_t n) {
  std::vector<std::pair<std::size_t, double>> scored;
  scored.reserve(passages.size());
  for (std::size_t i = 0; i < passages.size(); ++i) scored.emplace_back(i, scorer.score(question, passages[i].text));
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (scored.size() > n) scored.resize(n);
  return scored;
}

std::vector<Passage> RemoteReranker::rerank(const QuerySample& sample, const std::vector<Passage>& candidates) {
  json req = {{"question", sample.question}, {"image_ref", sample.image_ref}, {"passages", json::array()}};
  std::map<std::pair<std::string, std::size_t>, const Passage*> by_key;
  for (const auto& p : candidates) {
    req["passages"].push_back({{"doc_id", p.doc_id}, {"section_index", p.section_index}, {"text", p.text}});
    by_key.emplace(std::make_pair(p.doc_id, p.section_index), &p);
  }
  const json reply = client_.post("/v1/rerank", req);
  std::vector<Passage> out;
  try {
    for (const auto& item : reply.at("passages")) {
      Passage p{item.at("doc_id").get<std::string>(), item.at("section_index").get<std::size_t>(), {}};
      if (auto it = by_key.find({p.doc_id, p.section_index}); it != by_key.end()) p.text = it->second->text;
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw ProtocolViolation(std::string("rerank response malformed: ") + e.what());
  }
  return out;
}

std::string_view to_string(RerankFailurePolicy policy) noexcept {
  return policy == RerankFailurePolicy::Fail ? "fail" : "fall_through";
}

RerankFailurePolicy parse_rerank_failure_policy(std::string_view text) {
  if (text == "fail") return RerankFailurePolicy::Fail;
  if (text == "fall_through") return RerankFailurePolicy::FallThrough;
  throw ConfigError("unknown rerank failure policy '" + std::string(text) + "'");
}

namespace {

bool same_multiset(const std::vector<Passage>& a, const std::vector<Passage>& b) {
  if (a.size() != b.size()) return false;
  const auto key = [](const Passage& p) { return std::tie(p.doc_id, p.section_index, p.text); };
  std::vector<const Passage*> x;
  std::vector<const Passage*> y;
  for (const auto& p : a) x.push_back(&p);
  for (const auto& p : b) y.push_back(&p);
  const auto less = [&](const Passage* l, const Passage* r) { return key(*l) < key(*r); };
  std::sort(x.begin(), x.end(), less);
  std::sort(y.begin(), y.end(), less);
  return std::equal(x.begin(), x.end(), y.begin(), [](const Passage* l, const Passage* r) { return *l == *r; });
}

}  // namespace

std::vector<Passage> apply_external_reranker(PassageReranker& reranker, const QuerySample& sample,
                                             const std::vector<Passage>& candidates, RerankFailurePolicy policy) {
  std::vector<Passage> out;
  try {
    out = reranker.rerank(sample, candidates);
  } catch (const TransportError&) {
    if (policy == RerankFailurePolicy::Fail) throw;
    return candidates;
  } catch (const ProtocolViolation&) {
    if (policy == RerankFailurePolicy::Fail) throw;
    return candidates;
  }
  if (!same_multiset(out, candidates)) throw ProtocolViolation("reranker changed passage multiset");
  return out;
}

}  // namespace reflectiva
