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
#include <string_view>
#include <utility>
#include <vector>

#include "reflectiva/http.hpp"
#include "reflectiva/kb_store.hpp"
#include "reflectiva/sample.hpp"

namespace reflectiva {

/// Question-to-passage similarity used for shortlisting and for the
/// external-scorer ablation. Must be thread-safe.
class TextScorer {
 public:
  virtual ~TextScorer() = default;
  virtual double score(std::string_view question, std::string_view passage) const = 0;
};

/// |Q ∩ P| / |Q| over distinct normalized word tokens; 0 for an empty question.
class LexicalOverlapScorer final : public TextScorer {
 public:
  double score(std::string_view question, std::string_view passage) const override;
};

/// (index, score) pairs for the best `n` passages, highest score first, earlier
/// index on ties.
std::vector<std::pair<std::size_t, double>> top_by_text_score(const TextScorer& scorer, std::string_view question,
                                                              const std::vector<Passage>& passages, std::size_t n);

/// Reorders candidate passages. Must be thread-safe.
class PassageReranker {
 public:
  virtual ~PassageReranker() = default;
  virtual std::vector<Passage> rerank(const QuerySample& sample, const std::vector<Passage>& candidates) = 0;
};

/// POST {endpoint}/v1/rerank
///   {"question", "image_ref", "passages": [{"doc_id", "section_index", "text"}]}
///   -> {"passages": [{"doc_id", "section_index"}]}
/// Returned keys are resolved against the request; unknown keys come back with empty text.
class RemoteReranker final : public PassageReranker {
 public:
  explicit RemoteReranker(HttpConfig config) : client_(std::move(config)) {}
  std::vector<Passage> rerank(const QuerySample& sample, const std::vector<Passage>& candidates) override;

 private:
  HttpJsonClient client_;
};

enum class RerankFailurePolicy { Fail, FallThrough };

std::string_view to_string(RerankFailurePolicy policy) noexcept;
RerankFailurePolicy parse_rerank_failure_policy(std::string_view text);

/// Runs the reranker and checks that it returned a permutation of `candidates`
/// (ProtocolViolation "reranker changed passage multiset" otherwise, under either
/// policy). Transport and protocol failures of the service itself are rethrown under
/// Fail and yield the original order under FallThrough.
std::vector<Passage> apply_external_reranker(PassageReranker& reranker, const QuerySample& sample,
                                             const std::vector<Passage>& candidates,
                                             RerankFailurePolicy policy = RerankFailurePolicy::Fail);

}  // namespace reflectiva
