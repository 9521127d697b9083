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

// Retrieve-or-not, per-passage relevance, answer.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reflectiva/dense_index.hpp"
#include "reflectiva/gen_backend.hpp"
#include "reflectiva/kb_store.hpp"
#include "reflectiva/reranker.hpp"
#include "reflectiva/sample.hpp"

namespace reflectiva {

enum class RerankMode { None, BuiltIn, External };
enum class ForceDecision { None, AlwaysRet, AlwaysNoRet };
/// How S is formed from the candidates. Reflective is the normal protocol; the other
/// two replace the relevance judgments for ablations.
enum class PassageSelection { Reflective, ExternalScorer, RandomPerDocument };

std::string_view to_string(RerankMode v) noexcept;
std::string_view to_string(ForceDecision v) noexcept;
std::string_view to_string(PassageSelection v) noexcept;
RerankMode parse_rerank_mode(std::string_view text);
ForceDecision parse_force_decision(std::string_view text);
PassageSelection parse_passage_selection(std::string_view text);

struct PipelineConfig {
  std::size_t top_k_docs = 5;
  RerankMode rerank = RerankMode::None;
  std::size_t k_p = 5;  // used by BuiltIn and External
  std::optional<std::size_t> max_relevant;
  ForceDecision force_decision = ForceDecision::None;
  PassageSelection selection = PassageSelection::Reflective;
  std::size_t scorer_top_n = 2;    // ExternalScorer
  std::size_t random_per_doc = 2;  // RandomPerDocument
  std::uint64_t seed = 0;
  RerankFailurePolicy rerank_failure = RerankFailurePolicy::Fail;

  /// Throws ConfigError.
  void validate() const;

  bool operator==(const PipelineConfig&) const = default;
};

nlohmann::json to_json(const PipelineConfig& config);
/// Missing keys keep the values already in `base`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

struct RetrievalDecision {
  ReflectiveToken token = ReflectiveToken::NoRet;  // argmax of the two log-probs
  double logp_ret = 0.0;
  double logp_noret = 0.0;
  std::optional<ReflectiveToken> forced;

  ReflectiveToken effective() const noexcept { return forced.value_or(token); }
  bool operator==(const RetrievalDecision&) const = default;
};

struct RelevanceJudgment {
  Passage passage;
  ReflectiveToken token = ReflectiveToken::NoRel;
  double logp_rel = 0.0;
  double logp_norel = 0.0;
  double score = 0.0;

  bool operator==(const RelevanceJudgment&) const = default;
};

/// score = logp_rel - logp_norel; REL iff score > 0. Non-finite input is a ProtocolViolation.
RelevanceJudgment make_judgment(Passage passage, double logp_rel, double logp_norel);

struct FailedJudgment {
  Passage passage;
  std::string error;
  bool operator==(const FailedJudgment&) const = default;
};

struct PhaseTimings {
  double decision_ms = 0.0;
  double retrieval_ms = 0.0;
  double judgment_ms = 0.0;
  double answer_ms = 0.0;
};

enum class TraceMode { Search, Oracle, Probe };

std::string_view to_string(TraceMode mode) noexcept;
TraceMode parse_trace_mode(std::string_view text);

struct PipelineTrace {
  std::string sample_id;
  TraceMode mode = TraceMode::Search;
  RetrievalDecision decision;
  std::vector<RetrievalHit> hits;
  std::vector<Passage> candidates;
  std::vector<RelevanceJudgment> judgments;
  std::vector<Passage> selected;
  std::string answer;
  bool fallback = false;
  std::vector<FailedJudgment> failed_judgments;
  PhaseTimings timings;

  /// Equality ignores timings.
  bool operator==(const PipelineTrace& o) const;
};

/// Candidates carry the passage text; judgments, selections and failures refer to
/// them by (doc_id, section_index).
nlohmann::json to_json(const PipelineTrace& trace, bool with_timings = true);
PipelineTrace trace_from_json(const nlohmann::json& j);

/// Passages ordered by score descending, candidate order on ties, first min(k_p, n).
std::vector<Passage> rank_by_relevance(const std::vector<RelevanceJudgment>& judgments, std::size_t k_p);

/// Outcome of one sample in a batch.
struct BatchItem {
  std::optional<PipelineTrace> trace;
  std::string error;
};

class Engine {
 public:
  /// `kb` and `index` may be null when no run will retrieve; they must outlive the engine.
  Engine(GenerativeBackend& backend, const KnowledgeBase* kb, const DenseIndex* index);

  void set_reranker(PassageReranker* reranker) noexcept { reranker_ = reranker; }
  void set_text_scorer(const TextScorer* scorer) noexcept { scorer_ = scorer; }
  PassageReranker* reranker() const noexcept { return reranker_; }
  const TextScorer* text_scorer() const noexcept { return scorer_; }
  const KnowledgeBase* kb() const noexcept { return kb_; }
  const DenseIndex* index() const noexcept { return index_; }

  /// One constrained step over {<RET>, <NORET>}; the override is recorded, not applied to `token`.
  RetrievalDecision decide_retrieval(const QuerySample& sample, ForceDecision force = ForceDecision::None);
  /// One constrained step over {<REL>, <NOREL>} on the single-passage prompt.
  RelevanceJudgment judge_passage(const QuerySample& sample, const Passage& passage);

  PipelineTrace run(const QuerySample& sample, const PipelineConfig& config);
  /// Candidates are every passage of `gold_doc_id`; search is skipped. The decision step
  /// still runs and is recorded, but retrieval proceeds unless the config forces <NORET>.
  PipelineTrace run_oracle(const QuerySample& sample, const std::string& gold_doc_id, const PipelineConfig& config);
  /// Decision plus judgments of the given passages, no answer. Feeds token accuracy.
  PipelineTrace probe(const QuerySample& sample, const std::vector<Passage>& passages);

  /// Runs samples concurrently on up to `jobs` threads (0 = OpenMP default). Output
  /// order follows input order; failures are captured per item.
  std::vector<BatchItem> run_batch(const std::vector<QuerySample>& samples, const PipelineConfig& config,
                                   int jobs = 0, bool oracle = false);

 private:
  void finish_with_passages(PipelineTrace& trace, const QuerySample& sample, const PipelineConfig& config);
  void answer(PipelineTrace& trace, const QuerySample& sample);

  GenerativeBackend& backend_;
  const KnowledgeBase* kb_;
  const DenseIndex* index_;
  PassageReranker* reranker_ = nullptr;
  const TextScorer* scorer_ = nullptr;
};

}  // namespace reflectiva
