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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reflectiva/http.hpp"
#include "reflectiva/reflective_engine.hpp"
#include "reflectiva/sample.hpp"

namespace reflectiva {

// Per-answer metrics. Golds must be non-empty where a list is taken.

/// 1 iff the normalized prediction equals some normalized gold.
int vqa_accuracy(std::string_view pred, const std::vector<std::string>& golds);

inline constexpr double kDefaultRelativeTolerance = 0.05;

/// Numeric golds: 1 iff the prediction parses and lies within rel_tol * |gold| of one
/// of them (a zero gold needs an exact zero). Non-numeric golds are matched with
/// vqa_accuracy. rel_tol must lie in (0, 1).
int relaxed_accuracy(std::string_view pred, const std::vector<std::string>& golds,
                     double rel_tol = kDefaultRelativeTolerance);

struct TokenF1 {
  double f1 = 0.0;
  int em = 0;
};

/// Bag-of-tokens F1 over normalized tokens, and normalized exact match.
TokenF1 token_f1_em(std::string_view pred, std::string_view gold);

/// Harmonic mean of the two InfoSeek splits; 0 when either is 0.
double infoseek_aggregate(double unseen_q, double unseen_e);

/// True when any gold parses as a number (relaxed accuracy applies).
bool is_numeric_question(const std::vector<std::string>& golds);

/// Scores one prediction in [0, 1].
class AnswerJudge {
 public:
  virtual ~AnswerJudge() = default;
  virtual double score(const QuerySample& sample, std::string_view pred) = 0;
};

/// The verbatim alignment-scoring prompt, filled in.
std::string judge_prompt(std::string_view question, std::string_view caption, std::string_view gold,
                         std::string_view pred);

/// POST {endpoint}/v1/judge {"prompt", "question", "caption", "ground_truth", "prediction"}
///   -> {"score": 0..100, "reason": str}. Returns score / 100 against the first gold.
class RemoteAnswerJudge final : public AnswerJudge {
 public:
  explicit RemoteAnswerJudge(HttpConfig config) : client_(std::move(config)) {}
  double score(const QuerySample& sample, std::string_view pred) override;

 private:
  HttpJsonClient client_;
};

struct MetricScore {
  std::string name;
  double value = 0.0;
  std::size_t num_samples = 0;
  bool operator==(const MetricScore&) const = default;
};

struct TraceStats {
  std::size_t num_traces = 0;
  double fallback_rate = 0.0;
  double mean_selected = 0.0;
  std::map<std::string, std::size_t> decisions;  // effective token -> count
  bool operator==(const TraceStats&) const = default;
};

struct SplitScore {
  double value = 0.0;
  std::size_t num_samples = 0;
  bool operator==(const SplitScore&) const = default;
};

struct EvalReport {
  std::size_t num_samples = 0;  // scored
  std::size_t num_failed = 0;   // samples without a trace
  double accuracy = 0.0;        // mean question-type accuracy over scored samples
  std::vector<MetricScore> metrics;
  /// dataset -> split -> score. InfoSeek-style datasets get unseen_question,
  /// unseen_entity and all (harmonic); E-VQA-style get single_hop and all (mean);
  /// anything else gets all (mean).
  std::map<std::string, std::map<std::string, SplitScore>> splits;
  TraceStats trace_stats;
  bool operator==(const EvalReport&) const = default;
};

nlohmann::json to_json(const EvalReport& report);

struct EvalOptions {
  double rel_tol = kDefaultRelativeTolerance;
  /// When set, replaces the string-match accuracy.
  AnswerJudge* judge = nullptr;
};

/// Dataset tags that select the split rules.
inline constexpr std::string_view kInfoSeek = "infoseek";
inline constexpr std::string_view kEncyclopedicVqa = "evqa";

/// Scores traces against their samples (matched by id). Samples with no trace count
/// as failed; a trace with no sample is a ValidationError. Traces are not modified.
EvalReport evaluate(const std::vector<PipelineTrace>& traces, const std::vector<QuerySample>& samples,
                    const EvalOptions& options = {});

TraceStats trace_statistics(const std::vector<PipelineTrace>& traces);

// Reflective-token accuracy.

enum class PassageDifficulty { Positive, Soft, Hard };

std::string_view to_string(PassageDifficulty v) noexcept;
PassageDifficulty parse_passage_difficulty(std::string_view text);

struct LabeledProbe {
  Passage passage;
  PassageDifficulty difficulty = PassageDifficulty::Positive;
};

struct TokenExpectation {
  std::string sample_id;
  std::string dataset;
  ReflectiveToken decision = ReflectiveToken::Ret;
  std::vector<LabeledProbe> passages;
};

nlohmann::json to_json(const TokenExpectation& e);
TokenExpectation token_expectation_from_json(const nlohmann::json& j);

struct ClassAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const noexcept { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  bool operator==(const ClassAccuracy&) const = default;
};

struct TokenAccuracyBlock {
  ClassAccuracy ret;
  ClassAccuracy noret;
  ClassAccuracy rel_pos;
  ClassAccuracy norel_soft;
  ClassAccuracy norel_hard;
  bool operator==(const TokenAccuracyBlock&) const = default;
};

struct TokenAccuracyReport {
  TokenAccuracyBlock overall;
  std::map<std::string, TokenAccuracyBlock> by_dataset;
  bool operator==(const TokenAccuracyReport&) const = default;
};

nlohmann::json to_json(const TokenAccuracyReport& report);

/// Decision accuracy uses the unforced token. Every expectation needs a trace with the
/// same id and a judgment for each of its passages, else ValidationError.
TokenAccuracyReport token_accuracy(const std::vector<PipelineTrace>& traces,
                                   const std::vector<TokenExpectation>& expectations);

/// Suite construction: samples with a gold page expect <RET> with one positive (a gold
/// passage containing an answer), one hard (another gold passage) and one soft (a
/// passage of the best non-gold hit) probe; samples without a gold page expect <NORET>.
std::vector<TokenExpectation> build_token_suite(const KnowledgeBase& kb, const DenseIndex& index,
                                                const std::vector<QuerySample>& samples, std::uint64_t seed);

// Ablations.

enum class AblationVariant { Full, AlwaysRet, ExternalScorerPassages, RandomPassagesNoRel, NoKB };

std::string_view to_string(AblationVariant v) noexcept;
AblationVariant parse_ablation_variant(std::string_view text);
const std::vector<AblationVariant>& all_ablation_variants();

PipelineConfig variant_config(AblationVariant v, const PipelineConfig& base);

struct AblationResult {
  std::vector<std::pair<AblationVariant, EvalReport>> reports;
  /// variant -> accuracy(variant) - accuracy(Full); present when Full was run.
  std::map<std::string, double> deltas;
};

nlohmann::json to_json(const AblationResult& result);
/// One row per variant: variant,k,evqa_single_hop,evqa_all,infoseek_unseen_q,infoseek_unseen_e,infoseek_all,accuracy
/// in percent with one decimal; "-" for missing cells.
std::string ablation_csv(const AblationResult& result, const PipelineConfig& base);

/// ConfigError when a variant needs a provider the engine lacks.
AblationResult run_ablation(Engine& engine, const std::vector<QuerySample>& samples, const PipelineConfig& base,
                            const std::vector<AblationVariant>& variants, const EvalOptions& options = {},
                            int jobs = 0);

// Re-ranking sweep.

struct SweepCell {
  std::size_t k = 0;
  std::size_t k_p = 0;
  double accuracy = 0.0;
  std::size_t num_samples = 0;
  std::size_t num_failed = 0;
};

struct SweepResult {
  RerankMode mode = RerankMode::BuiltIn;
  std::vector<std::size_t> ks;
  std::vector<std::size_t> kps;
  std::vector<SweepCell> cells;  // row-major over (ks, kps)
};

nlohmann::json to_json(const SweepResult& result);
/// Header "k,k_p=1,k_p=3,..." then one row per k, accuracies in percent.
std::string sweep_csv(const SweepResult& result);

SweepResult rerank_sweep(Engine& engine, const std::vector<QuerySample>& samples, const PipelineConfig& base,
                         const std::vector<std::size_t>& ks, const std::vector<std::size_t>& kps, RerankMode mode,
                         const EvalOptions& options = {}, int jobs = 0);

/// Traces of the successful items and the ids of the failed ones, from a batch run.
std::vector<PipelineTrace> successful_traces(const std::vector<BatchItem>& items,
                                             const std::vector<QuerySample>& samples,
                                             std::vector<std::pair<std::string, std::string>>* failures = nullptr);

}  // namespace reflectiva
