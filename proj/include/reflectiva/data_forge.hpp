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

// Training-data construction: in-article passage labels and stage-1 sequences,
// stage-2 triplet mining and the balanced stage-2 mixture.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reflectiva/dense_index.hpp"
#include "reflectiva/gen_backend.hpp"
#include "reflectiva/http.hpp"
#include "reflectiva/kb_store.hpp"
#include "reflectiva/reflective_engine.hpp"
#include "reflectiva/reranker.hpp"
#include "reflectiva/sample.hpp"

namespace reflectiva {

struct ScoredPassage {
  Passage passage;
  double score = 0.0;
  bool operator==(const ScoredPassage&) const = default;
};

/// The two best passages by `scorer` (one if only one exists), ties by section order.
/// Throws ValidationError on an empty list.
std::vector<ScoredPassage> shortlist_by_similarity(const TextScorer& scorer, std::string_view question,
                                                   const std::vector<Passage>& passages);

/// Decides whether a passage can answer the sample's question.
class PassageAnnotator {
 public:
  virtual ~PassageAnnotator() = default;
  virtual bool is_positive(const QuerySample& sample, const Passage& passage) = 0;
};

/// Positive iff some normalized gold answer is a substring of the normalized passage.
class HeuristicAnnotator final : public PassageAnnotator {
 public:
  bool is_positive(const QuerySample& sample, const Passage& passage) override;
};

/// Annotation prompt sent by RemoteAnnotator. This wording is local to this project.
std::string annotation_prompt(const QuerySample& sample, const Passage& passage);

/// POST {endpoint}/v1/annotate
///   {"prompt", "question", "captions", "answers", "passage"} -> {"positive": bool}
class RemoteAnnotator final : public PassageAnnotator {
 public:
  explicit RemoteAnnotator(HttpConfig config) : client_(std::move(config)) {}
  bool is_positive(const QuerySample& sample, const Passage& passage) override;

 private:
  HttpJsonClient client_;
};

enum class PassageLabel { Positive, Negative };
enum class LabelProvenance { AnnotatorJudged, SimilarityForced };

std::string_view to_string(PassageLabel v) noexcept;
std::string_view to_string(LabelProvenance v) noexcept;

struct LabeledPassage {
  Passage passage;
  PassageLabel label = PassageLabel::Negative;
  LabelProvenance provenance = LabelProvenance::AnnotatorJudged;
  bool operator==(const LabeledPassage&) const = default;
};

struct AnnotationOutcome {
  std::vector<LabeledPassage> labels;  // empty when skipped
  std::string skip_reason;
  std::size_t retries = 0;
  bool skipped() const noexcept { return !skip_reason.empty(); }
};

/// Labels every passage. With no positive the top shortlist passage is forced
/// Positive; with no negative the lowest-similarity passage is forced Negative.
/// Single-passage samples are skipped. Transport failures are retried `retries` times
/// per passage, then the sample is skipped.
AnnotationOutcome annotate_in_article(PassageAnnotator& annotator, const TextScorer& scorer,
                                      const QuerySample& sample, const std::vector<Passage>& passages,
                                      int retries = 2);

enum class SequenceKind { NoRet, PosRel, HardNoRel, SoftNoRel, Stage1Pos, Stage1Neg };
/// Token classes inside a training sequence. Marker = paragraph delimiters.
enum class TokenKind { Image, Question, Control, Marker, Passage, Answer };

std::string_view to_string(SequenceKind v) noexcept;
std::string_view to_string(TokenKind v) noexcept;
SequenceKind parse_sequence_kind(std::string_view text);
TokenKind parse_token_kind(std::string_view text);

struct SequenceToken {
  TokenKind kind = TokenKind::Question;
  std::string payload;
  bool operator==(const SequenceToken&) const = default;
};

/// Text is split on whitespace; the image is one token. loss_mask has one entry per
/// token and is true exactly on Control and Answer tokens.
struct TrainingSequence {
  SequenceKind kind = SequenceKind::NoRet;
  std::string sample_id;
  std::string dataset;
  std::vector<SequenceToken> segments;
  std::vector<bool> loss_mask;
  bool operator==(const TrainingSequence&) const = default;
};

/// [I, q, ctrl..., <paragraph> s </paragraph>?, ctrl..., y] with masks filled in.
TrainingSequence make_sequence(SequenceKind kind, const QuerySample& sample, const Passage* passage);

/// Throws ValidationError when the mask disagrees with the token kinds.
void check_loss_mask(const TrainingSequence& seq);

/// One Stage1Pos per Positive and one Stage1Neg per Negative, in label order.
/// Requires at least one of each.
std::vector<TrainingSequence> emit_stage1_sequences(const std::vector<LabeledPassage>& labeled,
                                                    const QuerySample& sample);

struct Stage2Triplet {
  Passage positive;
  Passage hard_negative;
  Passage soft_negative;
  bool operator==(const Stage2Triplet&) const = default;
};

/// Throws ValidationError naming the broken membership rule.
void check_triplet(const Stage2Triplet& t, const std::string& gold_doc_id);

struct MiningOutcome {
  std::optional<Stage2Triplet> triplet;
  std::string skip_reason;
  std::vector<RelevanceJudgment> judgments;
};

inline constexpr std::size_t kSoftNegativeSearchLimit = 50;

/// Judges every gold-page passage with `in_article`; positive = max logp_rel, hard
/// negative = seeded pick among the other NOREL passages (min logp_rel when none),
/// soft negative = seeded pick from the best-ranked non-gold document within the
/// first kSoftNegativeSearchLimit hits.
MiningOutcome mine_stage2_triplet(GenerativeBackend& in_article, const DenseIndex& index, const KnowledgeBase& kb,
                                  const QuerySample& sample, std::uint64_t seed);

struct MixtureReport {
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> before;
  std::map<std::string, std::size_t> after;
  std::map<std::string, std::map<std::string, std::size_t>> by_dataset;  // dataset -> kind -> count
  std::size_t total = 0;
};

nlohmann::json to_json(const MixtureReport& report);

struct Stage2Dataset {
  std::vector<TrainingSequence> sequences;
  MixtureReport report;
};

/// Emits the four stage-2 kinds, downsamples every kind to the smallest count with
/// seeded sampling, and orders the result by (sample id, kind).
Stage2Dataset emit_stage2_sequences(const std::vector<std::pair<QuerySample, Stage2Triplet>>& triplets,
                                    const std::vector<QuerySample>& noret_samples, std::uint64_t seed);

nlohmann::json to_json(const TrainingSequence& seq);
TrainingSequence sequence_from_json(const nlohmann::json& j);
void save_sequences(const std::vector<TrainingSequence>& seqs, const std::filesystem::path& path);
std::vector<TrainingSequence> load_sequences(const std::filesystem::path& path);

struct SkippedSample {
  std::string sample_id;
  std::string reason;
};

struct Stage1Result {
  std::vector<TrainingSequence> sequences;
  std::vector<std::pair<std::string, std::vector<LabeledPassage>>> groups;  // by sample id
  std::vector<SkippedSample> skipped;
  std::size_t forced_positive = 0;
  std::size_t forced_negative = 0;
};

/// Stage-1 corpus over the gold pages of `samples`, sorted by sample id.
Stage1Result build_stage1(const KnowledgeBase& kb, const std::vector<QuerySample>& samples,
                          PassageAnnotator& annotator, const TextScorer& scorer, int retries = 2);

struct Stage2Result {
  Stage2Dataset dataset;
  std::vector<std::pair<QuerySample, Stage2Triplet>> triplets;
  std::vector<SkippedSample> skipped;
};

/// Mines triplets for samples with a gold page (in parallel over `jobs` threads) and
/// mixes them with `noret_samples`.
Stage2Result build_stage2(GenerativeBackend& in_article, const DenseIndex& index, const KnowledgeBase& kb,
                          const std::vector<QuerySample>& samples, const std::vector<QuerySample>& noret_samples,
                          std::uint64_t seed, int jobs = 0);

}  // namespace reflectiva
