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

#include "reflectiva/data_forge.hpp"

#include <omp.h>

#include <algorithm>
#include <sstream>

#include "reflectiva/error.hpp"
#include "reflectiva/text.hpp"
#include "reflectiva/util.hpp"

namespace reflectiva {

using nlohmann::json;

std::vector<ScoredPassage> shortlist_by_similarity(const TextScorer& scorer, std::string_view question,
                                                   const std::vector<Passage>& passages) {
  if (passages.empty()) throw ValidationError("shortlist needs at least one passage");
  std::vector<ScoredPassage> out;
  for (const auto& [idx, score] : top_by_text_score(scorer, question, passages, 2)) {
    out.push_back({passages[idx], score});
  }
  return out;
}

bool HeuristicAnnotator::is_positive(const QuerySample& sample, const Passage& passage) {
  const std::string body = " " + normalize_answer(passage.text) + " ";
  for (const auto& gold : sample.gold_answers) {
    const std::string g = normalize_answer(gold);
    if (!g.empty() && body.find(g) != std::string::npos) return true;
  }
  return false;
}

std::string annotation_prompt(const QuerySample& sample, const Passage& passage) {
  std::ostringstream out;
  out << "Decide whether the passage below contains the information needed to answer the question about the "
         "image. The image is described by the captions.\n";
  out << "Question: " << sample.question << "\n";
  for (std::size_t i = 0; i < sample.captions.size(); ++i) out << "Caption " << i + 1 << ": " << sample.captions[i] << "\n";
  out << "Reference answers:";
  for (const auto& a : sample.gold_answers) out << " [" << a << "]";
  out << "\nPassage:\n" << passage.text << "\n";
  out << "Reply with JSON {\"positive\": true} if the passage supports a reference answer, otherwise "
         "{\"positive\": false}.";
  return out.str();
}

bool RemoteAnnotator::is_positive(const QuerySample& sample, const Passage& passage) {
  const json req = {{"prompt", annotation_prompt(sample, passage)},
                    {"question", sample.question},
                    {"captions", sample.captions},
                    {"answers", sample.gold_answers},
                    {"passage", passage.text}};
  const json reply = client_.post("/v1/annotate", req);
  if (!reply.contains("positive") || !reply.at("positive").is_boolean()) {
    throw ProtocolViolation("annotate response lacks boolean 'positive'");
  }
  return reply.at("positive").get<bool>();
}

std::string_view to_string(PassageLabel v) noexcept { return v == PassageLabel::Positive ? "positive" : "negative"; }

std::string_view to_string(LabelProvenance v) noexcept {
  return v == LabelProvenance::AnnotatorJudged ? "annotator_judged" : "similarity_forced";
}

AnnotationOutcome annotate_in_article(PassageAnnotator& annotator, const TextScorer& scorer,
                                      const QuerySample& sample, const std::vector<Passage>& passages, int retries) {
  AnnotationOutcome out;
  if (passages.size() < 2) {
    out.skip_reason = "gold page has " + std::to_string(passages.size()) + " passage(s), need at least 2";
    return out;
  }
  std::vector<LabeledPassage> labels;
  for (const auto& p : passages) {
    bool positive = false;
    for (int attempt = 0;; ++attempt) {
      try {
        positive = annotator.is_positive(sample, p);
        break;
      } catch (const TransportError& e) {
        if (attempt >= retries) {
          out.skip_reason = std::string("annotator unavailable: ") + e.what();
          return out;
        }
        ++out.retries;
      }
    }
    labels.push_back({p, positive ? PassageLabel::Positive : PassageLabel::Negative, LabelProvenance::AnnotatorJudged});
  }

  const auto count = [&](PassageLabel l) {
    return std::count_if(labels.begin(), labels.end(), [&](const LabeledPassage& x) { return x.label == l; });
  };
  const auto index_of = [&](const Passage& p) {
    return static_cast<std::size_t>(
        std::find_if(labels.begin(), labels.end(), [&](const LabeledPassage& x) { return x.passage == p; }) -
        labels.begin());
  };
  if (count(PassageLabel::Positive) == 0) {
    auto& l = labels[index_of(shortlist_by_similarity(scorer, sample.question, passages).front().passage)];
    l.label = PassageLabel::Positive;
    l.provenance = LabelProvenance::SimilarityForced;
  } else if (count(PassageLabel::Negative) == 0) {
    std::size_t lowest = 0;
    double lowest_score = 0.0;
    for (std::size_t i = 0; i < passages.size(); ++i) {
      const double s = scorer.score(sample.question, passages[i].text);
      if (i == 0 || s < lowest_score) {
        lowest = i;
        lowest_score = s;
      }
    }
    labels[lowest].label = PassageLabel::Negative;
    labels[lowest].provenance = LabelProvenance::SimilarityForced;
  }
  out.labels = std::move(labels);
  return out;
}

std::string_view to_string(SequenceKind v) noexcept {
  switch (v) {
    case SequenceKind::NoRet:
      return "noret";
    case SequenceKind::PosRel:
      return "pos_rel";
    case SequenceKind::HardNoRel:
      return "hard_norel";
    case SequenceKind::SoftNoRel:
      return "soft_norel";
    case SequenceKind::Stage1Pos:
      return "stage1_pos";
    case SequenceKind::Stage1Neg:
      return "stage1_neg";
  }
  return "noret";
}

std::string_view to_string(TokenKind v) noexcept {
  switch (v) {
    case TokenKind::Image:
      return "image";
    case TokenKind::Question:
      return "question";
    case TokenKind::Control:
      return "control";
    case TokenKind::Marker:
      return "marker";
    case TokenKind::Passage:
      return "passage";
    case TokenKind::Answer:
      return "answer";
  }
  return "question";
}

SequenceKind parse_sequence_kind(std::string_view text) {
  for (auto k : {SequenceKind::NoRet, SequenceKind::PosRel, SequenceKind::HardNoRel, SequenceKind::SoftNoRel,
                 SequenceKind::Stage1Pos, SequenceKind::Stage1Neg}) {
    if (to_string(k) == text) return k;
  }
  throw ParseError("unknown sequence kind '" + std::string(text) + "'", 0);
}

TokenKind parse_token_kind(std::string_view text) {
  for (auto k : {TokenKind::Image, TokenKind::Question, TokenKind::Control, TokenKind::Marker, TokenKind::Passage,
                 TokenKind::Answer}) {
    if (to_string(k) == text) return k;
  }
  throw ParseError("unknown token kind '" + std::string(text) + "'", 0);
}

namespace {

bool supervised(TokenKind k) { return k == TokenKind::Control || k == TokenKind::Answer; }

void push_words(TrainingSequence& seq, TokenKind kind, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) seq.segments.push_back({kind, word});
}

void push(TrainingSequence& seq, TokenKind kind, std::string_view payload) {
  seq.segments.push_back({kind, std::string(payload)});
}

}  // namespace

TrainingSequence make_sequence(SequenceKind kind, const QuerySample& sample, const Passage* passage) {
  if (sample.gold_answers.empty()) throw ValidationError("sample " + sample.id + ": no gold answer to supervise");
  const bool needs_passage = kind != SequenceKind::NoRet;
  if (needs_passage != (passage != nullptr)) {
    throw ValidationError(std::string(to_string(kind)) + " sequence " + (needs_passage ? "needs" : "takes no") +
                          " passage");
  }
  TrainingSequence seq;
  seq.kind = kind;
  seq.sample_id = sample.id;
  seq.dataset = sample.dataset;
  push(seq, TokenKind::Image, sample.image_ref);
  push_words(seq, TokenKind::Question, sample.question);
  if (!needs_passage) {
    push(seq, TokenKind::Control, to_string(ReflectiveToken::NoRet));
  } else {
    push(seq, TokenKind::Control, to_string(ReflectiveToken::Ret));
    push(seq, TokenKind::Marker, kParagraphOpen);
    push_words(seq, TokenKind::Passage, passage->text);
    push(seq, TokenKind::Marker, kParagraphClose);
    const bool rel = kind == SequenceKind::PosRel || kind == SequenceKind::Stage1Pos;
    push(seq, TokenKind::Control, to_string(rel ? ReflectiveToken::Rel : ReflectiveToken::NoRel));
  }
  push_words(seq, TokenKind::Answer, sample.gold_answers.front());
  for (const auto& t : seq.segments) seq.loss_mask.push_back(supervised(t.kind));
  return seq;
}

void check_loss_mask(const TrainingSequence& seq) {
  if (seq.loss_mask.size() != seq.segments.size()) {
    throw ValidationError("sequence " + seq.sample_id + ": mask length differs from token count");
  }
  for (std::size_t i = 0; i < seq.segments.size(); ++i) {
    const auto& t = seq.segments[i];
    if (seq.loss_mask[i] != supervised(t.kind)) {
      throw ValidationError("sequence " + seq.sample_id + ": wrong mask on " + std::string(to_string(t.kind)) +
                            " token " + std::to_string(i));
    }
    if (t.kind == TokenKind::Control && !parse_reflective_token(t.payload)) {
      throw ValidationError("sequence " + seq.sample_id + ": control token '" + t.payload + "' is not reflective");
    }
  }
}

std::vector<TrainingSequence> emit_stage1_sequences(const std::vector<LabeledPassage>& labeled,
                                                    const QuerySample& sample) {
  const auto pos = std::count_if(labeled.begin(), labeled.end(),
                                 [](const LabeledPassage& l) { return l.label == PassageLabel::Positive; });
  if (pos == 0 || static_cast<std::size_t>(pos) == labeled.size()) {
    throw ValidationError("sample " + sample.id + ": stage-1 group needs a positive and a negative passage");
  }
  std::vector<TrainingSequence> out;
  for (const auto& l : labeled) {
    out.push_back(make_sequence(
        l.label == PassageLabel::Positive ? SequenceKind::Stage1Pos : SequenceKind::Stage1Neg, sample, &l.passage));
  }
  return out;
}

void check_triplet(const Stage2Triplet& t, const std::string& gold) {
  if (t.positive.doc_id != gold) throw ValidationError("positive passage is not from the gold page");
  if (t.hard_negative.doc_id != gold) throw ValidationError("hard negative is not from the gold page");
  if (t.soft_negative.doc_id == gold) throw ValidationError("soft negative comes from the gold page");
  if (t.positive == t.hard_negative) throw ValidationError("positive and hard negative coincide");
}

MiningOutcome mine_stage2_triplet(GenerativeBackend& in_article, const DenseIndex& index, const KnowledgeBase& kb,
                                  const QuerySample& sample, std::uint64_t seed) {
  MiningOutcome out;
  if (!sample.gold_doc_id) {
    out.skip_reason = "no gold page";
    return out;
  }
  const std::string& gold = *sample.gold_doc_id;
  const auto passages = kb.passages_of(gold);
  if (passages.size() < 2) {
    out.skip_reason = "gold page has " + std::to_string(passages.size()) + " passage(s), cannot form a hard negative";
    return out;
  }
  if (!sample.image_embedding) {
    out.skip_reason = "no image embedding for soft-negative retrieval";
    return out;
  }

  Engine engine(in_article, &kb, &index);
  for (const auto& p : passages) out.judgments.push_back(engine.judge_passage(sample, p));

  std::size_t pos = 0;
  for (std::size_t i = 1; i < out.judgments.size(); ++i) {
    if (out.judgments[i].logp_rel > out.judgments[pos].logp_rel) pos = i;
  }
  const Rng rng = Rng(seed).split(sample.id);
  std::vector<std::size_t> norel;
  for (std::size_t i = 0; i < out.judgments.size(); ++i) {
    if (i != pos && out.judgments[i].token == ReflectiveToken::NoRel) norel.push_back(i);
  }
  std::size_t hard;
  if (!norel.empty()) {
    Rng r = rng.split("hard");
    hard = norel[r.uniform_index(norel.size())];
  } else {
    hard = pos == 0 ? 1 : 0;
    for (std::size_t i = 0; i < out.judgments.size(); ++i) {
      if (i != pos && out.judgments[i].logp_rel < out.judgments[hard].logp_rel) hard = i;
    }
  }

  const auto hits = index.search(*sample.image_embedding, std::min(kSoftNegativeSearchLimit, index.size()));
  const Document* other = nullptr;
  for (const auto& h : hits) {
    if (h.doc_id == gold) continue;
    const Document& d = kb.at(h.doc_id);
    if (d.sections.empty()) continue;
    other = &d;
    break;
  }
  if (other == nullptr) {
    out.skip_reason = "no non-gold document within the first " + std::to_string(kSoftNegativeSearchLimit) + " hits";
    return out;
  }
  Rng r = rng.split("soft");
  const auto soft = kb.passage(other->id, r.uniform_index(other->sections.size()));

  Stage2Triplet t{out.judgments[pos].passage, out.judgments[hard].passage, soft};
  check_triplet(t, gold);
  out.triplet = std::move(t);
  return out;
}

json to_json(const MixtureReport& r) {
  return {{"seed", r.seed}, {"before", r.before}, {"after", r.after}, {"by_dataset", r.by_dataset}, {"total", r.total}};
}

Stage2Dataset emit_stage2_sequences(const std::vector<std::pair<QuerySample, Stage2Triplet>>& triplets,
                                    const std::vector<QuerySample>& noret_samples, std::uint64_t seed) {
  if (triplets.empty()) throw ValidationError("stage-2 mixture needs at least one triplet");
  if (noret_samples.empty()) throw ValidationError("stage-2 mixture needs at least one no-retrieval sample");

  constexpr SequenceKind kKinds[] = {SequenceKind::NoRet, SequenceKind::PosRel, SequenceKind::HardNoRel,
                                     SequenceKind::SoftNoRel};
  std::map<SequenceKind, std::vector<TrainingSequence>> pools;
  for (const auto& s : noret_samples) pools[SequenceKind::NoRet].push_back(make_sequence(SequenceKind::NoRet, s, nullptr));
  for (const auto& [s, t] : triplets) {
    pools[SequenceKind::PosRel].push_back(make_sequence(SequenceKind::PosRel, s, &t.positive));
    pools[SequenceKind::HardNoRel].push_back(make_sequence(SequenceKind::HardNoRel, s, &t.hard_negative));
    pools[SequenceKind::SoftNoRel].push_back(make_sequence(SequenceKind::SoftNoRel, s, &t.soft_negative));
  }

  Stage2Dataset out;
  out.report.seed = seed;
  std::size_t smallest = SIZE_MAX;
  for (auto k : kKinds) {
    const std::size_t n = pools[k].size();
    if (n == 0) throw ValidationError("stage-2 kind " + std::string(to_string(k)) + " is empty");
    out.report.before[std::string(to_string(k))] = n;
    smallest = std::min(smallest, n);
  }
  const Rng rng(seed);
  for (auto k : kKinds) {
    auto& pool = pools[k];
    Rng r = rng.split(to_string(k));
    for (std::size_t i : r.sample_indices(pool.size(), smallest)) out.sequences.push_back(std::move(pool[i]));
    out.report.after[std::string(to_string(k))] = smallest;
  }
  std::stable_sort(out.sequences.begin(), out.sequences.end(), [](const TrainingSequence& a, const TrainingSequence& b) {
    return a.sample_id != b.sample_id ? a.sample_id < b.sample_id : a.kind < b.kind;
  });
  for (const auto& s : out.sequences) ++out.report.by_dataset[s.dataset][std::string(to_string(s.kind))];
  out.report.total = out.sequences.size();
  return out;
}

json to_json(const TrainingSequence& seq) {
  json segs = json::array();
  for (const auto& t : seq.segments) segs.push_back({{"kind", to_string(t.kind)}, {"payload", t.payload}});
  return {{"kind", to_string(seq.kind)},
          {"sample_id", seq.sample_id},
          {"dataset", seq.dataset},
          {"segments", std::move(segs)},
          {"loss_mask", seq.loss_mask}};
}

TrainingSequence sequence_from_json(const json& j) {
  TrainingSequence seq;
  try {
    seq.kind = parse_sequence_kind(j.at("kind").get<std::string>());
    seq.sample_id = j.value("sample_id", std::string{});
    seq.dataset = j.value("dataset", std::string{});
    for (const auto& t : j.at("segments")) {
      seq.segments.push_back({parse_token_kind(t.at("kind").get<std::string>()), t.at("payload").get<std::string>()});
    }
    seq.loss_mask = j.at("loss_mask").get<std::vector<bool>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad training sequence: ") + e.what(), 0);
  }
  return seq;
}

void save_sequences(const std::vector<TrainingSequence>& seqs, const std::filesystem::path& path) {
  std::string out;
  for (const auto& s : seqs) {
    out += to_json(s).dump();
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

std::vector<TrainingSequence> load_sequences(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<TrainingSequence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(sequence_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

namespace {

std::vector<std::size_t> order_by_id(const std::vector<QuerySample>& samples) {
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].id < samples[b].id; });
  return order;
}

}  // namespace

Stage1Result build_stage1(const KnowledgeBase& kb, const std::vector<QuerySample>& samples,
                          PassageAnnotator& annotator, const TextScorer& scorer, int retries) {
  Stage1Result out;
  for (std::size_t i : order_by_id(samples)) {
    const auto& s = samples[i];
    if (!s.gold_doc_id || kb.find(*s.gold_doc_id) == nullptr) {
      out.skipped.push_back({s.id, s.gold_doc_id ? "gold page not in knowledge base" : "no gold page"});
      continue;
    }
    if (s.gold_answers.empty()) {
      out.skipped.push_back({s.id, "no gold answer"});
      continue;
    }
    auto outcome = annotate_in_article(annotator, scorer, s, kb.passages_of(*s.gold_doc_id), retries);
    if (outcome.skipped()) {
      out.skipped.push_back({s.id, outcome.skip_reason});
      continue;
    }
    for (const auto& l : outcome.labels) {
      if (l.provenance != LabelProvenance::SimilarityForced) continue;
      ++(l.label == PassageLabel::Positive ? out.forced_positive : out.forced_negative);
    }
    auto seqs = emit_stage1_sequences(outcome.labels, s);
    out.sequences.insert(out.sequences.end(), seqs.begin(), seqs.end());
    out.groups.emplace_back(s.id, std::move(outcome.labels));
  }
  return out;
}

Stage2Result build_stage2(GenerativeBackend& in_article, const DenseIndex& index, const KnowledgeBase& kb,
                          const std::vector<QuerySample>& samples, const std::vector<QuerySample>& noret_samples,
                          std::uint64_t seed, int jobs) {
  const auto order = order_by_id(samples);
  std::vector<MiningOutcome> outcomes(order.size());
  std::vector<std::string> errors(order.size());
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
  const auto n = static_cast<std::ptrdiff_t>(order.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      outcomes[k] = mine_stage2_triplet(in_article, index, kb, samples[order[k]], seed);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  Stage2Result out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& s = samples[order[k]];
    if (!errors[k].empty()) {
      out.skipped.push_back({s.id, errors[k]});
    } else if (!outcomes[k].triplet) {
      out.skipped.push_back({s.id, outcomes[k].skip_reason});
    } else {
      out.triplets.emplace_back(s, *outcomes[k].triplet);
    }
  }
  out.dataset = emit_stage2_sequences(out.triplets, noret_samples, seed);
  return out;
}

}  // namespace reflectiva
