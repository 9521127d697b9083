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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "reflectiva/data_forge.hpp"
#include "reflectiva/error.hpp"
#include "reflectiva/mock_backend.hpp"
#include "test_support.hpp"

namespace reflectiva {
namespace {

using testing::make_doc;
using testing::unit;

const LexicalOverlapScorer kScorer;

ScriptMatcher judgment_of(const std::string& needle) {
  ScriptMatcher m;
  m.kind = CallKind::Judgment;
  if (!needle.empty()) m.passage_contains = needle;
  return m;
}

ScriptedResponse rel(double p) {
  return ScriptedResponse::binary(ReflectiveToken::Rel, std::log(p), ReflectiveToken::NoRel, std::log1p(-p));
}

TEST(Shortlist, LexicalOrder) {
  const std::vector<Passage> ps{{"d", 0, "nothing here"}, {"d", 1, "who built the residence"}};
  const auto top = shortlist_by_similarity(kScorer, "Who built the residence?", ps);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].passage.section_index, 1u);
  EXPECT_DOUBLE_EQ(top[0].score, 1.0);
  EXPECT_EQ(shortlist_by_similarity(kScorer, "q", {{"d", 0, "x"}}).size(), 1u);
  EXPECT_THROW(shortlist_by_similarity(kScorer, "q", {}), ValidationError);
}

/// Scores read off the passage text, which holds a number.
class NumericScorer final : public TextScorer {
 public:
  double score(std::string_view, std::string_view passage) const override { return std::stod(std::string(passage)); }
};

TEST(Shortlist, MatchesBruteForceTopTwo) {
  Rng rng(6);
  const NumericScorer scorer;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Passage> ps;
    for (std::size_t i = 0; i < 10; ++i) ps.push_back({"d", i, std::to_string(rng.uniform_index(6))});
    std::vector<std::size_t> order(10);
    for (std::size_t i = 0; i < 10; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::stod(ps[a].text) > std::stod(ps[b].text); });
    const auto top = shortlist_by_similarity(scorer, "q", ps);
    ASSERT_EQ(top.size(), 2u);
    EXPECT_EQ(top[0].passage.section_index, order[0]);
    EXPECT_EQ(top[1].passage.section_index, order[1]);
  }
}

QuerySample wurzburg() {
  return testing::make_sample("w", "Who designed this palace?", {"Balthasar Neumann"}, "w", unit({1, 0}));
}

TEST(Annotate, HeuristicSubstring) {
  HeuristicAnnotator h;
  const std::vector<Passage> ps{{"w", 0, "The palace has many rooms."},
                                {"w", 1, "Its architect, Balthasar Neumann, designed the staircase."},
                                {"w", 2, "Gardens were added later."}};
  const auto out = annotate_in_article(h, kScorer, wurzburg(), ps);
  ASSERT_FALSE(out.skipped());
  ASSERT_EQ(out.labels.size(), 3u);
  EXPECT_EQ(out.labels[0].label, PassageLabel::Negative);
  EXPECT_EQ(out.labels[1].label, PassageLabel::Positive);
  EXPECT_EQ(out.labels[2].label, PassageLabel::Negative);
  for (const auto& l : out.labels) EXPECT_EQ(l.provenance, LabelProvenance::AnnotatorJudged);
}

TEST(Annotate, ForcedPositiveViaShortlist) {
  HeuristicAnnotator h;
  const std::vector<Passage> ps{{"w", 0, "Unrelated text."}, {"w", 1, "Who designed this palace is unknown."}};
  const auto out = annotate_in_article(h, kScorer, wurzburg(), ps);
  ASSERT_EQ(out.labels.size(), 2u);
  EXPECT_EQ(out.labels[1].label, PassageLabel::Positive);
  EXPECT_EQ(out.labels[1].provenance, LabelProvenance::SimilarityForced);
  EXPECT_EQ(out.labels[0].label, PassageLabel::Negative);
}

TEST(Annotate, ForcedNegativeLowestSimilarity) {
  HeuristicAnnotator h;
  const std::vector<Passage> ps{{"w", 0, "Balthasar Neumann designed this palace."},
                                {"w", 1, "Balthasar Neumann."},
                                {"w", 2, "Who? Balthasar Neumann."}};
  const auto out = annotate_in_article(h, kScorer, wurzburg(), ps);
  ASSERT_EQ(out.labels.size(), 3u);
  EXPECT_EQ(out.labels[1].label, PassageLabel::Negative);
  EXPECT_EQ(out.labels[1].provenance, LabelProvenance::SimilarityForced);
  EXPECT_EQ(out.labels[0].label, PassageLabel::Positive);
  EXPECT_EQ(out.labels[2].label, PassageLabel::Positive);
}

TEST(Annotate, SinglePassageSkipped) {
  HeuristicAnnotator h;
  EXPECT_TRUE(annotate_in_article(h, kScorer, wurzburg(), {{"w", 0, "x"}}).skipped());
}

class DownAnnotator final : public PassageAnnotator {
 public:
  int calls = 0;
  int fail_first = 1000;
  bool is_positive(const QuerySample&, const Passage& p) override {
    if (++calls <= fail_first) throw TransportError("down", 1, 503);
    return p.section_index == 0;
  }
};

TEST(Annotate, RetriesThenSkips) {
  const std::vector<Passage> ps{{"w", 0, "a"}, {"w", 1, "b"}};
  DownAnnotator down;
  const auto out = annotate_in_article(down, kScorer, wurzburg(), ps, 2);
  EXPECT_TRUE(out.skipped());
  EXPECT_EQ(down.calls, 3);

  DownAnnotator flaky;
  flaky.fail_first = 2;
  const auto ok = annotate_in_article(flaky, kScorer, wurzburg(), ps, 2);
  EXPECT_FALSE(ok.skipped());
  EXPECT_EQ(ok.retries, 2u);
}

void expect_mask_rule(const TrainingSequence& seq) {
  ASSERT_EQ(seq.loss_mask.size(), seq.segments.size());
  for (std::size_t i = 0; i < seq.segments.size(); ++i) {
    const auto k = seq.segments[i].kind;
    EXPECT_EQ(seq.loss_mask[i], k == TokenKind::Control || k == TokenKind::Answer) << i;
  }
}

TEST(Stage1, OnePositiveTwoNegatives) {
  const QuerySample s = wurzburg();
  const std::vector<LabeledPassage> labels{
      {{"w", 0, "neg one"}, PassageLabel::Negative, LabelProvenance::AnnotatorJudged},
      {{"w", 1, "Balthasar Neumann built it"}, PassageLabel::Positive, LabelProvenance::AnnotatorJudged},
      {{"w", 2, "neg two"}, PassageLabel::Negative, LabelProvenance::AnnotatorJudged}};
  const auto seqs = emit_stage1_sequences(labels, s);
  ASSERT_EQ(seqs.size(), 3u);
  EXPECT_EQ(std::count_if(seqs.begin(), seqs.end(), [](auto& q) { return q.kind == SequenceKind::Stage1Pos; }), 1);
  EXPECT_EQ(std::count_if(seqs.begin(), seqs.end(), [](auto& q) { return q.kind == SequenceKind::Stage1Neg; }), 2);
  for (const auto& seq : seqs) {
    expect_mask_rule(seq);
    for (std::size_t i = 0; i < seq.segments.size(); ++i) {
      if (seq.segments[i].kind == TokenKind::Passage) EXPECT_FALSE(seq.loss_mask[i]);
    }
  }
  const auto& pos = *std::find_if(seqs.begin(), seqs.end(), [](auto& q) { return q.kind == SequenceKind::Stage1Pos; });
  const auto it = std::find_if(pos.segments.begin(), pos.segments.end(),
                               [](const SequenceToken& t) { return t.payload == "<REL>"; });
  ASSERT_NE(it, pos.segments.end());
  EXPECT_TRUE(pos.loss_mask[static_cast<std::size_t>(it - pos.segments.begin())]);
  EXPECT_THROW(emit_stage1_sequences({labels[0]}, s), ValidationError);
}

TEST(Sequence, Layout) {
  const QuerySample s = wurzburg();
  const Passage p{"w", 0, "two words"};
  const auto seq = make_sequence(SequenceKind::HardNoRel, s, &p);
  std::vector<std::string> payloads;
  for (const auto& t : seq.segments) payloads.push_back(t.payload);
  EXPECT_EQ(payloads, (std::vector<std::string>{"img-w", "Who", "designed", "this", "palace?", "<RET>", "<paragraph>",
                                                "two", "words", "</paragraph>", "<NOREL>", "Balthasar", "Neumann"}));
  expect_mask_rule(seq);
  const auto noret = make_sequence(SequenceKind::NoRet, s, nullptr);
  EXPECT_EQ(noret.segments[5].payload, "<NORET>");
  EXPECT_THROW(make_sequence(SequenceKind::NoRet, s, &p), ValidationError);
  EXPECT_THROW(make_sequence(SequenceKind::PosRel, s, nullptr), ValidationError);
  TrainingSequence broken = seq;
  broken.loss_mask[0] = true;
  EXPECT_THROW(check_loss_mask(broken), ValidationError);
}

struct MiningWorld {
  KnowledgeBase kb;
  DenseIndex index;
  MiningWorld()
      : kb({make_doc("gold", {"sec zero", "sec one", "sec two"}, unit({1, 0, 0})),
            make_doc("near", {"near zero", "near one"}, unit({1, 0.3f, 0})),
            make_doc("far", {"far zero"}, unit({0, 0, 1}))},
           3),
        index(build_index(kb, RetrievalMode::Visual, nullptr)) {}
  QuerySample sample() const {
    return testing::make_sample("m", "Q?", {"ans"}, "gold", std::vector<float>{1, 0, 0});
  }
};

TEST(Stage2, PositiveIsArgmax) {
  MiningWorld w;
  MockBackend mock;
  mock.register_script(judgment_of("sec zero"), rel(0.9));
  mock.register_script(judgment_of("sec one"), rel(0.2));
  mock.register_script(judgment_of("sec two"), rel(0.1));
  const auto out = mine_stage2_triplet(mock, w.index, w.kb, w.sample(), 1);
  ASSERT_TRUE(out.triplet) << out.skip_reason;
  EXPECT_EQ(out.triplet->positive.section_index, 0u);
  EXPECT_EQ(out.triplet->hard_negative.doc_id, "gold");
  EXPECT_NE(out.triplet->hard_negative.section_index, 0u);
  EXPECT_EQ(out.triplet->soft_negative.doc_id, "near");
  EXPECT_EQ(out.judgments.size(), 3u);
}

TEST(Stage2, AllRelHardIsMinimum) {
  MiningWorld w;
  MockBackend mock;
  mock.register_script(judgment_of("sec zero"), rel(0.7));
  mock.register_script(judgment_of("sec one"), rel(0.95));
  mock.register_script(judgment_of("sec two"), rel(0.6));
  const auto out = mine_stage2_triplet(mock, w.index, w.kb, w.sample(), 1);
  ASSERT_TRUE(out.triplet);
  EXPECT_EQ(out.triplet->positive.section_index, 1u);
  EXPECT_EQ(out.triplet->hard_negative.section_index, 2u);
}

TEST(Stage2, SoftNegativeNeverGoldProperty) {
  MiningWorld w;
  MockBackend mock;
  mock.register_script(judgment_of(""), rel(0.3));
  Rng rng(4);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    QuerySample s = w.sample();
    s.id = "m" + std::to_string(seed);
    s.image_embedding = testing::random_unit(rng, 3);
    const auto out = mine_stage2_triplet(mock, w.index, w.kb, s, seed);
    ASSERT_TRUE(out.triplet);
    EXPECT_NE(out.triplet->soft_negative.doc_id, "gold");
    EXPECT_NO_THROW(check_triplet(*out.triplet, "gold"));
  }
}

TEST(Stage2, SkipsWithoutTwoGoldPassages) {
  MiningWorld w;
  MockBackend mock;
  QuerySample s = w.sample();
  s.gold_doc_id = "far";
  EXPECT_FALSE(mine_stage2_triplet(mock, w.index, w.kb, s, 0).triplet);
}

TEST(CheckTriplet, Rules) {
  EXPECT_NO_THROW(check_triplet({{"g", 0, "a"}, {"g", 1, "b"}, {"o", 0, "c"}}, "g"));
  EXPECT_THROW(check_triplet({{"o", 0, "a"}, {"g", 1, "b"}, {"o", 0, "c"}}, "g"), ValidationError);
  EXPECT_THROW(check_triplet({{"g", 0, "a"}, {"g", 0, "a"}, {"o", 0, "c"}}, "g"), ValidationError);
  EXPECT_THROW(check_triplet({{"g", 0, "a"}, {"g", 1, "b"}, {"g", 2, "c"}}, "g"), ValidationError);
}

std::pair<std::vector<std::pair<QuerySample, Stage2Triplet>>, std::vector<QuerySample>> mixture_inputs() {
  std::vector<std::pair<QuerySample, Stage2Triplet>> triplets;
  for (int i = 0; i < 100; ++i) {
    QuerySample s = testing::make_sample("t" + std::to_string(1000 + i), "q?", {"a"}, "g");
    s.dataset = i % 2 ? "infoseek" : "evqa";
    triplets.emplace_back(s, Stage2Triplet{{"g", 0, "p"}, {"g", 1, "h"}, {"o", 0, "s"}});
  }
  std::vector<QuerySample> noret;
  for (int i = 0; i < 40; ++i) {
    QuerySample s = testing::make_sample("n" + std::to_string(1000 + i), "q?", {"a"});
    s.dataset = "llava";
    noret.push_back(s);
  }
  return {triplets, noret};
}

TEST(Stage2Mixture, MinBalance) {
  const auto [triplets, noret] = mixture_inputs();
  const auto ds = emit_stage2_sequences(triplets, noret, 3);
  EXPECT_EQ(ds.report.before.at("pos_rel"), 100u);
  EXPECT_EQ(ds.report.before.at("hard_norel"), 100u);
  EXPECT_EQ(ds.report.before.at("soft_norel"), 100u);
  EXPECT_EQ(ds.report.before.at("noret"), 40u);
  for (const auto& [k, n] : ds.report.after) EXPECT_EQ(n, 40u) << k;
  EXPECT_EQ(ds.sequences.size(), 160u);
  std::size_t sum = 0;
  for (const auto& [d, kinds] : ds.report.by_dataset) {
    for (const auto& [k, n] : kinds) sum += n;
  }
  EXPECT_EQ(sum, ds.sequences.size());
  EXPECT_EQ(ds.report.total, ds.sequences.size());
  for (const auto& s : ds.sequences) expect_mask_rule(s);
  for (std::size_t i = 1; i < ds.sequences.size(); ++i) {
    const auto& a = ds.sequences[i - 1];
    const auto& b = ds.sequences[i];
    EXPECT_TRUE(a.sample_id < b.sample_id || (a.sample_id == b.sample_id && a.kind <= b.kind));
  }
}

TEST(Stage2Mixture, SerializationRoundTripAndDeterminism) {
  const auto [triplets, noret] = mixture_inputs();
  const auto one = emit_stage2_sequences(triplets, noret, 3);
  const auto two = emit_stage2_sequences(triplets, noret, 3);
  testing::TempDir dir;
  save_sequences(one.sequences, dir / "a.jsonl");
  save_sequences(two.sequences, dir / "b.jsonl");
  EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
  const auto back = load_sequences(dir / "a.jsonl");
  ASSERT_EQ(back.size(), one.sequences.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i], one.sequences[i]);
    EXPECT_EQ(back[i].loss_mask, one.sequences[i].loss_mask);
  }
  const auto other_seed = emit_stage2_sequences(triplets, noret, 4);
  EXPECT_NE(other_seed.sequences, one.sequences);
}

TEST(BuildStage1, GroupsAndSkips) {
  const KnowledgeBase kb({make_doc("g1", {"Paris is the capital.", "Lyon is large."}),
                          make_doc("g2", {"single section"})},
                         2);
  std::vector<QuerySample> samples{testing::make_sample("b", "Capital?", {"Paris"}, "g1"),
                                   testing::make_sample("a", "Q?", {"x"}, "g2"),
                                   testing::make_sample("c", "Q?", {"x"})};
  HeuristicAnnotator h;
  const auto r = build_stage1(kb, samples, h, kScorer);
  ASSERT_EQ(r.groups.size(), 1u);
  EXPECT_EQ(r.groups[0].first, "b");
  EXPECT_EQ(r.sequences.size(), 2u);
  ASSERT_EQ(r.skipped.size(), 2u);
  EXPECT_EQ(r.skipped[0].sample_id, "a");
  EXPECT_EQ(r.skipped[1].sample_id, "c");
}

TEST(BuildStage2, ParallelMatchesSerial) {
  MiningWorld w;
  MockBackend mock;
  mock.register_script(judgment_of("sec zero"), rel(0.8));
  mock.register_script(judgment_of(""), rel(0.3));
  std::vector<QuerySample> samples;
  for (int i = 0; i < 30; ++i) {
    QuerySample s = w.sample();
    s.id = "s" + std::to_string(100 + i);
    samples.push_back(s);
  }
  const std::vector<QuerySample> noret{testing::make_sample("n1", "q", {"a"})};
  const auto a = build_stage2(mock, w.index, w.kb, samples, noret, 9, 1);
  const auto b = build_stage2(mock, w.index, w.kb, samples, noret, 9, 4);
  EXPECT_EQ(a.dataset.sequences, b.dataset.sequences);
  EXPECT_EQ(a.triplets.size(), 30u);
}

}  // namespace
}  // namespace reflectiva
