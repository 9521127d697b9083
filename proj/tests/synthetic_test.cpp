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

#include "reflectiva/error.hpp"
#include "reflectiva/eval_harness.hpp"
#include "reflectiva/mock_backend.hpp"
#include "reflectiva/synthetic.hpp"
#include "synthetic_oracle.hpp"
#include "test_support.hpp"

namespace reflectiva {
namespace {

TEST(Synthetic, Deterministic) {
  const SyntheticConfig c{.num_docs = 20, .dim = 8, .num_samples = 15, .seed = 4};
  const auto a = make_synthetic_world(c);
  const auto b = make_synthetic_world(c);
  EXPECT_EQ(a.scripts, b.scripts);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.documents, b.documents);
  SyntheticConfig other = c;
  other.seed = 5;
  EXPECT_NE(make_synthetic_world(other).scripts, a.scripts);

  testing::TempDir d1;
  testing::TempDir d2;
  write_synthetic_world(a, d1.path());
  write_synthetic_world(b, d2.path());
  for (const char* f : {"kb.jsonl", "samples.jsonl", "scripts.json"}) {
    EXPECT_EQ(read_file(d1 / f), read_file(d2 / f)) << f;
  }
  const auto kb = load_kb(d1 / "kb.jsonl");
  EXPECT_EQ(kb.size(), 20u);
  EXPECT_EQ(load_samples(d1 / "samples.jsonl"), a.samples);
}

TEST(Synthetic, FactsAgreeWithWorld) {
  const auto w = make_synthetic_world({.num_docs = 60, .dim = 16, .num_samples = 200, .seed = 9});
  ASSERT_EQ(w.samples.size(), w.facts.size());
  const auto kb = w.knowledge_base();
  std::size_t noret = 0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto& s = w.samples[i];
    const auto& f = w.facts[i];
    EXPECT_EQ(s.id, f.sample_id);
    EXPECT_NO_THROW(validate_sample(s, 16));
    EXPECT_EQ(f.needs_kb, s.gold_doc_id.has_value());
    if (!f.needs_kb) {
      ++noret;
      EXPECT_EQ(s.dataset, "gqa");
      continue;
    }
    const Document& gold = kb.at(*s.gold_doc_id);
    ASSERT_TRUE(f.answer_section);
    ASSERT_LT(*f.answer_section, gold.sections.size());
    EXPECT_NE(gold.sections[*f.answer_section].body.find(f.answer_sentence), std::string::npos);
    ASSERT_EQ(f.gold_rel_probs.size(), gold.sections.size());
    EXPECT_EQ(f.gold_rel_probs[*f.answer_section] > 0.5, f.answer_judged_rel);
    EXPECT_NE(f.answer_sentence.find(s.gold_answers.front()), std::string::npos);
  }
  EXPECT_GT(noret, 20u);
  EXPECT_LT(noret, 60u);
}

TEST(Synthetic, ScriptsCoverEveryPipelineCall) {
  const auto w = make_synthetic_world({.num_docs = 30, .dim = 16, .num_samples = 40, .seed = 2});
  const auto kb = w.knowledge_base();
  const auto index = build_index(kb, RetrievalMode::Visual, nullptr);
  MockBackend mock;
  mock.load_scripts(w.scripts);
  Engine engine(mock, &kb, &index);
  for (const auto force : {ForceDecision::None, ForceDecision::AlwaysRet, ForceDecision::AlwaysNoRet}) {
    PipelineConfig c;
    c.top_k_docs = 3;
    c.force_decision = force;
    for (const auto& item : engine.run_batch(w.samples, c, 1)) EXPECT_TRUE(item.trace) << item.error;
  }
}

TEST(Synthetic, OracleAgreesWithEngine) {
  const auto w = make_synthetic_world({.num_docs = 40, .dim = 16, .num_samples = 60, .seed = 13});
  const auto kb = w.knowledge_base();
  const auto index = build_index(kb, RetrievalMode::Visual, nullptr);
  MockBackend mock;
  mock.load_scripts(w.scripts);
  LexicalOverlapScorer scorer;
  Engine engine(mock, &kb, &index);
  engine.set_text_scorer(&scorer);
  using testing::OracleVariant;
  const std::pair<AblationVariant, OracleVariant> pairs[] = {
      {AblationVariant::Full, OracleVariant::Full},
      {AblationVariant::AlwaysRet, OracleVariant::AlwaysRet},
      {AblationVariant::ExternalScorerPassages, OracleVariant::ExternalScorer},
      {AblationVariant::RandomPassagesNoRel, OracleVariant::Random},
      {AblationVariant::NoKB, OracleVariant::NoKB}};
  for (std::size_t top_k : {1u, 2u}) {
    PipelineConfig base;
    base.top_k_docs = top_k;
    base.seed = 77;
    for (const auto& [av, ov] : pairs) {
      const auto items = engine.run_batch(w.samples, variant_config(av, base), 1);
      for (std::size_t i = 0; i < items.size(); ++i) {
        ASSERT_TRUE(items[i].trace);
        const auto& t = *items[i].trace;
        const auto p = testing::predict(w, i, ov, top_k, base.seed);
        const auto& s = w.samples[i];
        const auto tag = std::string(to_string(av)) + " " + s.id;
        EXPECT_EQ(t.decision.effective() == ReflectiveToken::Ret, p.ret) << tag;
        EXPECT_EQ(t.fallback, p.fallback) << tag;
        EXPECT_EQ(t.selected.size(), p.selected) << tag;
        const int acc = is_numeric_question(s.gold_answers) ? relaxed_accuracy(t.answer, s.gold_answers)
                                                            : vqa_accuracy(t.answer, s.gold_answers);
        EXPECT_EQ(acc == 1, p.correct) << tag << " answer " << t.answer;
      }
    }
  }
}

TEST(Synthetic, BadConfig) {
  EXPECT_THROW(make_synthetic_world({.num_docs = 0}), ConfigError);
  EXPECT_THROW(make_synthetic_world({.min_sections = 3, .max_sections = 2}), ConfigError);
}

}  // namespace
}  // namespace reflectiva
