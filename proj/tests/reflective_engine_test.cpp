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
#include <mutex>

#include "reflectiva/error.hpp"
#include "reflectiva/mock_backend.hpp"
#include "reflectiva/prompt.hpp"
#include "reflectiva/reflective_engine.hpp"
#include "test_support.hpp"

namespace reflectiva {
namespace {

using testing::make_doc;
using testing::unit;

ScriptMatcher stage(CallKind k) {
  ScriptMatcher m;
  m.kind = k;
  return m;
}

ScriptMatcher judgment_of(const std::string& needle) {
  ScriptMatcher m = stage(CallKind::Judgment);
  m.passage_contains = needle;
  return m;
}

ScriptedResponse rel(double p) {
  return ScriptedResponse::binary(ReflectiveToken::Rel, std::log(p), ReflectiveToken::NoRel, std::log1p(-p));
}

ScriptedResponse ret(double p) {
  return ScriptedResponse::binary(ReflectiveToken::Ret, std::log(p), ReflectiveToken::NoRet, std::log1p(-p));
}

/// Seven documents with two or more sections each, on distinct axes.
struct World {
  KnowledgeBase kb;
  DenseIndex index;
  World()
      : kb({make_doc("a", {"a0 text", "a1 text"}, unit({1, 0.05f, 0, 0})),
            make_doc("b", {"b0 text", "b1 text"}, unit({1, 0.2f, 0, 0})),
            make_doc("c", {"c0 text", "c1 text", "c2 text"}, unit({1, 0.4f, 0, 0})),
            make_doc("d", {"d0 text", "d1 text", "d2 text"}, unit({1, 0.6f, 0, 0})),
            make_doc("e", {"e0 text", "e1 text"}, unit({1, 0.8f, 0, 0})),
            make_doc("f", {"f0 text", "f1 text", "f2 text", "f3 text"}, unit({0, 0, 1, 0})),
            make_doc("g", {"g0 text", "g1 text"}, unit({0, 0, 0, 1}))},
           4),
        index(build_index(kb, RetrievalMode::Visual, nullptr)) {}
};

QuerySample query(std::string id = "q1") {
  return testing::make_sample(std::move(id), "Which one?", {"x"}, "a", std::vector<float>{1, 0, 0, 0});
}

TEST(DecideRetrieval, ScriptedNoRet) {
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.1));
  Engine e(mock, nullptr, nullptr);
  const auto d = e.decide_retrieval(query());
  EXPECT_EQ(d.token, ReflectiveToken::NoRet);
  EXPECT_FALSE(d.forced);
  EXPECT_EQ(d.effective(), ReflectiveToken::NoRet);
}

TEST(DecideRetrieval, ForcedRetKeepsLogprobs) {
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.1));
  Engine e(mock, nullptr, nullptr);
  const auto d = e.decide_retrieval(query(), ForceDecision::AlwaysRet);
  EXPECT_EQ(mock.calls(CallKind::Decision), 1u);
  EXPECT_EQ(d.token, ReflectiveToken::NoRet);
  EXPECT_EQ(d.forced, ReflectiveToken::Ret);
  EXPECT_EQ(d.effective(), ReflectiveToken::Ret);
  EXPECT_DOUBLE_EQ(d.logp_ret, std::log(0.1));
  EXPECT_DOUBLE_EQ(d.logp_noret, std::log1p(-0.1));
}

TEST(DecideRetrieval, Argmax) {
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision),
                       ScriptedResponse::binary(ReflectiveToken::Ret, -0.2, ReflectiveToken::NoRet, -1.8));
  Engine e(mock, nullptr, nullptr);
  EXPECT_EQ(e.decide_retrieval(query()).token, ReflectiveToken::Ret);
}

TEST(DecideRetrieval, TieFollowsEmittedToken) {
  for (auto emitted : {ReflectiveToken::Ret, ReflectiveToken::NoRet}) {
    MockBackend mock;
    ScriptedResponse r;
    r.steps.push_back({std::string(to_string(emitted)), {{"<RET>", std::log(0.5)}, {"<NORET>", std::log(0.5)}}, std::log(0.5)});
    mock.register_script(stage(CallKind::Decision), r);
    Engine e(mock, nullptr, nullptr);
    EXPECT_EQ(e.decide_retrieval(query()).token, emitted);
  }
}

TEST(Judgment, TieIsNoRel) {
  const auto j = make_judgment({"d", 0, "t"}, -0.7, -0.7);
  EXPECT_EQ(j.token, ReflectiveToken::NoRel);
  EXPECT_EQ(j.score, 0.0);
  EXPECT_THROW(make_judgment({"d", 0, "t"}, std::nan(""), -1.0), ProtocolViolation);
}

TEST(Judgment, ExactlyTwoPositiveOfFive) {
  MockBackend mock;
  const std::vector<double> probs{0.2, 0.7, 0.4, 0.9, 0.5};
  std::vector<Passage> ps;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    ps.push_back({"d", i, "passage-" + std::to_string(i)});
    mock.register_script(judgment_of("passage-" + std::to_string(i)), rel(probs[i]));
  }
  Engine e(mock, nullptr, nullptr);
  std::size_t rel_count = 0;
  for (const auto& p : ps) rel_count += e.judge_passage(query(), p).token == ReflectiveToken::Rel;
  EXPECT_EQ(rel_count, 2u);
}

RelevanceJudgment with_score(std::size_t i, double s) { return make_judgment({"d", i, "t"}, s, 0.0); }

TEST(RankByRelevance, Examples) {
  const std::vector<RelevanceJudgment> js{with_score(0, 2.2), with_score(1, -0.5), with_score(2, 0.7)};
  const auto top = rank_by_relevance(js, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].section_index, 0u);
  EXPECT_EQ(top[1].section_index, 2u);

  const std::vector<RelevanceJudgment> eq{with_score(0, 1), with_score(1, 1), with_score(2, 1)};
  const auto all = rank_by_relevance(eq, 5);
  ASSERT_EQ(all.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(all[i].section_index, i);
}

TEST(RankByRelevance, MatchesInsertionSortOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(15);
    std::vector<RelevanceJudgment> js;
    for (std::size_t i = 0; i < n; ++i) {
      // few distinct values so ties are common
      js.push_back(make_judgment({"d", i, "t"}, -static_cast<double>(rng.uniform_index(5)), -2.0));
    }
    // insertion sort: stable by construction
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i) {
      auto pos = order.end();
      while (pos != order.begin() && js[*(pos - 1)].score < js[i].score) --pos;
      order.insert(pos, i);
    }
    const std::size_t k = 1 + rng.uniform_index(n);
    const auto got = rank_by_relevance(js, k);
    ASSERT_EQ(got.size(), k);
    for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(got[i].section_index, order[i]);
  }
}

TEST(Run, RetWithOneRelevantPassage) {
  const KnowledgeBase kb({make_doc("x", {"x-first", "x-second"}, unit({1, 0})),
                          make_doc("y", {"y-first", "y-second"}, unit({1, 1}))},
                         2);
  const auto index = build_index(kb, RetrievalMode::Visual, nullptr);
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  mock.register_script(judgment_of("y-first"), rel(0.8));
  mock.register_script(stage(CallKind::Judgment), rel(0.2));
  std::vector<std::vector<std::string>> answer_contexts;
  std::mutex mu;
  ScriptMatcher answer = stage(CallKind::Answer);
  answer.predicate = [&](const PromptView& v) {
    std::lock_guard lock(mu);
    answer_contexts.push_back(v.passages);
    return true;
  };
  mock.register_script(answer, ScriptedResponse::text({"yes"}));
  Engine e(mock, &kb, &index);
  QuerySample s = query();
  s.image_embedding = std::vector<float>{1, 0};
  PipelineConfig cfg;
  cfg.top_k_docs = 2;
  const auto t = e.run(s, cfg);
  EXPECT_EQ(t.candidates.size(), 4u);
  EXPECT_EQ(t.judgments.size(), 4u);
  ASSERT_EQ(t.selected.size(), 1u);
  EXPECT_EQ(t.selected[0].text, "y-first");
  ASSERT_EQ(answer_contexts.size(), 1u);
  EXPECT_EQ(answer_contexts[0], std::vector<std::string>{"y-first"});
  EXPECT_EQ(t.answer, "yes");
  EXPECT_FALSE(t.fallback);
}

TEST(Run, RandomPerDocumentGivesTenPassages) {
  World w;
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  std::size_t seen = 0;
  ScriptMatcher answer = stage(CallKind::Answer);
  answer.predicate = [&](const PromptView& v) {
    seen = v.passages.size();
    return true;
  };
  mock.register_script(answer, ScriptedResponse::text({"ok"}));
  Engine e(mock, &w.kb, &w.index);
  PipelineConfig cfg;
  cfg.selection = PassageSelection::RandomPerDocument;
  cfg.seed = 5;
  const auto t = e.run(query(), cfg);
  EXPECT_EQ(t.hits.size(), 5u);
  EXPECT_EQ(t.selected.size(), 10u);
  EXPECT_EQ(seen, 10u);
  EXPECT_TRUE(t.judgments.empty());
  std::map<std::string, int> per_doc;
  for (const auto& p : t.selected) ++per_doc[p.doc_id];
  for (const auto& [doc, n] : per_doc) EXPECT_EQ(n, 2) << doc;
  EXPECT_EQ(e.run(query(), cfg), t);
}

TEST(Run, RandomPerDocumentShortDocs) {
  const KnowledgeBase kb({make_doc("x", {"only"}, unit({1, 0})), make_doc("y", {"a", "b", "c"}, unit({1, 1}))}, 2);
  const auto index = build_index(kb, RetrievalMode::Visual, nullptr);
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  mock.register_script(stage(CallKind::Answer), ScriptedResponse::text({"ok"}));
  Engine e(mock, &kb, &index);
  PipelineConfig cfg;
  cfg.selection = PassageSelection::RandomPerDocument;
  QuerySample s = query();
  s.image_embedding = std::vector<float>{1, 0};
  EXPECT_EQ(e.run(s, cfg).selected.size(), 3u);
}

TEST(Run, ExternalScorerTopTwo) {
  const KnowledgeBase kb({make_doc("x", {"red apple pie", "blue sky", "red apple"}, unit({1, 0}))}, 2);
  const auto index = build_index(kb, RetrievalMode::Visual, nullptr);
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  mock.register_script(stage(CallKind::Answer), ScriptedResponse::text({"ok"}));
  Engine e(mock, &kb, &index);
  const LexicalOverlapScorer scorer;
  e.set_text_scorer(&scorer);
  QuerySample s = testing::make_sample("s", "red apple", {"x"}, "x", std::vector<float>{1, 0});
  PipelineConfig cfg;
  cfg.selection = PassageSelection::ExternalScorer;
  const auto t = e.run(s, cfg);
  ASSERT_EQ(t.selected.size(), 2u);
  EXPECT_EQ(t.selected[0].section_index, 0u);
  EXPECT_EQ(t.selected[1].section_index, 2u);
  EXPECT_EQ(mock.calls(CallKind::Judgment), 0u);
  Engine bare(mock, &kb, &index);
  EXPECT_THROW(bare.run(s, cfg), ConfigError);
}

TEST(Run, MaxRelevantKeepsBestInCandidateOrder) {
  World w;
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  mock.register_script(judgment_of("a0"), rel(0.6));
  mock.register_script(judgment_of("a1"), rel(0.9));
  mock.register_script(judgment_of("b0"), rel(0.8));
  mock.register_script(stage(CallKind::Judgment), rel(0.1));
  mock.register_script(stage(CallKind::Answer), ScriptedResponse::text({"ok"}));
  Engine e(mock, &w.kb, &w.index);
  PipelineConfig cfg;
  cfg.top_k_docs = 2;
  cfg.max_relevant = 2;
  const auto t = e.run(query(), cfg);
  ASSERT_EQ(t.selected.size(), 2u);
  EXPECT_EQ(t.selected[0].text, "a1 text");
  EXPECT_EQ(t.selected[1].text, "b0 text");
}

TEST(Run, ExternalRerankTruncatesToKp) {
  World w;
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  mock.register_script(stage(CallKind::Judgment), rel(0.7));
  mock.register_script(stage(CallKind::Answer), ScriptedResponse::text({"ok"}));
  struct Reverse final : PassageReranker {
    std::vector<Passage> rerank(const QuerySample&, const std::vector<Passage>& c) override {
      return {c.rbegin(), c.rend()};
    }
  } reverse;
  Engine e(mock, &w.kb, &w.index);
  PipelineConfig cfg;
  cfg.top_k_docs = 2;
  cfg.rerank = RerankMode::External;
  cfg.k_p = 3;
  EXPECT_THROW(e.run(query(), cfg), ConfigError);
  e.set_reranker(&reverse);
  const auto t = e.run(query(), cfg);
  ASSERT_EQ(t.candidates.size(), 3u);
  EXPECT_EQ(t.candidates[0].text, "b1 text");
  EXPECT_EQ(t.selected.size(), 3u);
}

TEST(Run, BuiltInNeverFallsBack) {
  World w;
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  mock.register_script(judgment_of("a1"), rel(0.3));
  mock.register_script(stage(CallKind::Judgment), rel(0.1));
  mock.register_script(stage(CallKind::Answer), ScriptedResponse::text({"ok"}));
  Engine e(mock, &w.kb, &w.index);
  PipelineConfig cfg;
  cfg.top_k_docs = 2;
  cfg.rerank = RerankMode::BuiltIn;
  cfg.k_p = 1;
  const auto t = e.run(query(), cfg);
  ASSERT_EQ(t.selected.size(), 1u);
  EXPECT_EQ(t.selected[0].text, "a1 text");
  EXPECT_FALSE(t.fallback);
}

TEST(Run, ErrorsWithoutProviders) {
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  Engine bare(mock, nullptr, nullptr);
  EXPECT_THROW(bare.run(query(), {}), ConfigError);
  World w;
  Engine e(mock, &w.kb, &w.index);
  QuerySample s = query();
  s.image_embedding.reset();
  EXPECT_THROW(e.run(s, {}), PipelineError);
  PipelineConfig bad;
  bad.top_k_docs = 0;
  EXPECT_THROW(e.run(query(), bad), ConfigError);
}

/// Delegates to a mock, failing judgments whose passage contains "a1".
class FlakyBackend final : public GenerativeBackend {
 public:
  explicit FlakyBackend(MockBackend& inner, bool all = false) : inner_(inner), all_(all) {}
  GenerationResult generate(const Prompt& p, const Vocabulary& v, std::optional<std::size_t> n) override {
    const auto view = describe_prompt(p, v);
    if (view.kind == CallKind::Judgment && (all_ || view.passages.at(0).find("a1") != std::string::npos)) {
      throw TransportError("judge unreachable", 4, 503);
    }
    return inner_.generate(p, v, n);
  }
  std::vector<std::string> control_tokens() const override { return inner_.control_tokens(); }

 private:
  MockBackend& inner_;
  bool all_;
};

TEST(Run, FailedJudgmentsRecorded) {
  World w;
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  mock.register_script(stage(CallKind::Judgment), rel(0.7));
  mock.register_script(stage(CallKind::Answer), ScriptedResponse::text({"ok"}));
  FlakyBackend flaky(mock);
  Engine e(flaky, &w.kb, &w.index);
  PipelineConfig cfg;
  cfg.top_k_docs = 1;
  const auto t = e.run(query(), cfg);
  ASSERT_EQ(t.failed_judgments.size(), 1u);
  EXPECT_EQ(t.failed_judgments[0].passage.text, "a1 text");
  EXPECT_EQ(t.judgments.size(), 1u);

  FlakyBackend all_down(mock, true);
  Engine dead(all_down, &w.kb, &w.index);
  EXPECT_THROW(dead.run(query(), cfg), PipelineError);
}

TEST(Oracle, JudgesEveryGoldSection) {
  World w;
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.2));
  mock.register_script(judgment_of("f2"), rel(0.95));
  mock.register_script(judgment_of("f0"), rel(0.7));
  mock.register_script(stage(CallKind::Judgment), rel(0.3));
  mock.register_script(stage(CallKind::Answer), ScriptedResponse::text({"ok"}));
  Engine e(mock, &w.kb, &w.index);
  const auto t = e.run_oracle(query(), "f", {});
  EXPECT_EQ(t.mode, TraceMode::Oracle);
  EXPECT_EQ(t.judgments.size(), 4u);
  EXPECT_TRUE(t.hits.empty());
  EXPECT_EQ(t.decision.token, ReflectiveToken::NoRet);
  EXPECT_EQ(t.decision.effective(), ReflectiveToken::Ret);
  EXPECT_EQ(t.selected.size(), 2u);

  PipelineConfig builtin;
  builtin.rerank = RerankMode::BuiltIn;
  builtin.k_p = 1;
  const auto b = e.run_oracle(query(), "f", builtin);
  ASSERT_EQ(b.selected.size(), 1u);
  EXPECT_EQ(b.selected[0].section_index, 2u);
}

TEST(Oracle, AllNoRelFallsBackToBest) {
  World w;
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  mock.register_script(judgment_of("f1"), rel(0.45));
  mock.register_script(stage(CallKind::Judgment), rel(0.1));
  mock.register_script(stage(CallKind::Answer), ScriptedResponse::text({"ok"}));
  Engine e(mock, &w.kb, &w.index);
  const auto t = e.run_oracle(query(), "f", {});
  EXPECT_TRUE(t.fallback);
  ASSERT_EQ(t.selected.size(), 1u);
  EXPECT_EQ(t.selected[0].section_index, 1u);
  PipelineConfig noret;
  noret.force_decision = ForceDecision::AlwaysNoRet;
  const auto n = e.run_oracle(query(), "f", noret);
  EXPECT_TRUE(n.candidates.empty());
  EXPECT_EQ(n.decision.effective(), ReflectiveToken::NoRet);
}

TEST(Trace, JsonRoundTrip) {
  World w;
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  mock.register_script(judgment_of("a0"), rel(0.8));
  mock.register_script(stage(CallKind::Judgment), rel(0.2));
  mock.register_script(stage(CallKind::Answer), ScriptedResponse::text({"The", " answer"}));
  Engine e(mock, &w.kb, &w.index);
  const auto t = e.run(query(), {});
  const auto j = to_json(t, false);
  EXPECT_FALSE(j.contains("timings_ms"));
  EXPECT_TRUE(to_json(t, true).contains("timings_ms"));
  EXPECT_EQ(trace_from_json(j), t);
  EXPECT_EQ(trace_from_json(nlohmann::json::parse(j.dump())), t);
  EXPECT_EQ(t.answer, "The answer");
}

TEST(Batch, OrderAndErrorCapture) {
  World w;
  MockBackend mock;
  mock.register_script(stage(CallKind::Decision), ret(0.9));
  mock.register_script(stage(CallKind::Judgment), rel(0.6));
  mock.register_script(stage(CallKind::Answer), ScriptedResponse::text({"ok"}));
  Engine e(mock, &w.kb, &w.index);
  std::vector<QuerySample> samples;
  for (int i = 0; i < 40; ++i) {
    QuerySample s = query("s" + std::to_string(i));
    s.image_embedding = testing::unit({1, static_cast<float>(i) * 0.05f, static_cast<float>(i % 3), 0});
    if (i == 7) s.image_embedding.reset();
    samples.push_back(s);
  }
  const auto serial = e.run_batch(samples, {}, 1);
  const auto parallel = e.run_batch(samples, {}, 4);
  ASSERT_EQ(parallel.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i == 7) {
      EXPECT_FALSE(parallel[i].trace);
      EXPECT_FALSE(parallel[i].error.empty());
      continue;
    }
    ASSERT_TRUE(parallel[i].trace);
    EXPECT_EQ(parallel[i].trace->sample_id, samples[i].id);
    EXPECT_EQ(*parallel[i].trace, *serial[i].trace);
  }
}

TEST(PipelineConfig, JsonAndValidation) {
  PipelineConfig c;
  c.rerank = RerankMode::BuiltIn;
  c.k_p = 3;
  c.max_relevant = 4;
  c.selection = PassageSelection::RandomPerDocument;
  c.seed = 99;
  EXPECT_EQ(pipeline_config_from_json(to_json(c)), c);
  EXPECT_EQ(PipelineConfig{}.top_k_docs, 5u);
  c.k_p = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_rerank_mode("fancy"), ConfigError);
  EXPECT_EQ(parse_force_decision("always_noret"), ForceDecision::AlwaysNoRet);
}

}  // namespace
}  // namespace reflectiva
