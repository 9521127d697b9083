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

#include "reflectiva/reflective_engine.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "reflectiva/error.hpp"
#include "reflectiva/prompt.hpp"
#include "reflectiva/util.hpp"

namespace reflectiva {

using nlohmann::json;

std::string_view to_string(RerankMode v) noexcept {
  switch (v) {
    case RerankMode::None:
      return "none";
    case RerankMode::BuiltIn:
      return "builtin";
    case RerankMode::External:
      return "external";
  }
  return "none";
}

std::string_view to_string(ForceDecision v) noexcept {
  switch (v) {
    case ForceDecision::None:
      return "none";
    case ForceDecision::AlwaysRet:
      return "always_ret";
    case ForceDecision::AlwaysNoRet:
      return "always_noret";
  }
  return "none";
}

std::string_view to_string(PassageSelection v) noexcept {
  switch (v) {
    case PassageSelection::Reflective:
      return "reflective";
    case PassageSelection::ExternalScorer:
      return "external_scorer";
    case PassageSelection::RandomPerDocument:
      return "random_per_document";
  }
  return "reflective";
}

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view text, const E (&values)[N], std::string_view what) {
  for (E v : values) {
    if (to_string(v) == text) return v;
  }
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

RerankMode parse_rerank_mode(std::string_view text) {
  static constexpr RerankMode kAll[] = {RerankMode::None, RerankMode::BuiltIn, RerankMode::External};
  return parse_enum(text, kAll, "rerank mode");
}

ForceDecision parse_force_decision(std::string_view text) {
  static constexpr ForceDecision kAll[] = {ForceDecision::None, ForceDecision::AlwaysRet, ForceDecision::AlwaysNoRet};
  return parse_enum(text, kAll, "forced decision");
}

PassageSelection parse_passage_selection(std::string_view text) {
  static constexpr PassageSelection kAll[] = {PassageSelection::Reflective, PassageSelection::ExternalScorer,
                                              PassageSelection::RandomPerDocument};
  return parse_enum(text, kAll, "passage selection");
}

void PipelineConfig::validate() const {
  if (top_k_docs == 0) throw ConfigError("top_k_docs must be at least 1");
  if (rerank != RerankMode::None && k_p == 0) throw ConfigError("k_p must be at least 1 when re-ranking");
  if (max_relevant && *max_relevant == 0) throw ConfigError("max_relevant must be at least 1 when set");
  if (selection == PassageSelection::ExternalScorer && scorer_top_n == 0) {
    throw ConfigError("scorer_top_n must be at least 1");
  }
  if (selection == PassageSelection::RandomPerDocument && random_per_doc == 0) {
    throw ConfigError("random_per_doc must be at least 1");
  }
}

json to_json(const PipelineConfig& c) {
  return {{"top_k_docs", c.top_k_docs},
          {"rerank", to_string(c.rerank)},
          {"k_p", c.k_p},
          {"max_relevant", c.max_relevant ? json(*c.max_relevant) : json(nullptr)},
          {"force_decision", to_string(c.force_decision)},
          {"selection", to_string(c.selection)},
          {"scorer_top_n", c.scorer_top_n},
          {"random_per_doc", c.random_per_doc},
          {"seed", c.seed},
          {"rerank_failure", to_string(c.rerank_failure)}};
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  try {
    if (j.contains("top_k_docs")) c.top_k_docs = j.at("top_k_docs").get<std::size_t>();
    if (j.contains("rerank")) c.rerank = parse_rerank_mode(j.at("rerank").get<std::string>());
    if (j.contains("k_p")) c.k_p = j.at("k_p").get<std::size_t>();
    if (j.contains("max_relevant")) {
      const auto& v = j.at("max_relevant");
      c.max_relevant = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
    }
    if (j.contains("force_decision")) c.force_decision = parse_force_decision(j.at("force_decision").get<std::string>());
    if (j.contains("selection")) c.selection = parse_passage_selection(j.at("selection").get<std::string>());
    if (j.contains("scorer_top_n")) c.scorer_top_n = j.at("scorer_top_n").get<std::size_t>();
    if (j.contains("random_per_doc")) c.random_per_doc = j.at("random_per_doc").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("rerank_failure")) {
      c.rerank_failure = parse_rerank_failure_policy(j.at("rerank_failure").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad pipeline config: ") + e.what());
  }
  return c;
}

RelevanceJudgment make_judgment(Passage passage, double logp_rel, double logp_norel) {
  RelevanceJudgment j;
  j.passage = std::move(passage);
  j.logp_rel = logp_rel;
  j.logp_norel = logp_norel;
  j.score = logp_rel - logp_norel;
  if (!std::isfinite(j.score)) throw ProtocolViolation("non-finite relevance score");
  j.token = j.score > 0.0 ? ReflectiveToken::Rel : ReflectiveToken::NoRel;
  return j;
}

bool PipelineTrace::operator==(const PipelineTrace& o) const {
  return sample_id == o.sample_id && mode == o.mode && decision == o.decision && hits == o.hits &&
         candidates == o.candidates && judgments == o.judgments && selected == o.selected && answer == o.answer &&
         fallback == o.fallback && failed_judgments == o.failed_judgments;
}

std::string_view to_string(TraceMode m) noexcept {
  switch (m) {
    case TraceMode::Search:
      return "search";
    case TraceMode::Oracle:
      return "oracle";
    case TraceMode::Probe:
      return "probe";
  }
  return "search";
}

TraceMode parse_trace_mode(std::string_view text) {
  static constexpr TraceMode kAll[] = {TraceMode::Search, TraceMode::Oracle, TraceMode::Probe};
  return parse_enum(text, kAll, "trace mode");
}

namespace {

json key_json(const Passage& p) { return {{"doc_id", p.doc_id}, {"section_index", p.section_index}}; }

ReflectiveToken token_from_json(const json& j) {
  const auto text = j.get<std::string>();
  const auto t = parse_reflective_token(text);
  if (!t) throw ParseError("not a reflective token: " + text, 0);
  return *t;
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double required_logprob(const GenerationResult& r, ReflectiveToken t, std::string_view what) {
  const auto lp = r.logprob(0, to_string(t));
  if (!lp) {
    throw ProtocolViolation(std::string(what) + " response lacks a log-probability for " + std::string(to_string(t)));
  }
  return *lp;
}

}  // namespace

json to_json(const PipelineTrace& t, bool with_timings) {
  json j;
  j["sample_id"] = t.sample_id;
  j["mode"] = to_string(t.mode);
  j["decision"] = {{"token", to_string(t.decision.token)},
                   {"logp_ret", t.decision.logp_ret},
                   {"logp_noret", t.decision.logp_noret},
                   {"forced", t.decision.forced ? json(to_string(*t.decision.forced)) : json(nullptr)},
                   {"effective", to_string(t.decision.effective())}};
  j["hits"] = json::array();
  for (const auto& h : t.hits) j["hits"].push_back({{"doc_id", h.doc_id}, {"score", h.score}, {"rank", h.rank}});
  j["candidates"] = json::array();
  for (const auto& p : t.candidates) {
    j["candidates"].push_back({{"doc_id", p.doc_id}, {"section_index", p.section_index}, {"text", p.text}});
  }
  j["judgments"] = json::array();
  for (const auto& r : t.judgments) {
    json e = key_json(r.passage);
    e["token"] = to_string(r.token);
    e["logp_rel"] = r.logp_rel;
    e["logp_norel"] = r.logp_norel;
    e["score"] = r.score;
    j["judgments"].push_back(std::move(e));
  }
  j["selected"] = json::array();
  for (const auto& p : t.selected) j["selected"].push_back(key_json(p));
  j["answer"] = t.answer;
  j["fallback"] = t.fallback;
  j["failed_judgments"] = json::array();
  for (const auto& f : t.failed_judgments) {
    json e = key_json(f.passage);
    e["error"] = f.error;
    j["failed_judgments"].push_back(std::move(e));
  }
  if (with_timings) {
    j["timings_ms"] = {{"decision", t.timings.decision_ms},
                       {"retrieval", t.timings.retrieval_ms},
                       {"judgment", t.timings.judgment_ms},
                       {"answer", t.timings.answer_ms}};
  }
  return j;
}

PipelineTrace trace_from_json(const json& j) {
  PipelineTrace t;
  try {
    t.sample_id = j.at("sample_id").get<std::string>();
    t.mode = parse_trace_mode(j.value("mode", std::string("search")));
    const auto& d = j.at("decision");
    t.decision.token = token_from_json(d.at("token"));
    t.decision.logp_ret = d.at("logp_ret").get<double>();
    t.decision.logp_noret = d.at("logp_noret").get<double>();
    if (d.contains("forced") && !d.at("forced").is_null()) t.decision.forced = token_from_json(d.at("forced"));
    for (const auto& h : j.at("hits")) {
      t.hits.push_back({h.at("doc_id").get<std::string>(), h.at("score").get<double>(), h.at("rank").get<std::size_t>()});
    }
    std::map<std::pair<std::string, std::size_t>, std::size_t> by_key;
    for (const auto& c : j.at("candidates")) {
      Passage p{c.at("doc_id").get<std::string>(), c.at("section_index").get<std::size_t>(),
                c.at("text").get<std::string>()};
      by_key.emplace(std::make_pair(p.doc_id, p.section_index), t.candidates.size());
      t.candidates.push_back(std::move(p));
    }
    const auto resolve = [&](const json& e) {
      const auto it = by_key.find({e.at("doc_id").get<std::string>(), e.at("section_index").get<std::size_t>()});
      if (it == by_key.end()) throw ParseError("trace refers to a passage outside its candidates", 0);
      return t.candidates[it->second];
    };
    for (const auto& e : j.at("judgments")) {
      RelevanceJudgment r;
      r.passage = resolve(e);
      r.token = token_from_json(e.at("token"));
      r.logp_rel = e.at("logp_rel").get<double>();
      r.logp_norel = e.at("logp_norel").get<double>();
      r.score = e.at("score").get<double>();
      t.judgments.push_back(std::move(r));
    }
    for (const auto& e : j.at("selected")) t.selected.push_back(resolve(e));
    t.answer = j.at("answer").get<std::string>();
    t.fallback = j.at("fallback").get<bool>();
    for (const auto& e : j.value("failed_judgments", json::array())) {
      t.failed_judgments.push_back({resolve(e), e.at("error").get<std::string>()});
    }
    if (j.contains("timings_ms")) {
      const auto& tm = j.at("timings_ms");
      t.timings = {tm.value("decision", 0.0), tm.value("retrieval", 0.0), tm.value("judgment", 0.0),
                   tm.value("answer", 0.0)};
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed trace: ") + e.what(), 0);
  }
  return t;
}

std::vector<Passage> rank_by_relevance(const std::vector<RelevanceJudgment>& judgments, std::size_t k_p) {
  std::vector<std::size_t> order(judgments.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return judgments[a].score > judgments[b].score; });
  std::vector<Passage> out;
  for (std::size_t i = 0; i < order.size() && i < k_p; ++i) out.push_back(judgments[order[i]].passage);
  return out;
}

Engine::Engine(GenerativeBackend& backend, const KnowledgeBase* kb, const DenseIndex* index)
    : backend_(backend), kb_(kb), index_(index) {}

RetrievalDecision Engine::decide_retrieval(const QuerySample& sample, ForceDecision force) {
  const auto allowed = Vocabulary::of({ReflectiveToken::Ret, ReflectiveToken::NoRet});
  const auto r = constrained_generate(backend_, build_prompt(PromptStage::Decision, sample), allowed, 1);
  RetrievalDecision d;
  d.logp_ret = required_logprob(r, ReflectiveToken::Ret, "decision");
  d.logp_noret = required_logprob(r, ReflectiveToken::NoRet, "decision");
  if (d.logp_ret != d.logp_noret) {
    d.token = d.logp_ret > d.logp_noret ? ReflectiveToken::Ret : ReflectiveToken::NoRet;
  } else {
    d.token = *parse_reflective_token(r.tokens.at(0));
  }
  if (force == ForceDecision::AlwaysRet) d.forced = ReflectiveToken::Ret;
  if (force == ForceDecision::AlwaysNoRet) d.forced = ReflectiveToken::NoRet;
  return d;
}

RelevanceJudgment Engine::judge_passage(const QuerySample& sample, const Passage& passage) {
  const auto allowed = Vocabulary::of({ReflectiveToken::Rel, ReflectiveToken::NoRel});
  const std::vector<Passage> one{passage};
  const auto r = constrained_generate(backend_, build_prompt(PromptStage::Judgment, sample, one), allowed, 1);
  return make_judgment(passage, required_logprob(r, ReflectiveToken::Rel, "judgment"),
                       required_logprob(r, ReflectiveToken::NoRel, "judgment"));
}

void Engine::answer(PipelineTrace& trace, const QuerySample& sample) {
  const auto start = Clock::now();
  const Prompt prompt = trace.decision.effective() == ReflectiveToken::NoRet
                            ? build_prompt(PromptStage::AnswerDirect, sample)
                            : build_prompt(PromptStage::AnswerWithPassages, sample, trace.selected);
  const auto r = constrained_generate(backend_, prompt, Vocabulary::base(), std::nullopt);
  trace.answer = std::string(trim(r.text()));
  trace.timings.answer_ms = ms_since(start);
}

void Engine::finish_with_passages(PipelineTrace& trace, const QuerySample& sample, const PipelineConfig& config) {
  if (trace.candidates.empty()) throw PipelineError("sample " + sample.id + ": no candidate passages");

  if (config.rerank == RerankMode::External) {
    if (reranker_ == nullptr) throw ConfigError("external re-ranking requested but no reranker is configured");
    trace.candidates = apply_external_reranker(*reranker_, sample, trace.candidates, config.rerank_failure);
    if (trace.candidates.size() > config.k_p) trace.candidates.resize(config.k_p);
  }

  const auto start = Clock::now();
  switch (config.selection) {
    case PassageSelection::ExternalScorer: {
      if (scorer_ == nullptr) throw ConfigError("external-scorer selection requested but no text scorer is configured");
      auto top = top_by_text_score(*scorer_, sample.question, trace.candidates, config.scorer_top_n);
      for (const auto& [idx, score] : top) trace.selected.push_back(trace.candidates[idx]);
      break;
    }
    case PassageSelection::RandomPerDocument: {
      Rng rng = Rng(config.seed).split(sample.id);
      std::vector<std::string> docs;
      std::map<std::string, std::vector<std::size_t>> members;
      for (std::size_t i = 0; i < trace.candidates.size(); ++i) {
        auto& m = members[trace.candidates[i].doc_id];
        if (m.empty()) docs.push_back(trace.candidates[i].doc_id);
        m.push_back(i);
      }
      std::vector<std::size_t> picked;
      for (const auto& doc : docs) {
        const auto& m = members[doc];
        for (std::size_t k : rng.sample_indices(m.size(), std::min(config.random_per_doc, m.size()))) {
          picked.push_back(m[k]);
        }
      }
      std::sort(picked.begin(), picked.end());
      for (std::size_t i : picked) trace.selected.push_back(trace.candidates[i]);
      break;
    }
    case PassageSelection::Reflective: {
      for (const auto& p : trace.candidates) {
        try {
          trace.judgments.push_back(judge_passage(sample, p));
        } catch (const TransportError& e) {
          trace.failed_judgments.push_back({p, e.what()});
        } catch (const ProtocolViolation& e) {
          trace.failed_judgments.push_back({p, e.what()});
        }
      }
      if (trace.judgments.empty()) {
        throw PipelineError("sample " + sample.id + ": every relevance judgment failed (" +
                            trace.failed_judgments.front().error + ")");
      }
      if (config.rerank == RerankMode::BuiltIn) {
        trace.selected = rank_by_relevance(trace.judgments, config.k_p);
      } else {
        std::vector<std::size_t> rel;
        for (std::size_t i = 0; i < trace.judgments.size(); ++i) {
          if (trace.judgments[i].token == ReflectiveToken::Rel) rel.push_back(i);
        }
        if (config.max_relevant && rel.size() > *config.max_relevant) {
          std::stable_sort(rel.begin(), rel.end(), [&](std::size_t a, std::size_t b) {
            return trace.judgments[a].score > trace.judgments[b].score;
          });
          rel.resize(*config.max_relevant);
          std::sort(rel.begin(), rel.end());
        }
        for (std::size_t i : rel) trace.selected.push_back(trace.judgments[i].passage);
      }
      if (trace.selected.empty()) {
        trace.selected = rank_by_relevance(trace.judgments, 1);
        trace.fallback = true;
      }
      break;
    }
  }
  trace.timings.judgment_ms = ms_since(start);
}

PipelineTrace Engine::run(const QuerySample& sample, const PipelineConfig& config) {
  config.validate();
  PipelineTrace trace;
  trace.sample_id = sample.id;
  auto start = Clock::now();
  trace.decision = decide_retrieval(sample, config.force_decision);
  trace.timings.decision_ms = ms_since(start);

  if (trace.decision.effective() == ReflectiveToken::Ret) {
    if (kb_ == nullptr || index_ == nullptr) throw ConfigError("retrieval needed but no knowledge base/index is loaded");
    if (!sample.image_embedding) throw PipelineError("sample " + sample.id + ": no image embedding to search with");
    start = Clock::now();
    trace.hits = index_->search(*sample.image_embedding, config.top_k_docs);
    trace.candidates = candidate_passages(*kb_, trace.hits, config.top_k_docs);
    trace.timings.retrieval_ms = ms_since(start);
    finish_with_passages(trace, sample, config);
  }
  answer(trace, sample);
  return trace;
}

PipelineTrace Engine::run_oracle(const QuerySample& sample, const std::string& gold_doc_id,
                                 const PipelineConfig& config) {
  config.validate();
  if (kb_ == nullptr) throw ConfigError("oracle mode needs a knowledge base");
  PipelineTrace trace;
  trace.sample_id = sample.id;
  trace.mode = TraceMode::Oracle;
  auto start = Clock::now();
  trace.decision = decide_retrieval(sample, config.force_decision);
  if (!trace.decision.forced) trace.decision.forced = ReflectiveToken::Ret;
  trace.timings.decision_ms = ms_since(start);

  if (trace.decision.effective() == ReflectiveToken::Ret) {
    start = Clock::now();
    trace.candidates = kb_->passages_of(gold_doc_id);
    trace.timings.retrieval_ms = ms_since(start);
    finish_with_passages(trace, sample, config);
  }
  answer(trace, sample);
  return trace;
}

PipelineTrace Engine::probe(const QuerySample& sample, const std::vector<Passage>& passages) {
  PipelineTrace trace;
  trace.sample_id = sample.id;
  trace.mode = TraceMode::Probe;
  auto start = Clock::now();
  trace.decision = decide_retrieval(sample);
  trace.timings.decision_ms = ms_since(start);
  start = Clock::now();
  trace.candidates = passages;
  for (const auto& p : passages) trace.judgments.push_back(judge_passage(sample, p));
  trace.timings.judgment_ms = ms_since(start);
  return trace;
}

std::vector<BatchItem> Engine::run_batch(const std::vector<QuerySample>& samples, const PipelineConfig& config,
                                         int jobs, bool oracle) {
  config.validate();
  std::vector<BatchItem> out(samples.size());
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    auto& item = out[static_cast<std::size_t>(i)];
    try {
      if (oracle) {
        if (!s.gold_doc_id) throw PipelineError("sample " + s.id + ": oracle mode needs a gold document");
        item.trace = run_oracle(s, *s.gold_doc_id, config);
      } else {
        item.trace = run(s, config);
      }
    } catch (const std::exception& e) {
      item.error = e.what();
    }
  }
  return out;
}

}  // namespace reflectiva
