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

#include "reflectiva/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "reflectiva/data_forge.hpp"
#include "reflectiva/error.hpp"
#include "reflectiva/text.hpp"
#include "reflectiva/util.hpp"

namespace reflectiva {

using nlohmann::json;

int vqa_accuracy(std::string_view pred, const std::vector<std::string>& golds) {
  if (golds.empty()) throw ValidationError("vqa_accuracy needs at least one gold answer");
  const std::string p = normalize_answer(pred);
  for (const auto& g : golds) {
    if (normalize_answer(g) == p) return 1;
  }
  return 0;
}

int relaxed_accuracy(std::string_view pred, const std::vector<std::string>& golds, double rel_tol) {
  if (golds.empty()) throw ValidationError("relaxed_accuracy needs at least one gold answer");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw ConfigError("relative tolerance must lie in (0, 1)");
  const auto p = parse_number(pred);
  std::vector<std::string> textual;
  for (const auto& g : golds) {
    const auto v = parse_number(g);
    if (!v) {
      textual.push_back(g);
      continue;
    }
    if (!p) continue;
    if (*v == 0.0 ? *p == 0.0 : std::fabs(*p - *v) <= rel_tol * std::fabs(*v)) return 1;
  }
  return textual.empty() ? 0 : vqa_accuracy(pred, textual);
}

TokenF1 token_f1_em(std::string_view pred, std::string_view gold) {
  const auto p = answer_tokens(pred);
  const auto g = answer_tokens(gold);
  if (p.empty() && g.empty()) return {1.0, 1};
  if (p.empty() || g.empty()) return {0.0, 0};
  std::unordered_map<std::string, int> counts;
  for (const auto& t : g) ++counts[t];
  std::size_t common = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  TokenF1 out;
  out.em = p == g ? 1 : 0;
  if (common == 0) return out;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  out.f1 = 2.0 * precision * recall / (precision + recall);
  return out;
}

double infoseek_aggregate(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

bool is_numeric_question(const std::vector<std::string>& golds) {
  return std::any_of(golds.begin(), golds.end(), [](const std::string& g) { return parse_number(g).has_value(); });
}

std::string judge_prompt(std::string_view question, std::string_view caption, std::string_view gold,
                         std::string_view pred) {
  std::ostringstream out;
  out << "You are trying to evaluate the alignment between a predicted answer and a ground-truth answer for a "
         "given question-image pair. To do this, consider the context provided by the question itself and the "
         "caption of the query image.\n";
  out << "# Question: " << question << "\n";
  out << "# Image Caption: " << caption << "\n";
  out << "# Ground-truth Answer: " << gold << "\n";
  out << "# Predicted Answer: " << pred << "\n";
  out << "You have to determine the alignment between the predicted answer and the ground-truth on a scale from 0 "
         "to 100, where 0 indicates no alignment and 100 indicates perfect alignment. Your response should be in "
         "JSON format, outputting a list where each element is a dictionary representing a candidate with:\n";
  out << "\"score\": a numeric value between 0 and 100 indicating the alignment level,\n";
  out << "\"reason\": a string explaining the rationale for the given score.";
  return out.str();
}

double RemoteAnswerJudge::score(const QuerySample& sample, std::string_view pred) {
  if (sample.gold_answers.empty()) throw ValidationError("sample " + sample.id + ": no gold answer to judge against");
  const std::string caption = sample.captions.empty() ? std::string{} : sample.captions.front();
  const std::string& gold = sample.gold_answers.front();
  const json req = {{"prompt", judge_prompt(sample.question, caption, gold, pred)},
                    {"question", sample.question},
                    {"caption", caption},
                    {"ground_truth", gold},
                    {"prediction", std::string(pred)}};
  const json reply = client_.post("/v1/judge", req);
  if (!reply.contains("score") || !reply.at("score").is_number()) {
    throw ProtocolViolation("judge response lacks numeric 'score'");
  }
  const double s = reply.at("score").get<double>();
  if (!(s >= 0.0 && s <= 100.0)) throw ProtocolViolation("judge score outside [0, 100]");
  return s / 100.0;
}

TraceStats trace_statistics(const std::vector<PipelineTrace>& traces) {
  TraceStats s;
  s.num_traces = traces.size();
  s.decisions["<RET>"] = 0;
  s.decisions["<NORET>"] = 0;
  std::size_t fallbacks = 0;
  std::size_t selected = 0;
  for (const auto& t : traces) {
    ++s.decisions[std::string(to_string(t.decision.effective()))];
    fallbacks += t.fallback ? 1 : 0;
    selected += t.selected.size();
  }
  if (!traces.empty()) {
    s.fallback_rate = static_cast<double>(fallbacks) / static_cast<double>(traces.size());
    s.mean_selected = static_cast<double>(selected) / static_cast<double>(traces.size());
  }
  return s;
}

namespace {

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double value() const { return n ? sum / static_cast<double>(n) : 0.0; }
  SplitScore split() const { return {value(), n}; }
};

}  // namespace

EvalReport evaluate(const std::vector<PipelineTrace>& traces, const std::vector<QuerySample>& samples,
                    const EvalOptions& options) {
  std::unordered_map<std::string, const PipelineTrace*> by_id;
  for (const auto& t : traces) {
    if (!by_id.emplace(t.sample_id, &t).second) throw ValidationError("two traces for sample " + t.sample_id);
  }
  std::vector<const QuerySample*> ordered;
  std::unordered_map<std::string, bool> known;
  for (const auto& s : samples) {
    ordered.push_back(&s);
    known[s.id] = true;
  }
  for (const auto& t : traces) {
    if (!known.contains(t.sample_id)) throw ValidationError("trace for unknown sample " + t.sample_id);
  }
  std::stable_sort(ordered.begin(), ordered.end(), [](const QuerySample* a, const QuerySample* b) { return a->id < b->id; });

  EvalReport r;
  Mean overall, vqa, relaxed, f1, em;
  std::map<std::string, std::map<std::string, Mean>> per;
  std::vector<PipelineTrace> scored;
  for (const QuerySample* s : ordered) {
    const auto it = by_id.find(s->id);
    if (it == by_id.end()) {
      ++r.num_failed;
      continue;
    }
    if (s->gold_answers.empty()) throw ValidationError("sample " + s->id + ": no gold answers to score against");
    const std::string& pred = it->second->answer;
    const bool numeric = is_numeric_question(s->gold_answers);
    const int str_acc = numeric ? relaxed_accuracy(pred, s->gold_answers, options.rel_tol)
                                : vqa_accuracy(pred, s->gold_answers);
    (numeric ? relaxed : vqa).add(str_acc);
    const double acc = options.judge ? options.judge->score(*s, pred) : static_cast<double>(str_acc);
    overall.add(acc);
    TokenF1 best;
    for (const auto& g : s->gold_answers) {
      const auto x = token_f1_em(pred, g);
      best.f1 = std::max(best.f1, x.f1);
      best.em = std::max(best.em, x.em);
    }
    f1.add(best.f1);
    em.add(best.em);
    auto& d = per[s->dataset];
    d["all"].add(acc);
    if (!s->subset.empty()) d[s->subset].add(acc);
    scored.push_back(*it->second);
  }
  r.num_samples = overall.n;
  r.accuracy = overall.value();
  if (vqa.n) r.metrics.push_back({"vqa_accuracy", vqa.value(), vqa.n});
  if (relaxed.n) r.metrics.push_back({"relaxed_accuracy", relaxed.value(), relaxed.n});
  if (f1.n) r.metrics.push_back({"token_f1", f1.value(), f1.n});
  if (em.n) r.metrics.push_back({"exact_match", em.value(), em.n});

  for (auto& [dataset, m] : per) {
    auto& out = r.splits[dataset];
    if (dataset == kInfoSeek) {
      const bool uq = m.contains("unseen_question");
      const bool ue = m.contains("unseen_entity");
      if (uq) out["unseen_question"] = m["unseen_question"].split();
      if (ue) out["unseen_entity"] = m["unseen_entity"].split();
      out["all"] = m["all"].split();
      if (uq && ue) out["all"].value = infoseek_aggregate(out["unseen_question"].value, out["unseen_entity"].value);
    } else if (dataset == kEncyclopedicVqa) {
      if (m.contains("single_hop")) out["single_hop"] = m["single_hop"].split();
      out["all"] = m["all"].split();
    } else {
      out["all"] = m["all"].split();
    }
  }
  r.trace_stats = trace_statistics(scored);
  return r;
}

json to_json(const EvalReport& r) {
  json metrics = json::array();
  for (const auto& m : r.metrics) metrics.push_back({{"name", m.name}, {"value", m.value}, {"num_samples", m.num_samples}});
  json splits = json::object();
  for (const auto& [dataset, m] : r.splits) {
    for (const auto& [name, s] : m) splits[dataset][name] = {{"value", s.value}, {"num_samples", s.num_samples}};
  }
  return {{"num_samples", r.num_samples},
          {"num_failed", r.num_failed},
          {"accuracy", r.accuracy},
          {"metrics", metrics},
          {"splits", splits},
          {"trace_stats",
           {{"num_traces", r.trace_stats.num_traces},
            {"fallback_rate", r.trace_stats.fallback_rate},
            {"mean_selected", r.trace_stats.mean_selected},
            {"decisions", r.trace_stats.decisions}}}};
}

std::string_view to_string(PassageDifficulty v) noexcept {
  switch (v) {
    case PassageDifficulty::Positive:
      return "positive";
    case PassageDifficulty::Soft:
      return "soft";
    case PassageDifficulty::Hard:
      return "hard";
  }
  return "positive";
}

PassageDifficulty parse_passage_difficulty(std::string_view text) {
  for (auto v : {PassageDifficulty::Positive, PassageDifficulty::Soft, PassageDifficulty::Hard}) {
    if (to_string(v) == text) return v;
  }
  throw ParseError("unknown passage difficulty '" + std::string(text) + "'", 0);
}

json to_json(const TokenExpectation& e) {
  json passages = json::array();
  for (const auto& p : e.passages) {
    passages.push_back({{"doc_id", p.passage.doc_id},
                        {"section_index", p.passage.section_index},
                        {"difficulty", to_string(p.difficulty)}});
  }
  return {{"sample_id", e.sample_id}, {"dataset", e.dataset}, {"decision", to_string(e.decision)}, {"passages", passages}};
}

TokenExpectation token_expectation_from_json(const json& j) {
  TokenExpectation e;
  try {
    e.sample_id = j.at("sample_id").get<std::string>();
    e.dataset = j.value("dataset", std::string{});
    const auto d = parse_reflective_token(j.at("decision").get<std::string>());
    if (!d || (*d != ReflectiveToken::Ret && *d != ReflectiveToken::NoRet)) {
      throw ParseError("expected decision must be <RET> or <NORET>", 0);
    }
    e.decision = *d;
    for (const auto& p : j.value("passages", json::array())) {
      e.passages.push_back({Passage{p.at("doc_id").get<std::string>(), p.at("section_index").get<std::size_t>(), {}},
                            parse_passage_difficulty(p.at("difficulty").get<std::string>())});
    }
  } catch (const json::exception& ex) {
    throw ParseError(std::string("bad token expectation: ") + ex.what(), 0);
  }
  return e;
}

namespace {

json block_json(const TokenAccuracyBlock& b) {
  const auto c = [](const ClassAccuracy& a) {
    return json{{"accuracy", a.accuracy()}, {"correct", a.correct}, {"total", a.total}};
  };
  return {{"RET", c(b.ret)},
          {"NORET", c(b.noret)},
          {"REL_pos", c(b.rel_pos)},
          {"NOREL_soft", c(b.norel_soft)},
          {"NOREL_hard", c(b.norel_hard)}};
}

void tally(ClassAccuracy& a, bool ok) {
  ++a.total;
  a.correct += ok ? 1 : 0;
}

}  // namespace

json to_json(const TokenAccuracyReport& r) {
  json by = json::object();
  for (const auto& [d, b] : r.by_dataset) by[d] = block_json(b);
  return {{"overall", block_json(r.overall)}, {"by_dataset", by}};
}

TokenAccuracyReport token_accuracy(const std::vector<PipelineTrace>& traces,
                                   const std::vector<TokenExpectation>& expectations) {
  std::unordered_map<std::string, const PipelineTrace*> by_id;
  for (const auto& t : traces) by_id.emplace(t.sample_id, &t);
  TokenAccuracyReport r;
  for (const auto& e : expectations) {
    const auto it = by_id.find(e.sample_id);
    if (it == by_id.end()) throw ValidationError("no trace for expectation " + e.sample_id);
    const PipelineTrace& t = *it->second;
    auto& ds = r.by_dataset[e.dataset];
    const bool ok = t.decision.token == e.decision;
    for (auto* b : {&r.overall, &ds}) tally(e.decision == ReflectiveToken::Ret ? b->ret : b->noret, ok);
    for (const auto& probe : e.passages) {
      const auto j = std::find_if(t.judgments.begin(), t.judgments.end(), [&](const RelevanceJudgment& x) {
        return x.passage.doc_id == probe.passage.doc_id && x.passage.section_index == probe.passage.section_index;
      });
      if (j == t.judgments.end()) {
        throw ValidationError("trace " + e.sample_id + " has no judgment for " + probe.passage.doc_id + "#" +
                              std::to_string(probe.passage.section_index));
      }
      for (auto* b : {&r.overall, &ds}) {
        switch (probe.difficulty) {
          case PassageDifficulty::Positive:
            tally(b->rel_pos, j->token == ReflectiveToken::Rel);
            break;
          case PassageDifficulty::Soft:
            tally(b->norel_soft, j->token == ReflectiveToken::NoRel);
            break;
          case PassageDifficulty::Hard:
            tally(b->norel_hard, j->token == ReflectiveToken::NoRel);
            break;
        }
      }
    }
  }
  for (const auto& t : traces) {
    const bool expected = std::any_of(expectations.begin(), expectations.end(),
                                      [&](const TokenExpectation& e) { return e.sample_id == t.sample_id; });
    if (!expected) throw ValidationError("trace " + t.sample_id + " has no expectation");
  }
  return r;
}

std::vector<TokenExpectation> build_token_suite(const KnowledgeBase& kb, const DenseIndex& index,
                                                const std::vector<QuerySample>& samples, std::uint64_t seed) {
  HeuristicAnnotator heuristic;
  std::vector<TokenExpectation> out;
  for (const auto& s : samples) {
    TokenExpectation e;
    e.sample_id = s.id;
    e.dataset = s.dataset;
    if (!s.gold_doc_id || kb.find(*s.gold_doc_id) == nullptr) {
      e.decision = ReflectiveToken::NoRet;
      out.push_back(std::move(e));
      continue;
    }
    e.decision = ReflectiveToken::Ret;
    Rng rng = Rng(seed).split(s.id);
    const auto passages = kb.passages_of(*s.gold_doc_id);
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < passages.size(); ++i) {
      (heuristic.is_positive(s, passages[i]) ? pos : neg).push_back(i);
    }
    if (!pos.empty()) e.passages.push_back({passages[pos.front()], PassageDifficulty::Positive});
    if (!neg.empty()) e.passages.push_back({passages[neg[rng.uniform_index(neg.size())]], PassageDifficulty::Hard});
    if (s.image_embedding) {
      for (const auto& h : index.search(*s.image_embedding, std::min(kSoftNegativeSearchLimit, index.size()))) {
        if (h.doc_id == *s.gold_doc_id) continue;
        const auto other = kb.passages_of(h.doc_id);
        if (other.empty()) continue;
        e.passages.push_back({other[rng.uniform_index(other.size())], PassageDifficulty::Soft});
        break;
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string_view to_string(AblationVariant v) noexcept {
  switch (v) {
    case AblationVariant::Full:
      return "full";
    case AblationVariant::AlwaysRet:
      return "always_ret";
    case AblationVariant::ExternalScorerPassages:
      return "external_scorer_passages";
    case AblationVariant::RandomPassagesNoRel:
      return "random_passages";
    case AblationVariant::NoKB:
      return "no_kb";
  }
  return "full";
}

const std::vector<AblationVariant>& all_ablation_variants() {
  static const std::vector<AblationVariant> kAll = {AblationVariant::Full, AblationVariant::AlwaysRet,
                                                    AblationVariant::ExternalScorerPassages,
                                                    AblationVariant::RandomPassagesNoRel, AblationVariant::NoKB};
  return kAll;
}

AblationVariant parse_ablation_variant(std::string_view text) {
  for (auto v : all_ablation_variants()) {
    if (to_string(v) == text) return v;
  }
  throw ConfigError("unknown ablation variant '" + std::string(text) + "'");
}

PipelineConfig variant_config(AblationVariant v, const PipelineConfig& base) {
  PipelineConfig c = base;
  switch (v) {
    case AblationVariant::Full:
      break;
    case AblationVariant::AlwaysRet:
      c.force_decision = ForceDecision::AlwaysRet;
      break;
    case AblationVariant::ExternalScorerPassages:
      c.selection = PassageSelection::ExternalScorer;
      c.scorer_top_n = 2;
      break;
    case AblationVariant::RandomPassagesNoRel:
      c.selection = PassageSelection::RandomPerDocument;
      c.random_per_doc = 2;
      c.top_k_docs = 5;
      break;
    case AblationVariant::NoKB:
      c.force_decision = ForceDecision::AlwaysNoRet;
      break;
  }
  return c;
}

std::vector<PipelineTrace> successful_traces(const std::vector<BatchItem>& items,
                                             const std::vector<QuerySample>& samples,
                                             std::vector<std::pair<std::string, std::string>>* failures) {
  std::vector<PipelineTrace> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].trace) {
      out.push_back(*items[i].trace);
    } else if (failures != nullptr) {
      failures->emplace_back(samples.at(i).id, items[i].error);
    }
  }
  return out;
}

AblationResult run_ablation(Engine& engine, const std::vector<QuerySample>& samples, const PipelineConfig& base,
                            const std::vector<AblationVariant>& variants, const EvalOptions& options, int jobs) {
  for (auto v : variants) {
    if (v == AblationVariant::ExternalScorerPassages && engine.text_scorer() == nullptr) {
      throw ConfigError("variant external_scorer_passages needs a text scorer");
    }
    if (v != AblationVariant::NoKB && (engine.kb() == nullptr || engine.index() == nullptr)) {
      throw ConfigError("variant " + std::string(to_string(v)) + " needs a knowledge base and index");
    }
  }
  AblationResult out;
  for (auto v : variants) {
    const auto items = engine.run_batch(samples, variant_config(v, base), jobs);
    out.reports.emplace_back(v, evaluate(successful_traces(items, samples), samples, options));
  }
  const auto full = std::find_if(out.reports.begin(), out.reports.end(),
                                 [](const auto& p) { return p.first == AblationVariant::Full; });
  if (full != out.reports.end()) {
    for (const auto& [v, rep] : out.reports) out.deltas[std::string(to_string(v))] = rep.accuracy - full->second.accuracy;
  }
  return out;
}

json to_json(const AblationResult& r) {
  json variants = json::object();
  for (const auto& [v, rep] : r.reports) variants[std::string(to_string(v))] = to_json(rep);
  return {{"variants", variants}, {"deltas", r.deltas}};
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v * 100.0);
  return buf;
}

std::string cell(const EvalReport& r, std::string_view dataset, std::string_view split) {
  const auto d = r.splits.find(std::string(dataset));
  if (d == r.splits.end()) return "-";
  const auto s = d->second.find(std::string(split));
  return s == d->second.end() ? "-" : pct(s->second.value);
}

}  // namespace

std::string ablation_csv(const AblationResult& result, const PipelineConfig& base) {
  std::string out = "variant,k,evqa_single_hop,evqa_all,infoseek_unseen_q,infoseek_unseen_e,infoseek_all,accuracy\n";
  for (const auto& [v, r] : result.reports) {
    const auto c = variant_config(v, base);
    out += std::string(to_string(v)) + "," +
           (c.force_decision == ForceDecision::AlwaysNoRet ? std::string("-") : std::to_string(c.top_k_docs)) + "," +
           cell(r, kEncyclopedicVqa, "single_hop") + "," + cell(r, kEncyclopedicVqa, "all") + "," +
           cell(r, kInfoSeek, "unseen_question") + "," + cell(r, kInfoSeek, "unseen_entity") + "," +
           cell(r, kInfoSeek, "all") + "," + pct(r.accuracy) + "\n";
  }
  return out;
}

SweepResult rerank_sweep(Engine& engine, const std::vector<QuerySample>& samples, const PipelineConfig& base,
                         const std::vector<std::size_t>& ks, const std::vector<std::size_t>& kps, RerankMode mode,
                         const EvalOptions& options, int jobs) {
  if (ks.empty() || kps.empty()) throw ConfigError("sweep needs at least one k and one k_p");
  if (mode == RerankMode::None) throw ConfigError("sweep needs a re-ranking mode");
  if (mode == RerankMode::External && engine.reranker() == nullptr) {
    throw ConfigError("external sweep needs a reranker");
  }
  SweepResult out;
  out.mode = mode;
  out.ks = ks;
  out.kps = kps;
  for (std::size_t k : ks) {
    for (std::size_t kp : kps) {
      PipelineConfig c = base;
      c.top_k_docs = k;
      c.rerank = mode;
      c.k_p = kp;
      const auto items = engine.run_batch(samples, c, jobs);
      const auto rep = evaluate(successful_traces(items, samples), samples, options);
      out.cells.push_back({k, kp, rep.accuracy, rep.num_samples, rep.num_failed});
    }
  }
  return out;
}

json to_json(const SweepResult& r) {
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({{"k", c.k},
                     {"k_p", c.k_p},
                     {"accuracy", c.accuracy},
                     {"num_samples", c.num_samples},
                     {"num_failed", c.num_failed}});
  }
  return {{"mode", to_string(r.mode)}, {"ks", r.ks}, {"kps", r.kps}, {"cells", cells}};
}

std::string sweep_csv(const SweepResult& r) {
  std::string out = "k";
  for (std::size_t kp : r.kps) out += ",k_p=" + std::to_string(kp);
  out += "\n";
  std::size_t i = 0;
  for (std::size_t k : r.ks) {
    out += std::to_string(k);
    for (std::size_t j = 0; j < r.kps.size(); ++j) out += "," + pct(r.cells[i++].accuracy);
    out += "\n";
  }
  return out;
}

}  // namespace reflectiva
