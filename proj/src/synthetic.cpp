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

#include "reflectiva/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "reflectiva/error.hpp"
#include "reflectiva/gen_backend.hpp"
#include "reflectiva/util.hpp"

namespace reflectiva {

using nlohmann::json;

namespace {

constexpr const char* kFillerSyllables[] = {"lor", "ven", "tas", "mir", "quo", "del", "pra", "sun", "vel", "cor",
                                            "bel", "nit", "ram", "sol", "fen", "gar", "hul", "ist", "jor", "kep"};
constexpr const char* kNameSyllables[] = {"Ash", "Bram", "Cael", "Dorn", "Eld", "Fyn", "Grem", "Hald",
                                          "Ivo", "Jask", "Kor", "Lund", "Mauv", "Norr", "Ost", "Pell"};
constexpr const char* kColors[] = {"crimson", "violet", "amber", "ivory", "azure", "scarlet", "ochre", "teal"};

std::string pick_word(Rng& r) {
  std::string w;
  const std::size_t n = 2 + r.uniform_index(2);
  for (std::size_t i = 0; i < n; ++i) w += kFillerSyllables[r.uniform_index(std::size(kFillerSyllables))];
  return w;
}

std::string pick_name(Rng& r) {
  std::string w = kNameSyllables[r.uniform_index(std::size(kNameSyllables))];
  std::string tail = kNameSyllables[r.uniform_index(std::size(kNameSyllables))];
  tail[0] = static_cast<char>(tail[0] - 'A' + 'a');
  return w + tail;
}

std::string filler(Rng& r, std::size_t min_words, std::size_t max_words) {
  const std::size_t n = min_words + r.uniform_index(max_words - min_words + 1);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += pick_word(r);
  }
  out += '.';
  return out;
}

std::vector<float> random_unit(Rng& r, std::size_t dim) {
  std::vector<float> v(dim);
  do {
    for (auto& x : v) x = static_cast<float>(r.normal());
  } while (normalize_in_place(v) == 0.0);
  return v;
}

struct Fact {
  std::string question;
  std::string sentence;
  std::string answer;
  std::string wrong;
};

Fact make_fact(Rng& r, const std::string& entity, std::size_t n) {
  const std::string tag = "Q" + std::to_string(n) + ": ";
  switch (r.uniform_index(5)) {
    case 0: {
      const auto y = std::to_string(1500 + r.uniform_index(500));
      return {tag + "In what year was the place in this photo established?", entity + " was founded in " + y + ".", y,
              std::to_string(1400 + r.uniform_index(90))};
    }
    case 1: {
      const auto h = std::to_string(5 + r.uniform_index(90));
      return {tag + "How high can this plant get?", entity + " typically reaches " + h + " metres.", h, "500"};
    }
    case 2: {
      const auto who = pick_name(r) + " " + pick_name(r);
      return {tag + "Who drew up the plans for this building?", "The architect of " + entity + " was " + who + ".", who,
              pick_name(r)};
    }
    case 3: {
      const std::string c = kColors[r.uniform_index(std::size(kColors))];
      return {tag + "What shade are the blossoms of this plant?", "The flowers of " + entity + " are " + c + ".", c,
              "green"};
    }
    default: {
      const auto river = pick_name(r);
      return {tag + "Which waterway passes close to this place?", "The " + river + " river runs beside " + entity + ".",
              river, "none"};
    }
  }
}

json binary_response(ReflectiveToken a, double pa, ReflectiveToken b) {
  const double la = std::log(pa);
  const double lb = std::log1p(-pa);
  const std::string ta(to_string(a));
  const std::string tb(to_string(b));
  return {{"tokens", {la >= lb ? ta : tb}}, {"candidates", {{{ta, la}, {tb, lb}}}}};
}

json text_response(const std::string& text) { return {{"tokens", {text}}}; }

}  // namespace

KnowledgeBase SyntheticWorld::knowledge_base() const { return KnowledgeBase(documents, dim); }

SyntheticWorld make_synthetic_world(const SyntheticConfig& c) {
  if (c.num_docs == 0 || c.dim == 0) throw ConfigError("synthetic world needs documents and a dimension");
  if (c.min_sections == 0 || c.max_sections < c.min_sections) throw ConfigError("bad synthetic section range");
  const Rng root(c.seed);
  SyntheticWorld w;
  w.dim = c.dim;

  Rng docs_rng = root.split("docs");
  for (std::size_t i = 0; i < c.num_docs; ++i) {
    Document d;
    char id[32];
    std::snprintf(id, sizeof id, "doc-%04zu", i);
    d.id = id;
    d.title = pick_name(docs_rng) + " " + pick_name(docs_rng);
    d.summary = docs_rng.uniform01() < 0.1 ? std::string{} : filler(docs_rng, 6, 12);
    const std::size_t n = c.min_sections + docs_rng.uniform_index(c.max_sections - c.min_sections + 1);
    for (std::size_t s = 0; s < n; ++s) {
      d.sections.push_back({"Section " + std::to_string(s + 1), filler(docs_rng, 10, 20)});
    }
    d.image_embedding = random_unit(docs_rng, c.dim);
    w.documents.push_back(std::move(d));
  }

  Rng samples_rng = root.split("samples");
  json scripts = json::array();
  const auto add = [&](json match, json response) {
    scripts.push_back({{"match", std::move(match)}, {"response", std::move(response)}});
  };
  std::size_t next_gold = 0;
  for (std::size_t i = 0; i < c.num_samples; ++i) {
    Rng r = samples_rng.split(i);
    QuerySample s;
    char id[32];
    std::snprintf(id, sizeof id, "s%04zu", i);
    s.id = id;
    s.image_ref = "img-" + s.id;
    s.split = Split::Test;
    SampleFacts f;
    f.sample_id = s.id;
    f.needs_kb = r.uniform01() >= c.noret_fraction;

    if (!f.needs_kb) {
      s.dataset = "gqa";
      const std::string color = kColors[r.uniform_index(std::size(kColors))];
      s.question = "Q" + std::to_string(i) + ": What color is the object on the left?";
      s.gold_answers = {color};
      s.image_embedding = random_unit(r, c.dim);
      f.scripted_ret = r.uniform01() < c.decision_error_fraction;
      f.wrong_answer = color;
      add({{"stage", "decision"}, {"question", s.question}},
          f.scripted_ret ? binary_response(ReflectiveToken::Ret, 0.6, ReflectiveToken::NoRet)
                         : binary_response(ReflectiveToken::Ret, 0.1, ReflectiveToken::NoRet));
      add({{"stage", "answer"}, {"question", s.question}}, text_response(color));
      w.samples.push_back(std::move(s));
      w.facts.push_back(std::move(f));
      continue;
    }

    Document& gold = w.documents[next_gold % w.documents.size()];
    ++next_gold;
    const bool infoseek = i % 2 == 0;
    s.dataset = infoseek ? "infoseek" : "evqa";
    s.subset = infoseek ? (i % 4 == 0 ? "unseen_question" : "unseen_entity") : (i % 5 == 1 ? "two_hop" : "single_hop");
    s.gold_doc_id = gold.id;
    const Fact fact = make_fact(r, gold.title, i);
    s.question = fact.question;
    s.gold_answers = {fact.answer};
    s.captions = {"a photo of " + gold.title};
    const std::size_t ans = r.uniform_index(gold.sections.size());
    gold.sections[ans].body += " " + fact.sentence;
    f.answer_section = ans;
    f.answer_sentence = fact.sentence;
    f.wrong_answer = fact.wrong;

    f.retrieval_miss = r.uniform01() < c.retrieval_miss_fraction;
    if (f.retrieval_miss) {
      s.image_embedding = random_unit(r, c.dim);
    } else {
      std::vector<float> q = *gold.image_embedding;
      const auto noise = random_unit(r, c.dim);
      for (std::size_t k = 0; k < c.dim; ++k) q[k] += static_cast<float>(c.query_noise) * noise[k];
      normalize_in_place(q);
      s.image_embedding = std::move(q);
    }
    f.scripted_ret = r.uniform01() >= c.decision_error_fraction;
    f.answer_judged_rel = r.uniform01() >= c.judgment_miss_fraction;
    for (std::size_t k = 0; k < gold.sections.size(); ++k) {
      double p;
      if (k == ans) {
        p = f.answer_judged_rel ? 0.8 + 0.02 * static_cast<double>(r.uniform_index(10)) : 0.4;
      } else if (r.uniform01() < c.false_rel_fraction) {
        p = 0.55 + 0.01 * static_cast<double>(r.uniform_index(10));
      } else {
        p = 0.05 + 0.03 * static_cast<double>(k);
      }
      f.gold_rel_probs.push_back(p);
    }

    add({{"stage", "decision"}, {"question", s.question}},
        f.scripted_ret ? binary_response(ReflectiveToken::Ret, 0.9, ReflectiveToken::NoRet)
                       : binary_response(ReflectiveToken::Ret, 0.35, ReflectiveToken::NoRet));
    add({{"stage", "judgment"}, {"question", s.question}, {"passage_contains", fact.sentence}},
        binary_response(ReflectiveToken::Rel, f.gold_rel_probs[ans], ReflectiveToken::NoRel));
    w.samples.push_back(std::move(s));
    w.facts.push_back(std::move(f));
  }

  // Gold-page judgment and answer scripts need final section bodies, so they come
  // after every fact has been placed.
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto& s = w.samples[i];
    const auto& f = w.facts[i];
    if (!f.needs_kb) continue;
    const Document* gold = nullptr;
    for (const auto& d : w.documents) {
      if (d.id == *s.gold_doc_id) gold = &d;
    }
    for (std::size_t k = 0; k < gold->sections.size(); ++k) {
      if (k == *f.answer_section) continue;
      add({{"stage", "judgment"}, {"question", s.question}, {"passage_contains", gold->sections[k].body}},
          binary_response(ReflectiveToken::Rel, f.gold_rel_probs[k], ReflectiveToken::NoRel));
    }
    add({{"stage", "answer"}, {"question", s.question}, {"passage_contains", f.answer_sentence}},
        text_response(s.gold_answers.front()));
    add({{"stage", "answer"}, {"question", s.question}}, text_response(f.wrong_answer));
  }
  add({{"stage", "judgment"}}, binary_response(ReflectiveToken::Rel, kUnscriptedRelProb, ReflectiveToken::NoRel));

  w.scripts = {{"scripts", std::move(scripts)}};
  return w;
}

void write_synthetic_world(const SyntheticWorld& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_kb(world.knowledge_base(), dir / "kb.jsonl");
  save_samples(world.samples, dir / "samples.jsonl");
  write_file_atomic(dir / "scripts.json", world.scripts.dump(1) + "\n");
}

}  // namespace reflectiva
