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

#include "reflectiva/mock_backend.hpp"

#include <algorithm>

#include "reflectiva/error.hpp"
#include "reflectiva/prompt.hpp"
#include "reflectiva/util.hpp"

namespace reflectiva {

using nlohmann::json;

std::string_view to_string(CallKind kind) noexcept {
  switch (kind) {
    case CallKind::Decision:
      return "decision";
    case CallKind::Judgment:
      return "judgment";
    case CallKind::Answer:
      return "answer";
    case CallKind::Other:
      return "other";
  }
  return "other";
}

CallKind parse_call_kind(std::string_view text) {
  for (auto k : {CallKind::Decision, CallKind::Judgment, CallKind::Answer, CallKind::Other}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown call kind '" + std::string(text) + "'");
}

namespace {

bool same_set(const std::vector<std::string>& tokens, ReflectiveToken a, ReflectiveToken b) {
  return tokens.size() == 2 && std::is_permutation(tokens.begin(), tokens.end(),
                                                   std::array<std::string, 2>{std::string(to_string(a)),
                                                                              std::string(to_string(b))}
                                                       .begin());
}

}  // namespace

PromptView describe_prompt(const Prompt& prompt, const Vocabulary& allowed) {
  PromptView v;
  v.fingerprint = prompt_fingerprint(prompt);
  if (allowed.is_base()) {
    v.kind = CallKind::Answer;
  } else if (same_set(allowed.tokens(), ReflectiveToken::Ret, ReflectiveToken::NoRet)) {
    v.kind = CallKind::Decision;
  } else if (same_set(allowed.tokens(), ReflectiveToken::Rel, ReflectiveToken::NoRel)) {
    v.kind = CallKind::Judgment;
  }
  bool after_image = false;
  bool have_question = false;
  for (const auto& seg : prompt) {
    switch (seg.kind) {
      case SegmentKind::ImageRef:
        v.image_ref = seg.payload;
        after_image = true;
        break;
      case SegmentKind::UserText:
        if (after_image && !have_question) {
          v.question = seg.payload;
          have_question = true;
        }
        after_image = false;
        break;
      case SegmentKind::PassageBlock:
        v.passages.push_back(seg.payload);
        break;
      case SegmentKind::ControlToken:
        v.prefilled = parse_reflective_token(seg.payload);
        break;
      default:
        after_image = false;
        break;
    }
  }
  return v;
}

bool ScriptMatcher::matches(const PromptView& v) const {
  if (fingerprint && *fingerprint != v.fingerprint) return false;
  if (kind && *kind != v.kind) return false;
  if (question && *question != v.question) return false;
  if (passage_count && *passage_count != v.passages.size()) return false;
  if (prefilled && prefilled != v.prefilled) return false;
  if (passage_contains) {
    const bool any = std::any_of(v.passages.begin(), v.passages.end(),
                                 [&](const std::string& p) { return p.find(*passage_contains) != std::string::npos; });
    if (!any) return false;
  }
  if (predicate && !predicate(v)) return false;
  return true;
}

ScriptMatcher ScriptMatcher::from_json(const json& j) {
  ScriptMatcher m;
  if (j.contains("fingerprint")) m.fingerprint = j.at("fingerprint").get<std::string>();
  if (j.contains("stage")) m.kind = parse_call_kind(j.at("stage").get<std::string>());
  if (j.contains("question")) m.question = j.at("question").get<std::string>();
  if (j.contains("passage_contains")) m.passage_contains = j.at("passage_contains").get<std::string>();
  if (j.contains("passage_count")) m.passage_count = j.at("passage_count").get<std::size_t>();
  if (j.contains("prefilled")) {
    const auto text = j.at("prefilled").get<std::string>();
    m.prefilled = parse_reflective_token(text);
    if (!m.prefilled) throw ConfigError("matcher prefilled must be a reflective token, got " + text);
  }
  return m;
}

json ScriptMatcher::to_json() const {
  json j = json::object();
  if (fingerprint) j["fingerprint"] = *fingerprint;
  if (kind) j["stage"] = reflectiva::to_string(*kind);
  if (question) j["question"] = *question;
  if (passage_contains) j["passage_contains"] = *passage_contains;
  if (passage_count) j["passage_count"] = *passage_count;
  if (prefilled) j["prefilled"] = reflectiva::to_string(*prefilled);
  return j;
}

ScriptedResponse ScriptedResponse::text(std::vector<std::string> tokens) {
  ScriptedResponse r;
  for (auto& t : tokens) r.steps.push_back({std::move(t), {}, 0.0});
  return r;
}

ScriptedResponse ScriptedResponse::binary(ReflectiveToken a, double logp_a, ReflectiveToken b, double logp_b) {
  ScriptStep step;
  step.token = std::string(to_string(logp_b > logp_a ? b : a));
  step.candidates = {{std::string(to_string(a)), logp_a}, {std::string(to_string(b)), logp_b}};
  step.logprob = std::max(logp_a, logp_b);
  return ScriptedResponse{{std::move(step)}};
}

ScriptedResponse ScriptedResponse::from_json(const json& j) {
  ScriptedResponse r;
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  std::vector<std::map<std::string, double>> cands;
  if (j.contains("candidates")) cands = j.at("candidates").get<std::vector<std::map<std::string, double>>>();
  std::vector<double> chosen;
  if (j.contains("chosen_logprobs")) chosen = j.at("chosen_logprobs").get<std::vector<double>>();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    ScriptStep s;
    s.token = tokens[i];
    if (i < cands.size()) s.candidates = cands[i];
    if (i < chosen.size()) {
      s.logprob = chosen[i];
    } else if (auto it = s.candidates.find(s.token); it != s.candidates.end()) {
      s.logprob = it->second;
    }
    r.steps.push_back(std::move(s));
  }
  return r;
}

json ScriptedResponse::to_json() const {
  json tokens = json::array();
  json cands = json::array();
  json chosen = json::array();
  bool any_cands = false;
  for (const auto& s : steps) {
    tokens.push_back(s.token);
    cands.push_back(s.candidates);
    chosen.push_back(s.logprob);
    any_cands = any_cands || !s.candidates.empty();
  }
  json j = {{"tokens", tokens}};
  if (any_cands) j["candidates"] = cands;
  j["chosen_logprobs"] = chosen;
  return j;
}

MockBackend::MockBackend() : control_tokens_(required_control_tokens()) {}

void MockBackend::register_script(ScriptMatcher matcher, ScriptedResponse response) {
  const std::size_t idx = scripts_.size();
  if (matcher.question) {
    by_question_[*matcher.question].push_back(idx);
  } else {
    unkeyed_.push_back(idx);
  }
  scripts_.push_back({std::move(matcher), std::move(response)});
}

void MockBackend::load_scripts(const json& j) {
  try {
    if (j.contains("control_tokens")) control_tokens_ = j.at("control_tokens").get<std::vector<std::string>>();
    for (const auto& s : j.at("scripts")) {
      register_script(ScriptMatcher::from_json(s.at("match")), ScriptedResponse::from_json(s.at("response")));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed script file: ") + e.what());
  }
}

void MockBackend::load_scripts(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("script file " + path.string() + " is not JSON: " + e.what());
  }
  load_scripts(j);
}

const MockBackend::Script* MockBackend::find(const PromptView& view) const {
  static const std::vector<std::size_t> kNone;
  const auto it = by_question_.find(view.question);
  const auto& keyed = it == by_question_.end() ? kNone : it->second;
  // Merge the two ascending index lists so registration order decides.
  std::size_t a = 0;
  std::size_t b = 0;
  while (a < keyed.size() || b < unkeyed_.size()) {
    std::size_t idx;
    if (b == unkeyed_.size() || (a < keyed.size() && keyed[a] < unkeyed_[b])) {
      idx = keyed[a++];
    } else {
      idx = unkeyed_[b++];
    }
    if (scripts_[idx].matcher.matches(view)) return &scripts_[idx];
  }
  return nullptr;
}

GenerationResult MockBackend::generate(const Prompt& prompt, const Vocabulary& allowed,
                                       std::optional<std::size_t> max_tokens) {
  const PromptView view = describe_prompt(prompt, allowed);
  calls_[static_cast<std::size_t>(view.kind)].fetch_add(1, std::memory_order_relaxed);

  const Script* script = find(view);
  if (script == nullptr) {
    throw UnscriptedPrompt(view.fingerprint, std::string(to_string(view.kind)) + " call for question \"" +
                                                 view.question + "\" with " + std::to_string(view.passages.size()) +
                                                 " passage(s)");
  }

  GenerationResult r;
  const std::size_t n = max_tokens ? std::min(*max_tokens, script->response.steps.size())
                                   : script->response.steps.size();
  for (std::size_t i = 0; i < n; ++i) {
    const ScriptStep& step = script->response.steps[i];
    r.tokens.push_back(step.token);
    r.chosen_logprobs.push_back(step.logprob);
    if (!step.candidates.empty()) {
      r.candidate_logprobs.push_back(step.candidates);
    } else if (!allowed.is_base()) {
      std::map<std::string, double> c;
      for (const auto& tok : allowed.tokens()) c[tok] = kUnlistedLogprob;
      c[step.token] = step.logprob;
      r.candidate_logprobs.push_back(std::move(c));
    }
  }
  return r;
}

std::size_t MockBackend::calls(CallKind kind) const noexcept {
  return calls_[static_cast<std::size_t>(kind)].load(std::memory_order_relaxed);
}

void MockBackend::reset_counters() noexcept {
  for (auto& c : calls_) c.store(0, std::memory_order_relaxed);
}

}  // namespace reflectiva
