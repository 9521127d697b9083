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

#include "reflectiva/gen_backend.hpp"

#include <algorithm>
#include <cmath>

#include "reflectiva/error.hpp"

namespace reflectiva {

using nlohmann::json;

std::string_view to_string(ReflectiveToken token) noexcept {
  switch (token) {
    case ReflectiveToken::Ret:
      return "<RET>";
    case ReflectiveToken::NoRet:
      return "<NORET>";
    case ReflectiveToken::Rel:
      return "<REL>";
    case ReflectiveToken::NoRel:
      return "<NOREL>";
  }
  return "<RET>";
}

std::optional<ReflectiveToken> parse_reflective_token(std::string_view text) noexcept {
  for (auto t : {ReflectiveToken::Ret, ReflectiveToken::NoRet, ReflectiveToken::Rel, ReflectiveToken::NoRel}) {
    if (text == to_string(t)) return t;
  }
  return std::nullopt;
}

const std::vector<std::string>& required_control_tokens() {
  static const std::vector<std::string> kTokens = {"<RET>", "<NORET>", "<REL>", "<NOREL>",
                                                   std::string(kParagraphOpen), std::string(kParagraphClose)};
  return kTokens;
}

std::string_view to_string(SegmentKind kind) noexcept {
  switch (kind) {
    case SegmentKind::System:
      return "system";
    case SegmentKind::ImageRef:
      return "image_ref";
    case SegmentKind::UserText:
      return "user_text";
    case SegmentKind::ControlToken:
      return "control_token";
    case SegmentKind::PassageBlock:
      return "passage_block";
    case SegmentKind::AssistantStart:
      return "assistant_start";
  }
  return "system";
}

SegmentKind parse_segment_kind(std::string_view text) {
  for (auto k : {SegmentKind::System, SegmentKind::ImageRef, SegmentKind::UserText, SegmentKind::ControlToken,
                 SegmentKind::PassageBlock, SegmentKind::AssistantStart}) {
    if (text == to_string(k)) return k;
  }
  throw ProtocolViolation("unknown segment kind '" + std::string(text) + "'");
}

Vocabulary Vocabulary::of(std::initializer_list<ReflectiveToken> tokens) {
  std::vector<std::string> out;
  for (auto t : tokens) out.emplace_back(to_string(t));
  return Vocabulary(std::move(out));
}

bool Vocabulary::admits(std::string_view token) const {
  if (explicit_) return std::find(tokens_.begin(), tokens_.end(), token) != tokens_.end();
  return !parse_reflective_token(token).has_value();
}

std::string GenerationResult::text() const {
  std::string out;
  for (const auto& t : tokens) out += t;
  return out;
}

std::optional<double> GenerationResult::logprob(std::size_t step, std::string_view token) const {
  if (step >= candidate_logprobs.size()) return std::nullopt;
  const auto& m = candidate_logprobs[step];
  const auto it = m.find(std::string(token));
  if (it == m.end()) return std::nullopt;
  return it->second;
}

GenerationResult constrained_generate(GenerativeBackend& backend, const Prompt& prompt, const Vocabulary& allowed,
                                      std::optional<std::size_t> max_tokens) {
  if (prompt.empty()) throw ValidationError("prompt must not be empty");
  if (max_tokens && *max_tokens == 0) throw ValidationError("max_tokens must be positive");
  if (!allowed.is_base() && allowed.tokens().empty()) throw ValidationError("explicit vocabulary is empty");

  GenerationResult r = backend.generate(prompt, allowed, max_tokens);

  if (max_tokens && r.tokens.size() > *max_tokens) {
    throw ProtocolViolation("backend emitted " + std::to_string(r.tokens.size()) + " tokens, limit is " +
                            std::to_string(*max_tokens));
  }
  if (r.chosen_logprobs.size() != r.tokens.size()) {
    throw ProtocolViolation("chosen_logprobs has " + std::to_string(r.chosen_logprobs.size()) + " entries for " +
                            std::to_string(r.tokens.size()) + " tokens");
  }
  if (!allowed.is_base() && r.tokens.empty()) throw ProtocolViolation("backend emitted no token for a constrained step");
  for (const auto& tok : r.tokens) {
    if (!allowed.admits(tok)) throw ProtocolViolation("backend emitted token '" + tok + "' outside the allowed vocabulary");
  }
  if (!allowed.is_base() && r.candidate_logprobs.size() != r.tokens.size()) {
    throw ProtocolViolation("candidate log-probabilities missing for constrained steps");
  }
  for (std::size_t step = 0; step < r.candidate_logprobs.size(); ++step) {
    const auto& cands = r.candidate_logprobs[step];
    if (cands.empty()) {
      if (allowed.is_base()) continue;
      throw ProtocolViolation("candidate log-probabilities missing at step " + std::to_string(step));
    }
    double mass = 0.0;
    for (const auto& [tok, lp] : cands) {
      if (!allowed.admits(tok)) throw ProtocolViolation("candidate '" + tok + "' lies outside the allowed vocabulary");
      if (std::isnan(lp) || lp > 1e-9) throw ProtocolViolation("candidate '" + tok + "' has invalid log-probability");
      mass += std::exp(lp);
    }
    if (mass > 1.0 + 1e-6) throw ProtocolViolation("candidate probabilities sum above 1 at step " + std::to_string(step));
    if (step < r.tokens.size() && !cands.contains(r.tokens[step])) {
      throw ProtocolViolation("chosen token '" + r.tokens[step] + "' missing from candidates at step " +
                              std::to_string(step));
    }
  }
  return r;
}

void check_control_token_conformance(const GenerativeBackend& backend) {
  const auto declared = backend.control_tokens();
  for (const auto& tok : required_control_tokens()) {
    if (std::find(declared.begin(), declared.end(), tok) == declared.end()) {
      throw ProtocolViolation("backend does not declare control token " + tok);
    }
  }
}

json prompt_to_json(const Prompt& prompt) {
  json segs = json::array();
  for (const auto& s : prompt) segs.push_back({{"kind", to_string(s.kind)}, {"payload", s.payload}});
  return segs;
}

Prompt prompt_from_json(const json& j) {
  Prompt out;
  try {
    for (const auto& s : j) {
      out.push_back({parse_segment_kind(s.at("kind").get<std::string>()), s.at("payload").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ProtocolViolation(std::string("malformed segment list: ") + e.what());
  }
  return out;
}

json generate_request_json(const Prompt& prompt, const Vocabulary& allowed, std::optional<std::size_t> max_tokens) {
  json j;
  j["segments"] = prompt_to_json(prompt);
  j["allowed_tokens"] = allowed.is_base() ? json(nullptr) : json(allowed.tokens());
  j["max_tokens"] = max_tokens ? json(*max_tokens) : json(nullptr);
  return j;
}

GenerationResult parse_generate_response(const json& j) {
  GenerationResult r;
  try {
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.chosen_logprobs = j.at("chosen_logprobs").get<std::vector<double>>();
    if (auto it = j.find("candidates"); it != j.end() && !it->is_null()) {
      for (const auto& step : *it) r.candidate_logprobs.push_back(step.get<std::map<std::string, double>>());
    }
  } catch (const json::exception& e) {
    throw ProtocolViolation(std::string("malformed generate response: ") + e.what());
  }
  return r;
}

json generate_response_json(const GenerationResult& r) {
  json cands = json::array();
  for (const auto& step : r.candidate_logprobs) cands.push_back(step);
  return {{"tokens", r.tokens}, {"chosen_logprobs", r.chosen_logprobs}, {"candidates", std::move(cands)}};
}

}  // namespace reflectiva
