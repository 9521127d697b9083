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

#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "reflectiva/gen_backend.hpp"

namespace reflectiva {

/// What a call is for, read off the vocabulary restriction:
/// {<RET>,<NORET>} is a retrieval decision, {<REL>,<NOREL>} a relevance judgment,
/// the base vocabulary an answer.
enum class CallKind { Decision, Judgment, Answer, Other };

std::string_view to_string(CallKind kind) noexcept;
CallKind parse_call_kind(std::string_view text);

/// Decoded view of a prompt, the thing scripts match against.
struct PromptView {
  std::string fingerprint;
  CallKind kind = CallKind::Other;
  std::string image_ref;
  std::string question;  // the user text right after the image
  std::vector<std::string> passages;
  std::optional<ReflectiveToken> prefilled;  // control token already in the assistant turn
};

PromptView describe_prompt(const Prompt& prompt, const Vocabulary& allowed);

/// Conjunction of the set fields; an empty matcher matches everything.
struct ScriptMatcher {
  std::optional<std::string> fingerprint;
  std::optional<CallKind> kind;
  std::optional<std::string> question;
  std::optional<std::string> passage_contains;  // substring of at least one passage
  std::optional<std::size_t> passage_count;
  std::optional<ReflectiveToken> prefilled;
  std::function<bool(const PromptView&)> predicate;

  bool matches(const PromptView& view) const;

  static ScriptMatcher from_json(const nlohmann::json& j);
  /// `predicate` is not serializable and is dropped.
  nlohmann::json to_json() const;
};

struct ScriptStep {
  std::string token;
  /// Empty: the mock reports `token` at log-prob `logprob` and, under an explicit
  /// vocabulary, every other allowed token at kUnlistedLogprob.
  std::map<std::string, double> candidates;
  double logprob = 0.0;
};

struct ScriptedResponse {
  std::vector<ScriptStep> steps;

  /// Free text, one step per token.
  static ScriptedResponse text(std::vector<std::string> tokens);
  /// One constrained step between two tokens; emits the more likely one, `a` on ties.
  static ScriptedResponse binary(ReflectiveToken a, double logp_a, ReflectiveToken b, double logp_b);

  /// Accepts {"tokens": [...], "candidates": [{tok: lp}...]?, "chosen_logprobs": [...]?}.
  static ScriptedResponse from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

inline constexpr double kUnlistedLogprob = -30.0;

/// Deterministic scripted backend. Scripts are tried in registration order and the
/// first match answers. Registration is not synchronized: finish it before sharing
/// the backend across threads; `generate` itself only reads.
class MockBackend final : public GenerativeBackend {
 public:
  MockBackend();

  void register_script(ScriptMatcher matcher, ScriptedResponse response);

  /// {"control_tokens": [...]?, "scripts": [{"match": {...}, "response": {...}}]}
  void load_scripts(const nlohmann::json& j);
  void load_scripts(const std::filesystem::path& path);
  std::size_t script_count() const noexcept { return scripts_.size(); }

  void set_control_tokens(std::vector<std::string> tokens) { control_tokens_ = std::move(tokens); }

  GenerationResult generate(const Prompt& prompt, const Vocabulary& allowed,
                            std::optional<std::size_t> max_tokens) override;
  std::vector<std::string> control_tokens() const override { return control_tokens_; }

  std::size_t calls(CallKind kind) const noexcept;
  void reset_counters() noexcept;

 private:
  struct Script {
    ScriptMatcher matcher;
    ScriptedResponse response;
  };

  const Script* find(const PromptView& view) const;

  std::vector<Script> scripts_;
  std::vector<std::size_t> unkeyed_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_question_;
  std::vector<std::string> control_tokens_;
  std::array<std::atomic<std::size_t>, 4> calls_{};
};

}  // namespace reflectiva
