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

// Generative backend contract.
//
// The multimodal model is treated as a service that, given a prompt (a list of typed
// segments) and a vocabulary restriction, emits tokens with log-probabilities. Control
// decisions are single constrained steps whose per-candidate log-probabilities are
// returned; free-form answers are decoded by the backend over the base vocabulary.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace reflectiva {

enum class ReflectiveToken { Ret, NoRet, Rel, NoRel };

/// "<RET>", "<NORET>", "<REL>", "<NOREL>".
std::string_view to_string(ReflectiveToken token) noexcept;
std::optional<ReflectiveToken> parse_reflective_token(std::string_view text) noexcept;

inline constexpr std::string_view kParagraphOpen = "<paragraph>";
inline constexpr std::string_view kParagraphClose = "</paragraph>";

/// Control tokens every backend must declare: the four reflective tokens and the
/// paragraph markers.
const std::vector<std::string>& required_control_tokens();

enum class SegmentKind { System, ImageRef, UserText, ControlToken, PassageBlock, AssistantStart };

std::string_view to_string(SegmentKind kind) noexcept;
SegmentKind parse_segment_kind(std::string_view text);

/// ImageRef carries an opaque image id, ControlToken a reflective token string,
/// PassageBlock the passage body (markers are added at render time).
struct PromptSegment {
  SegmentKind kind;
  std::string payload;

  bool operator==(const PromptSegment&) const = default;
};

using Prompt = std::vector<PromptSegment>;

/// Either the base vocabulary V0 (every token except the reflective ones) or an
/// explicit token set.
class Vocabulary {
 public:
  static Vocabulary base() { return Vocabulary(); }
  static Vocabulary of(std::vector<std::string> tokens) { return Vocabulary(std::move(tokens)); }
  static Vocabulary of(std::initializer_list<ReflectiveToken> tokens);

  bool is_base() const noexcept { return !explicit_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  bool admits(std::string_view token) const;

 private:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens) : explicit_(true), tokens_(std::move(tokens)) {}

  bool explicit_ = false;
  std::vector<std::string> tokens_;
};

struct GenerationResult {
  std::vector<std::string> tokens;
  std::vector<double> chosen_logprobs;
  /// Per step, token -> log-probability over the allowed set. Populated for every step
  /// under an explicit vocabulary; may be empty under the base vocabulary.
  std::vector<std::map<std::string, double>> candidate_logprobs;

  /// Concatenated tokens.
  std::string text() const;
  /// Log-probability of `token` at `step`, or nullopt when not listed.
  std::optional<double> logprob(std::size_t step, std::string_view token) const;

  bool operator==(const GenerationResult&) const = default;
};

/// Implementations must be callable from several threads at once.
class GenerativeBackend {
 public:
  virtual ~GenerativeBackend() = default;

  /// Raw generation; callers go through constrained_generate, which validates.
  virtual GenerationResult generate(const Prompt& prompt, const Vocabulary& allowed,
                                    std::optional<std::size_t> max_tokens) = 0;

  /// Control tokens this backend's vocabulary understands.
  virtual std::vector<std::string> control_tokens() const = 0;
};

/// Runs one generation and enforces the contract: every emitted token admitted by
/// `allowed`, at most `max_tokens` steps, candidates listed for each explicit step with
/// the chosen token among them and total probability <= 1 + 1e-6. Any breach raises
/// ProtocolViolation.
GenerationResult constrained_generate(GenerativeBackend& backend, const Prompt& prompt, const Vocabulary& allowed,
                                      std::optional<std::size_t> max_tokens);

/// Throws ProtocolViolation naming the first required control token the backend lacks.
void check_control_token_conformance(const GenerativeBackend& backend);

// Wire format for POST /v1/generate.
nlohmann::json generate_request_json(const Prompt& prompt, const Vocabulary& allowed,
                                     std::optional<std::size_t> max_tokens);
/// Throws ProtocolViolation on shape errors.
GenerationResult parse_generate_response(const nlohmann::json& j);
nlohmann::json generate_response_json(const GenerationResult& result);

nlohmann::json prompt_to_json(const Prompt& prompt);
Prompt prompt_from_json(const nlohmann::json& j);

}  // namespace reflectiva
