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

#include <span>
#include <string>
#include <string_view>

#include "reflectiva/gen_backend.hpp"
#include "reflectiva/kb_store.hpp"
#include "reflectiva/sample.hpp"

namespace reflectiva {

inline constexpr std::string_view kSystemMessage =
    "You are a helpful language and vision assistant. You are able to understand the visual content that the "
    "user provides, and assist the user with a variety of tasks using natural language.";
inline constexpr std::string_view kConsiderParagraph = "Consider this paragraph:";
inline constexpr std::string_view kGiveShortAnswer = "Give a short answer.";
inline constexpr std::string_view kImagePlaceholder = "<image>";

enum class PromptStage { Decision, Judgment, AnswerWithPassages, AnswerDirect };

std::string_view to_string(PromptStage stage) noexcept;

/// Segment layouts:
///   Decision            system | image, question | assistant
///   AnswerDirect        Decision + <NORET>
///   Judgment            Decision + <RET> | "Consider this paragraph:", one passage,
///                       "Give a short answer." | assistant
///   AnswerWithPassages  as Judgment with every supplied passage, in order
/// Judgment takes exactly one passage, AnswerWithPassages at least one, the others
/// none; anything else is a ValidationError.
Prompt build_prompt(PromptStage stage, const QuerySample& sample, std::span<const Passage> passages = {});

/// Llama-3 chat-template text for a segment list. Turns open with
/// `<|start_header_id|>role<|end_header_id|>\n\n` and close with `<|eot_id|>`; parts of
/// a user turn are newline-separated; passages render as
/// `<paragraph>\n{body}\n</paragraph>`. A trailing assistant turn is left open.
std::string render_chat(const Prompt& prompt);

/// Compact JSON of the segment list; the input of the fingerprint.
std::string canonical_serialization(const Prompt& prompt);

/// 16 hex digits of fnv1a64(canonical_serialization(prompt)).
std::string prompt_fingerprint(const Prompt& prompt);

}  // namespace reflectiva
