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

#include "reflectiva/prompt.hpp"

#include "reflectiva/error.hpp"
#include "reflectiva/util.hpp"

namespace reflectiva {

std::string_view to_string(PromptStage stage) noexcept {
  switch (stage) {
    case PromptStage::Decision:
      return "decision";
    case PromptStage::Judgment:
      return "judgment";
    case PromptStage::AnswerWithPassages:
      return "answer_with_passages";
    case PromptStage::AnswerDirect:
      return "answer_direct";
  }
  return "decision";
}

Prompt build_prompt(PromptStage stage, const QuerySample& sample, std::span<const Passage> passages) {
  switch (stage) {
    case PromptStage::Decision:
    case PromptStage::AnswerDirect:
      if (!passages.empty()) {
        throw ValidationError(std::string(to_string(stage)) + " prompt takes no passages");
      }
      break;
    case PromptStage::Judgment:
      if (passages.size() != 1) {
        throw ValidationError("judgment prompt takes exactly one passage, got " + std::to_string(passages.size()));
      }
      break;
    case PromptStage::AnswerWithPassages:
      if (passages.empty()) throw ValidationError("answer_with_passages prompt needs at least one passage");
      break;
  }

  Prompt p;
  p.push_back({SegmentKind::System, std::string(kSystemMessage)});
  p.push_back({SegmentKind::ImageRef, sample.image_ref});
  p.push_back({SegmentKind::UserText, sample.question});
  p.push_back({SegmentKind::AssistantStart, ""});
  if (stage == PromptStage::Decision) return p;
  if (stage == PromptStage::AnswerDirect) {
    p.push_back({SegmentKind::ControlToken, std::string(to_string(ReflectiveToken::NoRet))});
    return p;
  }
  p.push_back({SegmentKind::ControlToken, std::string(to_string(ReflectiveToken::Ret))});
  p.push_back({SegmentKind::UserText, std::string(kConsiderParagraph)});
  for (const auto& passage : passages) p.push_back({SegmentKind::PassageBlock, passage.text});
  p.push_back({SegmentKind::UserText, std::string(kGiveShortAnswer)});
  p.push_back({SegmentKind::AssistantStart, ""});
  return p;
}

std::string render_chat(const Prompt& prompt) {
  enum class Role { None, System, User, Assistant };
  Role role = Role::None;
  bool fresh_turn = false;  // nothing written in the current turn yet
  std::string out = "<|begin_of_text|>";

  const auto open = [&](Role r, std::string_view name) {
    if (role != Role::None) out += "<|eot_id|>";
    out += "<|start_header_id|>";
    out += name;
    out += "<|end_header_id|>\n\n";
    role = r;
    fresh_turn = true;
  };
  const auto user_part = [&](std::string_view text) {
    if (role != Role::User) open(Role::User, "user");
    if (!fresh_turn) out.push_back('\n');
    out += text;
    fresh_turn = false;
  };

  for (const auto& seg : prompt) {
    switch (seg.kind) {
      case SegmentKind::System:
        open(Role::System, "system");
        out += seg.payload;
        fresh_turn = false;
        break;
      case SegmentKind::ImageRef:
        user_part(kImagePlaceholder);
        break;
      case SegmentKind::UserText:
        user_part(seg.payload);
        break;
      case SegmentKind::PassageBlock: {
        std::string block(kParagraphOpen);
        block += "\n";
        block += seg.payload;
        block += "\n";
        block += kParagraphClose;
        user_part(block);
        break;
      }
      case SegmentKind::AssistantStart:
        open(Role::Assistant, "assistant");
        break;
      case SegmentKind::ControlToken:
        if (role != Role::Assistant) open(Role::Assistant, "assistant");
        out += seg.payload;
        fresh_turn = false;
        break;
    }
  }
  if (role != Role::Assistant && role != Role::None) out += "<|eot_id|>";
  return out;
}

std::string canonical_serialization(const Prompt& prompt) { return prompt_to_json(prompt).dump(); }

std::string prompt_fingerprint(const Prompt& prompt) { return hex64(fnv1a64(canonical_serialization(prompt))); }

}  // namespace reflectiva
