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

#include "reflectiva/error.hpp"
#include "reflectiva/prompt.hpp"
#include "test_support.hpp"

namespace reflectiva {
namespace {

using testing::golden_dir;

QuerySample car() {
  QuerySample s;
  s.id = "car";
  s.image_ref = "img-car";
  s.question = "What color is the car?";
  return s;
}

QuerySample prunus() {
  QuerySample s;
  s.id = "prunus";
  s.image_ref = "img-prunus";
  s.question = "How big can this plant become?";
  return s;
}

Passage prunus_passage() {
  const KnowledgeBase kb = load_kb(testing::data_dir() / "protocol" / "kb.jsonl");
  return kb.passage("d-prunus", 0);
}

Prompt golden_segments(const std::string& name) {
  return prompt_from_json(nlohmann::json::parse(read_file(golden_dir() / (name + ".segments.json"))));
}

TEST(PromptGolden, NoRetListing) {
  const Prompt p = build_prompt(PromptStage::AnswerDirect, car());
  EXPECT_EQ(p, golden_segments("listing_noret"));
  EXPECT_EQ(render_chat(p), read_file(golden_dir() / "listing_noret.chat.txt"));
}

TEST(PromptGolden, RetListing) {
  const Passage passage = prunus_passage();
  const Prompt p = build_prompt(PromptStage::AnswerWithPassages, prunus(), std::span(&passage, 1));
  EXPECT_EQ(p, golden_segments("listing_ret"));
  EXPECT_EQ(render_chat(p), read_file(golden_dir() / "listing_ret.chat.txt"));
}

TEST(BuildPrompt, AnswerWithPassagesLayout) {
  const Passage passage{"d", 0, "body"};
  const Prompt p = build_prompt(PromptStage::AnswerWithPassages, car(), std::span(&passage, 1));
  ASSERT_EQ(p.size(), 9u);
  EXPECT_EQ(p[5], (PromptSegment{SegmentKind::UserText, "Consider this paragraph:"}));
  EXPECT_EQ(p[6], (PromptSegment{SegmentKind::PassageBlock, "body"}));
  EXPECT_EQ(p[7], (PromptSegment{SegmentKind::UserText, "Give a short answer."}));
}

TEST(BuildPrompt, AnswerDirectHasNoParagraphMarkers) {
  const Prompt p = build_prompt(PromptStage::AnswerDirect, car());
  for (const auto& s : p) EXPECT_NE(s.kind, SegmentKind::PassageBlock);
  const std::string text = render_chat(p);
  EXPECT_EQ(text.find("<paragraph>"), std::string::npos);
  EXPECT_EQ(text.find("</paragraph>"), std::string::npos);
}

TEST(BuildPrompt, Arity) {
  const std::vector<Passage> two{{"d", 0, "a"}, {"d", 1, "b"}};
  EXPECT_THROW(build_prompt(PromptStage::Judgment, car(), two), ValidationError);
  EXPECT_THROW(build_prompt(PromptStage::Judgment, car()), ValidationError);
  EXPECT_THROW(build_prompt(PromptStage::AnswerWithPassages, car()), ValidationError);
  EXPECT_THROW(build_prompt(PromptStage::Decision, car(), two), ValidationError);
  EXPECT_THROW(build_prompt(PromptStage::AnswerDirect, car(), two), ValidationError);
}

TEST(BuildPrompt, MultiplePassagesInOrder) {
  const std::vector<Passage> ps{{"d", 0, "a"}, {"d", 1, "b"}, {"e", 0, "c"}};
  const Prompt p = build_prompt(PromptStage::AnswerWithPassages, car(), ps);
  std::vector<std::string> blocks;
  for (const auto& s : p) {
    if (s.kind == SegmentKind::PassageBlock) blocks.push_back(s.payload);
  }
  EXPECT_EQ(blocks, (std::vector<std::string>{"a", "b", "c"}));
  const std::string text = render_chat(p);
  EXPECT_NE(text.find("<paragraph>\na\n</paragraph>\n<paragraph>\nb\n</paragraph>"), std::string::npos);
}

TEST(BuildPrompt, DecisionEndsWithOpenAssistantTurn) {
  const Prompt p = build_prompt(PromptStage::Decision, car());
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p.back().kind, SegmentKind::AssistantStart);
  const std::string text = render_chat(p);
  const std::string tail = "<|start_header_id|>assistant<|end_header_id|>\n\n";
  EXPECT_EQ(text.substr(text.size() - tail.size()), tail);
}

TEST(Fingerprint, StableAndSensitive) {
  const Prompt a = build_prompt(PromptStage::Decision, car());
  EXPECT_EQ(prompt_fingerprint(a), prompt_fingerprint(build_prompt(PromptStage::Decision, car())));
  EXPECT_EQ(prompt_fingerprint(a).size(), 16u);
  QuerySample other = car();
  other.question += " ";
  EXPECT_NE(prompt_fingerprint(a), prompt_fingerprint(build_prompt(PromptStage::Decision, other)));
  EXPECT_EQ(prompt_fingerprint(a), hex64(fnv1a64(canonical_serialization(a))));
}

}  // namespace
}  // namespace reflectiva
