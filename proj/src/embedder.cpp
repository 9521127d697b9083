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

#include "reflectiva/embedder.hpp"

#include "reflectiva/error.hpp"
#include "reflectiva/text.hpp"
#include "reflectiva/util.hpp"

namespace reflectiva {

std::vector<float> HashingTextEmbedder::embed(std::string_view text) const {
  std::vector<float> out(dim_, 0.0f);
  const Rng base(seed_);
  for (const auto& token : answer_tokens(text)) {
    Rng r = base.split(token);
    const std::size_t slot = static_cast<std::size_t>(r.uniform_index(dim_));
    out[slot] += (r.next_u64() & 1) ? 1.0f : -1.0f;
  }
  if (normalize_in_place(out) == 0.0) {
    // Empty or fully cancelled text still needs a valid unit vector.
    out[static_cast<std::size_t>(base.split("<empty>").uniform_index(dim_))] = 1.0f;
  }
  return out;
}

RemoteTextEmbedder::RemoteTextEmbedder(HttpConfig config, std::size_t dim) : client_(std::move(config)), dim_(dim) {}

std::vector<float> RemoteTextEmbedder::embed(std::string_view text) const {
  const auto reply = client_.post("/v1/embed", {{"text", std::string(text)}});
  std::vector<float> out;
  try {
    out = reply.at("embedding").get<std::vector<float>>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolViolation(std::string("embed response malformed: ") + e.what());
  }
  if (out.size() != dim_) {
    throw ProtocolViolation("embed response has dimension " + std::to_string(out.size()) + ", expected " +
                            std::to_string(dim_));
  }
  return out;
}

}  // namespace reflectiva
