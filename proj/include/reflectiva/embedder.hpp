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

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "reflectiva/http.hpp"

namespace reflectiva {

/// Maps text into the retrieval embedding space. Implementations must be thread-safe.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<float> embed(std::string_view text) const = 0;
};

/// Offline, deterministic feature-hashing embedder over normalized word tokens.
/// Not semantically meaningful; it exists so textual indexing runs without a model.
class HashingTextEmbedder final : public TextEmbedder {
 public:
  explicit HashingTextEmbedder(std::size_t dim, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}
  std::size_t dim() const override { return dim_; }
  std::vector<float> embed(std::string_view text) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// POST {endpoint}/v1/embed  {"text": str}  ->  {"embedding": [f32...]}
class RemoteTextEmbedder final : public TextEmbedder {
 public:
  RemoteTextEmbedder(HttpConfig config, std::size_t dim);
  std::size_t dim() const override { return dim_; }
  std::vector<float> embed(std::string_view text) const override;

 private:
  mutable HttpJsonClient client_;
  std::size_t dim_;
};

}  // namespace reflectiva
