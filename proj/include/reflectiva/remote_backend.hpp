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

#include <string>
#include <vector>

#include "reflectiva/gen_backend.hpp"
#include "reflectiva/http.hpp"

namespace reflectiva {

/// Generative backend served over HTTP (POST {endpoint}/v1/generate). The server is
/// expected to enforce the vocabulary restriction; constrained_generate still checks.
class RemoteBackend final : public GenerativeBackend {
 public:
  explicit RemoteBackend(HttpConfig config, std::vector<std::string> control_tokens = required_control_tokens());

  GenerationResult generate(const Prompt& prompt, const Vocabulary& allowed,
                            std::optional<std::size_t> max_tokens) override;
  std::vector<std::string> control_tokens() const override { return control_tokens_; }

 private:
  HttpJsonClient client_;
  std::vector<std::string> control_tokens_;
};

}  // namespace reflectiva
