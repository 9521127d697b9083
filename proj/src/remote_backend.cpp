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

#include "reflectiva/remote_backend.hpp"

namespace reflectiva {

RemoteBackend::RemoteBackend(HttpConfig config, std::vector<std::string> control_tokens)
    : client_(std::move(config)), control_tokens_(std::move(control_tokens)) {}

GenerationResult RemoteBackend::generate(const Prompt& prompt, const Vocabulary& allowed,
                                         std::optional<std::size_t> max_tokens) {
  return parse_generate_response(client_.post("/v1/generate", generate_request_json(prompt, allowed, max_tokens)));
}

}  // namespace reflectiva
