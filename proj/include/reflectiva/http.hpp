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
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include <json.hpp>

namespace reflectiva {

struct HttpConfig {
  std::string endpoint = "http://127.0.0.1:8080";  // scheme://host:port[/prefix]
  int timeout_ms = 30000;
  int retries = 3;        // extra attempts after the first
  int backoff_ms = 100;   // doubled after each failed attempt
  std::size_t max_inflight = 8;
};

/// JSON-over-HTTP POST with an in-flight cap and exponential backoff.
/// Connection failures, 429 and 5xx are retried; other non-2xx fail immediately.
/// Thread-safe: concurrent callers share the in-flight cap.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(HttpConfig config);
  ~HttpJsonClient();
  HttpJsonClient(HttpJsonClient&&) noexcept;
  HttpJsonClient& operator=(HttpJsonClient&&) noexcept;

  /// Throws TransportError when every attempt fails, ProtocolViolation when the body
  /// is not JSON.
  nlohmann::json post(std::string_view path, const nlohmann::json& body);

  const HttpConfig& config() const noexcept { return config_; }

 private:
  HttpConfig config_;
  std::string base_;    // scheme://host:port
  std::string prefix_;  // path prefix without trailing slash
  std::unique_ptr<std::counting_semaphore<4096>> inflight_;
};

}  // namespace reflectiva
