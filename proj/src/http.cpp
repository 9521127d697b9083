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

#include "reflectiva/http.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "reflectiva/error.hpp"

namespace reflectiva {

namespace {

void split_endpoint(const std::string& endpoint, std::string& base, std::string& prefix) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must look like http://host:port: " + endpoint);
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base = endpoint;
    prefix.clear();
  } else {
    base = endpoint.substr(0, path_start);
    prefix = endpoint.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  }
  if (base.rfind("http://", 0) != 0) throw ConfigError("only plain http endpoints are supported: " + endpoint);
}

class InflightSlot {
 public:
  explicit InflightSlot(std::counting_semaphore<4096>& sem) : sem_(sem) { sem_.acquire(); }
  ~InflightSlot() { sem_.release(); }
  InflightSlot(const InflightSlot&) = delete;
  InflightSlot& operator=(const InflightSlot&) = delete;

 private:
  std::counting_semaphore<4096>& sem_;
};

}  // namespace

HttpJsonClient::HttpJsonClient(HttpConfig config) : config_(std::move(config)) {
  split_endpoint(config_.endpoint, base_, prefix_);
  if (config_.max_inflight == 0) throw ConfigError("max_inflight must be positive");
  if (config_.retries < 0) throw ConfigError("retries must be non-negative");
  const auto cap = static_cast<std::ptrdiff_t>(std::min<std::size_t>(config_.max_inflight, 4096));
  inflight_ = std::make_unique<std::counting_semaphore<4096>>(cap);
}

HttpJsonClient::~HttpJsonClient() = default;
HttpJsonClient::HttpJsonClient(HttpJsonClient&&) noexcept = default;
HttpJsonClient& HttpJsonClient::operator=(HttpJsonClient&&) noexcept = default;

nlohmann::json HttpJsonClient::post(std::string_view path, const nlohmann::json& body) {
  const std::string full_path = prefix_ + std::string(path);
  const std::string payload = body.dump();
  int attempts = 0;
  int last_status = 0;
  std::string last_error;
  int delay_ms = config_.backoff_ms;

  InflightSlot slot(*inflight_);
  while (attempts <= config_.retries) {
    ++attempts;
    httplib::Client client(base_);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    auto res = client.Post(full_path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else {
      last_status = res->status;
      if (res->status >= 200 && res->status < 300) {
        try {
          return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
          throw ProtocolViolation("POST " + full_path + ": response is not JSON: " + e.what());
        }
      }
      last_error = "HTTP " + std::to_string(res->status);
      const bool retryable = res->status == 429 || res->status >= 500;
      if (!retryable) break;
    }
    if (attempts <= config_.retries && delay_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
  }
  throw TransportError("POST " + base_ + full_path + " failed: " + last_error, attempts, last_status);
}

}  // namespace reflectiva
