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
#include <stdexcept>
#include <string>

namespace reflectiva {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The backend or service could not be reached. Carries how many attempts were made.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts, int last_status = 0)
      : Error(what + " (attempts=" + std::to_string(attempts) +
              ", last_status=" + std::to_string(last_status) + ")"),
        attempts_(attempts),
        last_status_(last_status) {}
  int attempts() const noexcept { return attempts_; }
  int last_status() const noexcept { return last_status_; }

 private:
  int attempts_;
  int last_status_;
};

/// A backend or service answered with something the protocol forbids.
class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

/// The mock backend received a prompt no script matches.
class UnscriptedPrompt : public Error {
 public:
  UnscriptedPrompt(const std::string& fingerprint, const std::string& detail)
      : Error("unscripted prompt (fingerprint " + fingerprint + "): " + detail),
        fingerprint_(fingerprint) {}
  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::string fingerprint_;
};

class PipelineError : public Error {
 public:
  using Error::Error;
};

}  // namespace reflectiva
