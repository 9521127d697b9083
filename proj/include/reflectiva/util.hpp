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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace reflectiva {

/// Deterministic, splittable generator (SplitMix64 core). Every random choice in the
/// library flows from one of these so runs are reproducible from a single seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  /// Uniform double in [0, 1).
  double uniform01() noexcept;

  /// Standard normal via Box-Muller.
  double normal() noexcept;

  /// Independent child stream; the parent is not advanced.
  Rng split(std::uint64_t stream) const noexcept;
  Rng split(std::string_view key) const noexcept;

  /// m distinct indices from [0, n), returned in ascending order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t m) noexcept;

 private:
  std::uint64_t state_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t value);

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);

/// L2 norm accumulated in double.
double l2_norm(std::span<const float> v) noexcept;
/// Scales v to unit length; returns the original norm. Leaves zero vectors untouched.
double normalize_in_place(std::span<float> v) noexcept;

std::string read_file(const std::filesystem::path& path);

/// Writes through a temp file in the same directory and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Little-endian f32 encoding used by every `.vec` sidecar.
void append_f32_le(std::string& out, float value);
std::vector<float> decode_f32_le(std::string_view bytes);

/// `kb.jsonl` -> `kb.vec`.
std::filesystem::path sidecar_path(const std::filesystem::path& jsonl_path);

}  // namespace reflectiva
