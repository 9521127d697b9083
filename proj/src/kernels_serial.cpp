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

#include <algorithm>

#include "reflectiva/kernels.hpp"

namespace reflectiva::kernels {

double dot(std::span<const float> a, std::span<const float> b) noexcept {
  double acc = 0.0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

void score_all_serial(MatrixView m, std::span<const float> query, std::span<double> out) {
  const std::size_t rows = m.rows();
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot(m.row(r), query);
}

std::vector<ScoredRow> top_k_serial(MatrixView m, std::span<const float> query, std::size_t k) {
  const std::size_t rows = m.rows();
  std::vector<ScoredRow> all(rows);
  for (std::size_t r = 0; r < rows; ++r) all[r] = {r, dot(m.row(r), query)};
  k = std::min(k, rows);
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), ranks_before);
  all.resize(k);
  return all;
}

}  // namespace reflectiva::kernels
