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

// Flat inner-product kernels over a row-major float matrix.
//
// Two implementations share one contract: the `_serial` versions are the reference
// used by the tests, the `_omp` versions are what DenseIndex runs. Both accumulate
// dot products in double and order results by (score desc, row asc), so their
// outputs are identical, not merely close.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace reflectiva::kernels {

struct ScoredRow {
  std::size_t row = 0;
  double score = 0.0;

  bool operator==(const ScoredRow&) const = default;
};

/// Strict "ranks before" relation: higher score first, earlier row on ties.
inline bool ranks_before(const ScoredRow& a, const ScoredRow& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.row < b.row);
}

/// Row-major matrix view: `rows * dim` floats.
struct MatrixView {
  std::span<const float> data;
  std::size_t dim = 0;

  std::size_t rows() const noexcept { return dim ? data.size() / dim : 0; }
  std::span<const float> row(std::size_t r) const noexcept { return data.subspan(r * dim, dim); }
};

double dot(std::span<const float> a, std::span<const float> b) noexcept;

void score_all_serial(MatrixView m, std::span<const float> query, std::span<double> out);
std::vector<ScoredRow> top_k_serial(MatrixView m, std::span<const float> query, std::size_t k);

void score_all_omp(MatrixView m, std::span<const float> query, std::span<double> out);
/// Each thread keeps a bounded heap over its slice of rows; the heaps are merged at the end.
std::vector<ScoredRow> top_k_omp(MatrixView m, std::span<const float> query, std::size_t k);

/// Serial per query, parallel across queries. `queries` holds `nq * m.dim` floats.
std::vector<std::vector<ScoredRow>> top_k_batch_omp(MatrixView m, std::span<const float> queries, std::size_t k);

}  // namespace reflectiva::kernels
