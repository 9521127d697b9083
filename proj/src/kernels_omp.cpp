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

#include <omp.h>

#include <algorithm>
#include <cstdint>

#include "reflectiva/kernels.hpp"

namespace reflectiva::kernels {

namespace {

// Max-heap on "ranks before": the root is the worst kept row.
class BoundedHeap {
 public:
  explicit BoundedHeap(std::size_t k) : k_(k) { items_.reserve(k); }

  void offer(const ScoredRow& c) {
    if (k_ == 0) return;
    if (items_.size() < k_) {
      items_.push_back(c);
      std::push_heap(items_.begin(), items_.end(), ranks_before);
    } else if (ranks_before(c, items_.front())) {
      std::pop_heap(items_.begin(), items_.end(), ranks_before);
      items_.back() = c;
      std::push_heap(items_.begin(), items_.end(), ranks_before);
    }
  }

  std::vector<ScoredRow>& items() noexcept { return items_; }

 private:
  std::size_t k_;
  std::vector<ScoredRow> items_;
};

}  // namespace

void score_all_omp(MatrixView m, std::span<const float> query, std::span<double> out) {
  const auto rows = static_cast<std::int64_t>(m.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    out[static_cast<std::size_t>(r)] = dot(m.row(static_cast<std::size_t>(r)), query);
  }
}

std::vector<ScoredRow> top_k_omp(MatrixView m, std::span<const float> query, std::size_t k) {
  const std::size_t rows = m.rows();
  k = std::min(k, rows);
  if (k == 0) return {};

  std::vector<std::vector<ScoredRow>> partial;
#pragma omp parallel
  {
#pragma omp single
    partial.resize(static_cast<std::size_t>(omp_get_num_threads()));

    BoundedHeap heap(k);
#pragma omp for schedule(static) nowait
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r) {
      const auto row = static_cast<std::size_t>(r);
      heap.offer({row, dot(m.row(row), query)});
    }
    partial[static_cast<std::size_t>(omp_get_thread_num())] = std::move(heap.items());
  }

  std::vector<ScoredRow> merged;
  merged.reserve(k * partial.size());
  for (auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(k), merged.end(), ranks_before);
  merged.resize(k);
  return merged;
}

std::vector<std::vector<ScoredRow>> top_k_batch_omp(MatrixView m, std::span<const float> queries, std::size_t k) {
  const std::size_t nq = m.dim ? queries.size() / m.dim : 0;
  std::vector<std::vector<ScoredRow>> out(nq);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t q = 0; q < static_cast<std::int64_t>(nq); ++q) {
    const auto qi = static_cast<std::size_t>(q);
    out[qi] = top_k_serial(m, queries.subspan(qi * m.dim, m.dim), k);
  }
  return out;
}

}  // namespace reflectiva::kernels
