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


// Flat top-k search: serial reference kernel vs the OpenMP kernel.
//   bench_search [--benchmark_filter=...]

#include <benchmark/benchmark.h>

#include <vector>

#include "reflectiva/kernels.hpp"
#include "reflectiva/util.hpp"

namespace {

using reflectiva::kernels::MatrixView;

struct Fixture {
  std::vector<float> data;
  std::vector<float> query;
  std::size_t dim;
};

Fixture make_fixture(std::size_t rows, std::size_t dim) {
  reflectiva::Rng rng(17);
  Fixture f{std::vector<float>(rows * dim), std::vector<float>(dim), dim};
  for (auto& x : f.data) x = static_cast<float>(rng.normal());
  for (auto& x : f.query) x = static_cast<float>(rng.normal());
  return f;
}

template <auto Kernel>
void BM_TopK(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const Fixture f = make_fixture(rows, dim);
  const MatrixView m{f.data, f.dim};
  for (auto _ : state) {
    benchmark::DoNotOptimize(Kernel(m, f.query, 10));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows));
}

void Sizes(benchmark::internal::Benchmark* b) {
  for (long rows : {1000L, 10000L, 100000L}) {
    for (long dim : {32L, 256L, 768L}) b->Args({rows, dim});
  }
}

BENCHMARK_TEMPLATE(BM_TopK, reflectiva::kernels::top_k_serial)->Apply(Sizes)->Name("top_k_serial");
BENCHMARK_TEMPLATE(BM_TopK, reflectiva::kernels::top_k_omp)->Apply(Sizes)->Name("top_k_omp");

}  // namespace

BENCHMARK_MAIN();
