// Copyright 2026 The FSFG Authors. All Rights Reserved.
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

// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <vector>

#include "fsfg/kernels.hpp"
#include "fsfg/rng.hpp"
#include "fsfg/tensor.hpp"

namespace {

using namespace fsfg;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (float& v : m.values()) v = rng.uniform_float(-1, 1);
  return m;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  Matrix out(n, n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::matmul(a, b, out);
    } else {
      kernels::serial::matmul(a, b, out);
    }
    benchmark::DoNotOptimize(out.values().data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}

// Equal channel counts over a 28 x 28 location grid.
template <bool Parallel>
void BM_BilinearPool(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const std::size_t locations = 784;
  const Matrix fa = random_matrix(c, locations, 3), fb = random_matrix(c, locations, 4);
  std::vector<float> out(c * c);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::bilinear_pool(fa, fb, out);
    } else {
      kernels::serial::bilinear_pool(fa, fb, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_Score(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const Matrix queries = random_matrix(1000, d, 5), classifiers = random_matrix(50, d, 6);
  std::vector<double> out(1000 * 50);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::score(queries, classifiers, out);
    } else {
      kernels::serial::score(queries, classifiers, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_Affine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix w = random_matrix(n, n, 7);
  const std::vector<float> bias(n, 0.5f);
  std::vector<double> x(n, 0.25), y(n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::affine(w, bias, x, y);
    } else {
      kernels::serial::affine(w, bias, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<true>)->Name("matmul/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_BilinearPool<false>)->Name("pool/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_BilinearPool<true>)->Name("pool/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Score<false>)->Name("score/serial")->Arg(256)->Arg(4096);
BENCHMARK(BM_Score<true>)->Name("score/parallel")->Arg(256)->Arg(4096);
BENCHMARK(BM_Affine<false>)->Name("affine/serial")->Arg(1024)->Arg(4096);
BENCHMARK(BM_Affine<true>)->Name("affine/parallel")->Arg(1024)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
