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

#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// `serial::` and an OpenMP version in `parallel::`; both sum each output
// element in the same order, so their results are bit-identical.

#include <cstddef>
#include <span>

#include "fsfg/tensor.hpp"

namespace fsfg::kernels {

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out);

/// out[t * n_a + i] = sum_l fa(i, l) * fb(t, l)
void bilinear_pool(const Matrix& fa, const Matrix& fb, std::span<float> out);

/// scores(q, c) = <queries.row(q), classifiers.row(c)>, double accumulation.
void score(const Matrix& queries, const Matrix& classifiers,
           std::span<double> scores);

/// y = W x + b with float weights and double activations.
void affine(const Matrix& w, std::span<const float> b,
            std::span<const double> x, std::span<double> y);

}  // namespace serial

namespace parallel {

void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void bilinear_pool(const Matrix& fa, const Matrix& fb, std::span<float> out);
void score(const Matrix& queries, const Matrix& classifiers,
           std::span<double> scores);
void affine(const Matrix& w, std::span<const float> b,
            std::span<const double> x, std::span<double> y);

}  // namespace parallel

/// True when the library was compiled with OpenMP.
bool openmp_enabled();
int max_threads();

}  // namespace fsfg::kernels
