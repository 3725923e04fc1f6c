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

#include "fsfg/kernels.hpp"

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fsfg::kernels {

// The parallel loops below split work over independent output rows only; the
// reduction order inside each output element matches the serial version.

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += double(a(i, p)) * double(b(p, j));
      out(i, j) = static_cast<float>(acc);
    }
  }
}

void bilinear_pool(const Matrix& fa, const Matrix& fb, std::span<float> out) {
  const std::size_t n_a = fa.rows(), n_b = fb.rows(), locs = fa.cols();
  for (std::size_t t = 0; t < n_b; ++t) {
    for (std::size_t i = 0; i < n_a; ++i) {
      double acc = 0.0;
      for (std::size_t l = 0; l < locs; ++l) acc += double(fa(i, l)) * double(fb(t, l));
      out[t * n_a + i] = static_cast<float>(acc);
    }
  }
}

void score(const Matrix& queries, const Matrix& classifiers, std::span<double> scores) {
  const std::size_t nq = queries.rows(), nc = classifiers.rows(), d = queries.cols();
  for (std::size_t q = 0; q < nq; ++q) {
    const float* x = queries.row(q).data();
    for (std::size_t c = 0; c < nc; ++c) {
      const float* f = classifiers.row(c).data();
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += double(f[i]) * double(x[i]);
      scores[q * nc + c] = acc;
    }
  }
}

void affine(const Matrix& w, std::span<const float> b, std::span<const double> x,
            std::span<double> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const float* wr = w.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) acc += double(wr[c]) * x[c];
    y[r] = acc + double(b[r]);
  }
}

}  // namespace serial

namespace parallel {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  const auto n = static_cast<std::int64_t>(a.rows());
  const std::size_t k = a.cols(), m = b.cols();
#pragma omp parallel for schedule(static) if (n * static_cast<std::int64_t>(k * m) > 32768)
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += double(a(i, p)) * double(b(p, j));
      out(i, j) = static_cast<float>(acc);
    }
  }
}

void bilinear_pool(const Matrix& fa, const Matrix& fb, std::span<float> out) {
  const std::size_t n_a = fa.rows(), locs = fa.cols();
  const auto n_b = static_cast<std::int64_t>(fb.rows());
#pragma omp parallel for schedule(static) if (n_b * static_cast<std::int64_t>(n_a * locs) > 32768)
  for (std::int64_t t = 0; t < n_b; ++t) {
    for (std::size_t i = 0; i < n_a; ++i) {
      double acc = 0.0;
      for (std::size_t l = 0; l < locs; ++l) acc += double(fa(i, l)) * double(fb(t, l));
      out[t * n_a + i] = static_cast<float>(acc);
    }
  }
}

void score(const Matrix& queries, const Matrix& classifiers, std::span<double> scores) {
  const auto nq = static_cast<std::int64_t>(queries.rows());
  const std::size_t nc = classifiers.rows(), d = queries.cols();
#pragma omp parallel for schedule(static) if (nq * static_cast<std::int64_t>(nc * d) > 32768)
  for (std::int64_t q = 0; q < nq; ++q) {
    const float* x = queries.row(q).data();
    for (std::size_t c = 0; c < nc; ++c) {
      const float* f = classifiers.row(c).data();
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += double(f[i]) * double(x[i]);
      scores[q * nc + c] = acc;
    }
  }
}

void affine(const Matrix& w, std::span<const float> b, std::span<const double> x,
            std::span<double> y) {
  const auto rows = static_cast<std::int64_t>(w.rows());
  const std::size_t cols = w.cols();
#pragma omp parallel for schedule(static) if (rows * static_cast<std::int64_t>(cols) > 65536)
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* wr = w.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += double(wr[c]) * x[c];
    y[r] = acc + double(b[r]);
  }
}

}  // namespace parallel

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace fsfg::kernels
