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

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsfg {

/// Raised when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for inputs on which an operation is undefined (empty, zero-norm).
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a file fails to parse. The message names the byte offset.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when training or checking produces a non-finite or failed result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(Shape s);

/// Dense row-major single-precision matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  Shape shape() const { return {rows_, cols_}; }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Matrix product. Dispatches to the OpenMP kernel when built with OpenMP.
Matrix matmul(const Matrix& a, const Matrix& b);

inline constexpr double kEluAlpha = 1.0;

/// x for x > 0, alpha * (exp(x) - 1) otherwise.
double elu(double x, double alpha = kEluAlpha);
/// Derivative of elu. Defined as 1 at exactly zero (right limit).
double elu_grad(double x, double alpha = kEluAlpha);
void elu_inplace(std::span<double> xs, double alpha = kEluAlpha);

/// Max-subtracted softmax. Throws DegenerateInput on empty input.
std::vector<double> softmax(std::span<const double> logits);
/// log(sum(exp(logits))) computed with max subtraction.
double log_sum_exp(std::span<const double> logits);

double dot(std::span<const float> a, std::span<const float> b);
double norm2(std::span<const float> v);

/// v / ||v||. Throws DegenerateInput for a zero vector.
std::vector<float> l2_normalize(std::span<const float> v);

/// Index of the largest value; lowest index wins on exact ties.
std::size_t argmax(std::span<const double> xs);

}  // namespace fsfg
