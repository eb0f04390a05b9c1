// Copyright 2026 The M2KD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace m2kd {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor2 from_rows(
      std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  // Returns rows [begin, end) as a new tensor.
  Tensor2 slice_rows(std::size_t begin, std::size_t end) const;
  // Returns columns [begin, end) as a new tensor.
  Tensor2 slice_cols(std::size_t begin, std::size_t end) const;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Tensor2& t);

// c[i][j] = sum_k a[i][k] * b[k][j], accumulated with k ascending.
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// a^T * b, accumulated over the shared row index ascending.
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
// a * b^T, accumulated over the shared column index ascending.
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);

void add_row_vector(Tensor2& t, std::span<const double> v);
Vector column_sums(const Tensor2& t);

Tensor2 relu(const Tensor2& x);
// Gradient passes where pre > 0; zero at pre <= 0.
Tensor2 relu_backward(const Tensor2& pre, const Tensor2& upstream);

double sigmoid(double z);
Tensor2 sigmoid(const Tensor2& z);

// Pairwise (cascade) summation in the given order.
double pairwise_sum(std::span<const double> values);

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

bool all_finite(std::span<const double> values);

}  // namespace m2kd
