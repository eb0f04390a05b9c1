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

#include "m2kd/tensor.hpp"

#include <cmath>

#include "m2kd/error.hpp"

namespace m2kd {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Tensor2 Tensor2::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged initializer for Tensor2");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor2(r, c, std::move(data));
}

Tensor2 Tensor2::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw ShapeError("row slice out of range");
  return Tensor2(end - begin, cols_,
                 std::vector<double>(data_.begin() + begin * cols_,
                                     data_.begin() + end * cols_));
}

Tensor2 Tensor2::slice_cols(std::size_t begin, std::size_t end) const {
  if (begin > end || end > cols_) throw ShapeError("column slice out of range");
  Tensor2 out(rows_, end - begin);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = (*this)(r, c);
  }
  return out;
}

std::string shape_string(const Tensor2& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + shape_string(a) + " x " +
                     shape_string(b));
  }
  Tensor2 c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  }
  return c;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn shape mismatch: " + shape_string(a) + "^T x " +
                     shape_string(b));
  }
  Tensor2 c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) acc += a(k, i) * b(k, j);
      c(i, j) = acc;
    }
  }
  return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt shape mismatch: " + shape_string(a) + " x " +
                     shape_string(b) + "^T");
  }
  Tensor2 c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(j, k);
      c(i, j) = acc;
    }
  }
  return c;
}

void add_row_vector(Tensor2& t, std::span<const double> v) {
  if (v.size() != t.cols()) {
    throw ShapeError("bias length " + std::to_string(v.size()) +
                     " does not match " + shape_string(t));
  }
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += v[c];
  }
}

Vector column_sums(const Tensor2& t) {
  Vector out(t.cols(), 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
  }
  return out;
}

Tensor2 relu(const Tensor2& x) {
  Tensor2 out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor2 relu_backward(const Tensor2& pre, const Tensor2& upstream) {
  if (pre.rows() != upstream.rows() || pre.cols() != upstream.cols()) {
    throw ShapeError("relu_backward shape mismatch: " + shape_string(pre) +
                     " vs " + shape_string(upstream));
  }
  Tensor2 out(pre.rows(), pre.cols());
  auto p = pre.data();
  auto u = upstream.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = p[i] > 0.0 ? u[i] : 0.0;
  return out;
}

double sigmoid(double z) {
  // Both branches share the lower tail so sigmoid(z) + sigmoid(-z) == 1 closely.
  const double e = std::exp(-std::fabs(z));
  const double tail = e / (1.0 + e);
  return z >= 0.0 ? 1.0 - tail : tail;
}

Tensor2 sigmoid(const Tensor2& z) {
  Tensor2 out = z;
  for (double& v : out.data()) v = sigmoid(v);
  return out;
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 8;
  if (values.size() <= kBlock) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace m2kd
