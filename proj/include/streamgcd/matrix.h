// Copyright 2026 The streamgcd Authors.
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

#ifndef STREAMGCD_MATRIX_H_
#define STREAMGCD_MATRIX_H_

#include <cstddef>
#include <span>
#include <vector>

namespace streamgcd {

// Dense row-major matrix of doubles.
//
// Constructing from explicit values rejects NaN/Inf. Element writes through
// operator() or row() are unchecked; callers that feed results back into an
// online loop validate with AllFinite().
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix Identity(std::size_t n);
  // Single-row matrix holding `values`.
  static Matrix RowVector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return values_[r * cols_ + c];
  }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) {
    return {values_.data() + r * cols_, cols_};
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool AllFinite() const;
  bool SameShape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  // Copies the listed rows, in order.
  Matrix SelectRows(std::span<const std::size_t> indices) const;
  // Copies columns [begin, end).
  Matrix ColumnSlice(std::size_t begin, std::size_t end) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

Matrix MatMul(const Matrix& a, const Matrix& b);
// aᵀ · b without materializing the transpose.
Matrix MatMulTransA(const Matrix& a, const Matrix& b);
// a · bᵀ without materializing the transpose.
Matrix MatMulTransB(const Matrix& a, const Matrix& b);
Matrix Transpose(const Matrix& a);

// a += scale * b.
void AddScaled(Matrix& a, const Matrix& b, double scale = 1.0);
// Adds `bias` (length cols) to every row.
void AddRowBroadcast(Matrix& a, const Matrix& bias);
// 1×cols matrix of column sums.
Matrix ColumnSums(const Matrix& a);
// Vertical concatenation; column counts must agree.
Matrix VStack(const Matrix& top, const Matrix& bottom);

// Per-column mean and population standard deviation.
std::vector<double> ColumnMeans(const Matrix& a);
std::vector<double> ColumnStdDevs(const Matrix& a);

double SquaredDistance(std::span<const double> a, std::span<const double> b);
double MaxAbsDifference(const Matrix& a, const Matrix& b);

}  // namespace streamgcd

#endif  // STREAMGCD_MATRIX_H_
