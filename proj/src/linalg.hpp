// Copyright 2026 The lyapguard Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace lyapguard {

// Small dense row-major matrix for the tangent-map machinery (d is 2..10).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix operator*(const Matrix& rhs) const;
  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct QrFactors {
  Matrix q;
  Matrix r;
};

// Householder QR of a square matrix with the sign of each R diagonal entry
// forced non-negative (Q columns flipped to match). A residual column with
// norm <= rank_tolerance * ||A||_F is set to zero and left unreflected, so
// rounding noise never picks a reflection direction.
QrFactors householder_qr(const Matrix& a, double rank_tolerance = 0.0);

// Cholesky factor of a symmetric matrix; nullopt when some pivot is
// <= pivot_floor.
std::optional<Matrix> cholesky(const Matrix& spd, double pivot_floor);

// Solves L L^T x = b given the lower Cholesky factor.
std::vector<double> cholesky_solve(const Matrix& lower, std::span<const double> b);

}  // namespace lyapguard
