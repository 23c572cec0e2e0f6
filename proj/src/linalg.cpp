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
#include "linalg.hpp"

#include <cassert>
#include <cmath>

namespace lyapguard {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  assert(cols_ == rhs.rows_);
  Matrix out(rows_, rhs.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(i, k);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
    }
  }
  return out;
}

QrFactors householder_qr(const Matrix& a, double rank_tolerance) {
  const std::size_t n = a.rows();
  assert(a.cols() == n);
  Matrix r = a;
  Matrix q = Matrix::identity(n);
  std::vector<double> v(n);

  double frobenius = 0.0;
  for (double x : a.data()) frobenius += x * x;
  const double negligible = rank_tolerance * std::sqrt(frobenius);

  for (std::size_t k = 0; k < n; ++k) {
    double tail = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) tail += r(i, k) * r(i, k);
    const double head = r(k, k);
    if (std::sqrt(head * head + tail) <= negligible) {
      for (std::size_t i = k; i < n; ++i) r(i, k) = 0.0;
      continue;
    }
    if (tail == 0.0) continue;
    const double norm = std::sqrt(head * head + tail);
    // Reflect x onto -sign(head) * |x| e_k to avoid cancellation.
    const double alpha = head >= 0.0 ? -norm : norm;
    v[k] = head - alpha;
    for (std::size_t i = k + 1; i < n; ++i) v[i] = r(i, k);
    const double vnorm2 = v[k] * v[k] + tail;

    for (std::size_t j = k; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += v[i] * r(i, j);
      const double scale = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < n; ++i) r(i, j) -= scale * v[i];
    }
    // Q <- Q H_k (H_k symmetric).
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t l = k; l < n; ++l) dot += q(i, l) * v[l];
      const double scale = 2.0 * dot / vnorm2;
      for (std::size_t l = k; l < n; ++l) q(i, l) -= scale * v[l];
    }
    for (std::size_t i = k + 1; i < n; ++i) r(i, k) = 0.0;
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (r(k, k) < 0.0) {
      for (std::size_t j = 0; j < n; ++j) r(k, j) = -r(k, j);
      for (std::size_t i = 0; i < n; ++i) q(i, k) = -q(i, k);
    }
  }
  return {std::move(q), std::move(r)};
}

std::optional<Matrix> cholesky(const Matrix& spd, double pivot_floor) {
  const std::size_t n = spd.rows();
  Matrix low(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    double pivot = spd(k, k);
    for (std::size_t j = 0; j < k; ++j) pivot -= low(k, j) * low(k, j);
    if (!(pivot > pivot_floor)) return std::nullopt;
    low(k, k) = std::sqrt(pivot);
    for (std::size_t i = k + 1; i < n; ++i) {
      double s = spd(i, k);
      for (std::size_t j = 0; j < k; ++j) s -= low(i, j) * low(k, j);
      low(i, k) = s / low(k, k);
    }
  }
  return low;
}

std::vector<double> cholesky_solve(const Matrix& lower, std::span<const double> b) {
  const std::size_t n = lower.rows();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= lower(i, j) * y[j];
    y[i] = s / lower(i, i);
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lower(j, i) * x[j];
    x[i] = s / lower(i, i);
  }
  return x;
}

}  // namespace lyapguard
