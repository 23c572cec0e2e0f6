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
#include <functional>
#include <span>
#include <vector>

#include "image.hpp"
#include "linalg.hpp"

namespace lyapguard {

/// Configuration of the embed / tangent-map / QR spectrum estimator.
///
/// The defaults are the MNIST parameterization: emb_dim 10, matrix_dim 4,
/// min_nb = min(2 * matrix_dim, matrix_dim + 4) = 8, min_tsep 0, tau 1.
/// The tangent maps advance m = (emb_dim - 1) / (matrix_dim - 1) samples.
struct LyapunovParams {
  int emb_dim = 10;
  int matrix_dim = 4;
  int min_nb = 8;
  int min_tsep = 0;
  double tau = 1.0;

  /// Throws Error(kBadParam) naming the violated constraint.
  void validate() const;
  int map_step() const noexcept { return (emb_dim - 1) / (matrix_dim - 1); }
};

/// Exponents in nats per tau, in QR-accumulation order (not sorted).
struct LyapunovSpectrum {
  std::vector<double> exponents;
  int n_steps = 0;
};

// Neighbors of the same reference closer than this (on the z-scored series)
// than the min_nb-th distance are treated as ties.
inline constexpr double kNeighborTieTolerance = 1e-9;
// Ridge is added when a Cholesky pivot of the Gram matrix drops to
// kRidgeTrigger * trace; its strength is kRidgeStrength * trace / d.
inline constexpr double kRidgeTrigger = 1e-8;
inline constexpr double kRidgeStrength = 1e-3;
inline constexpr double kLogFloor = 1e-12;
// Relative residual-column norm below which QR treats a column as dependent.
inline constexpr double kQrRankTolerance = 1e-10;

class DelayOrbit {
 public:
  DelayOrbit(std::size_t count, std::size_t dim, std::vector<double> data)
      : count_(count), dim_(dim), data_(std::move(data)) {}

  std::size_t size() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> operator[](std::size_t k) const noexcept {
    return {data_.data() + k * dim_, dim_};
  }

 private:
  std::size_t count_;
  std::size_t dim_;
  std::vector<double> data_;
};

/// Vector k is (x_k, x_{k+lag}, ..., x_{k+(dim-1) lag}).
DelayOrbit delay_embed(std::span<const double> series, int dim, int lag);

struct OrbitIndexSet {
  std::size_t reference = 0;
  std::vector<std::size_t> neighbors;  // ascending index order
  double radius = 0.0;
};

/// Chebyshev-distance neighborhood of orbit[i]. The radius is the min_nb-th
/// smallest candidate distance; every candidate within radius + tie_tolerance
/// is included. Candidates are indices j with |i - j| > min_tsep and j != i
/// that satisfy the valid predicate.
OrbitIndexSet find_neighbors(const DelayOrbit& orbit, std::size_t i, int min_nb, int min_tsep,
                             const std::function<bool(std::size_t)>& valid,
                             double tie_tolerance = 0.0);

/// Companion-form tangent map at reference i: shift rows on top, last row
/// the least-squares fit a . (z_j - z_i) ~ x_{j+dm} - x_{i+dm} with
/// z_k = (x_k, x_{k+m}, ..., x_{k+(d-1)m}).
Matrix fit_tangent_map(std::span<const double> series, std::size_t i,
                       const OrbitIndexSet& neighbors, int d, int m);

/// Running product T_K ... T_1 in QR form; sums log max(R_kk, kLogFloor).
class QrAccumulator {
 public:
  explicit QrAccumulator(std::size_t d);

  void push(const Matrix& map);
  const std::vector<double>& log_sums() const noexcept { return sums_; }
  int steps() const noexcept { return steps_; }

 private:
  Matrix q_;
  std::vector<double> sums_;
  int steps_ = 0;
};

struct QrAccumulation {
  std::vector<double> log_sums;
  int steps = 0;
};

QrAccumulation qr_accumulate(std::span<const Matrix> maps);

LyapunovSpectrum lyap_spectrum(const TimeSeries& series, const LyapunovParams& params = {});

/// True iff some exponent is strictly greater than tol.
bool has_positive_exponent(const LyapunovSpectrum& spectrum, double tol = 0.0);

}  // namespace lyapguard
