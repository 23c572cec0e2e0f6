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
#include "lyap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "error.hpp"

namespace lyapguard {
namespace {

// Least-squares last row of the tangent map; nullopt when every
// displacement vector is zero.
std::optional<std::vector<double>> tangent_row(std::span<const double> x, std::size_t i,
                                               std::span<const std::size_t> neighbors,
                                               std::size_t d, std::size_t m) {
  Matrix gram(d, d);
  std::vector<double> rhs(d, 0.0);
  std::vector<double> dz(d);
  bool any_nonzero = false;
  for (std::size_t j : neighbors) {
    for (std::size_t k = 0; k < d; ++k) {
      dz[k] = x[j + k * m] - x[i + k * m];
      any_nonzero = any_nonzero || dz[k] != 0.0;
    }
    const double beta = x[j + d * m] - x[i + d * m];
    for (std::size_t r = 0; r < d; ++r) {
      rhs[r] += dz[r] * beta;
      for (std::size_t c = 0; c <= r; ++c) gram(r, c) += dz[r] * dz[c];
    }
  }
  if (!any_nonzero) return std::nullopt;
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = r + 1; c < d; ++c) gram(r, c) = gram(c, r);
  }

  double trace = 0.0;
  for (std::size_t k = 0; k < d; ++k) trace += gram(k, k);
  if (auto low = cholesky(gram, kRidgeTrigger * trace)) return cholesky_solve(*low, rhs);

  const double ridge = kRidgeStrength * trace / static_cast<double>(d);
  for (std::size_t k = 0; k < d; ++k) gram(k, k) += ridge;
  auto low = cholesky(gram, 0.0);
  if (!low) return std::nullopt;
  return cholesky_solve(*low, rhs);
}

Matrix companion(std::span<const double> last_row) {
  const std::size_t d = last_row.size();
  Matrix t(d, d);
  for (std::size_t r = 0; r + 1 < d; ++r) t(r, r + 1) = 1.0;
  for (std::size_t c = 0; c < d; ++c) t(d - 1, c) = last_row[c];
  return t;
}

}  // namespace

void LyapunovParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kBadParam, what); };
  if (matrix_dim < 2) fail("matrix_dim must be >= 2");
  if (emb_dim < matrix_dim) fail("emb_dim must be >= matrix_dim");
  if ((emb_dim - 1) % (matrix_dim - 1) != 0) fail("(emb_dim - 1) must be divisible by (matrix_dim - 1)");
  if (min_nb < matrix_dim + 1) fail("min_nb must be >= matrix_dim + 1");
  if (min_tsep < 0) fail("min_tsep must be >= 0");
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau must be a positive real");
}

DelayOrbit delay_embed(std::span<const double> series, int dim, int lag) {
  if (dim < 1 || lag < 1) throw Error(ErrorCode::kBadParam, "delay_embed needs dim >= 1 and lag >= 1");
  const std::size_t span_len = static_cast<std::size_t>(dim - 1) * static_cast<std::size_t>(lag) + 1;
  if (series.size() < span_len) {
    throw Error(ErrorCode::kSeriesTooShort, "series of length " + std::to_string(series.size()) +
                                                " cannot be embedded with dim " + std::to_string(dim) +
                                                ", lag " + std::to_string(lag));
  }
  const std::size_t count = series.size() - span_len + 1;
  std::vector<double> data(count * static_cast<std::size_t>(dim));
  for (std::size_t k = 0; k < count; ++k) {
    for (int c = 0; c < dim; ++c) data[k * dim + c] = series[k + static_cast<std::size_t>(c * lag)];
  }
  return DelayOrbit(count, static_cast<std::size_t>(dim), std::move(data));
}

OrbitIndexSet find_neighbors(const DelayOrbit& orbit, std::size_t i, int min_nb, int min_tsep,
                             const std::function<bool(std::size_t)>& valid, double tie_tolerance) {
  if (min_nb < 1) throw Error(ErrorCode::kBadParam, "min_nb must be >= 1");
  const auto ref = orbit[i];
  std::vector<std::pair<double, std::size_t>> candidates;
  candidates.reserve(orbit.size());
  for (std::size_t j = 0; j < orbit.size(); ++j) {
    const std::size_t sep = j > i ? j - i : i - j;
    if (sep == 0 || sep <= static_cast<std::size_t>(min_tsep) || !valid(j)) continue;
    const auto v = orbit[j];
    double dist = 0.0;
    for (std::size_t c = 0; c < v.size(); ++c) dist = std::max(dist, std::abs(v[c] - ref[c]));
    candidates.emplace_back(dist, j);
  }
  if (candidates.size() < static_cast<std::size_t>(min_nb)) {
    throw Error(ErrorCode::kNotEnoughNeighbors,
                "reference " + std::to_string(i) + " has " + std::to_string(candidates.size()) +
                    " candidates, need " + std::to_string(min_nb));
  }
  auto kth = candidates.begin() + (min_nb - 1);
  std::nth_element(candidates.begin(), kth, candidates.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  OrbitIndexSet out;
  out.reference = i;
  out.radius = kth->first;
  const double cutoff = out.radius + tie_tolerance;
  for (const auto& [dist, j] : candidates) {
    if (dist <= cutoff) out.neighbors.push_back(j);
  }
  std::sort(out.neighbors.begin(), out.neighbors.end());
  return out;
}

Matrix fit_tangent_map(std::span<const double> series, std::size_t i, const OrbitIndexSet& neighbors,
                       int d, int m) {
  if (d < 1 || m < 1) throw Error(ErrorCode::kBadParam, "fit_tangent_map needs d >= 1 and m >= 1");
  const std::size_t reach = static_cast<std::size_t>(d) * static_cast<std::size_t>(m);
  auto in_range = [&](std::size_t k) { return k + reach < series.size(); };
  if (!in_range(i)) throw Error(ErrorCode::kSeriesTooShort, "reference index beyond map range");
  for (std::size_t j : neighbors.neighbors) {
    if (!in_range(j)) throw Error(ErrorCode::kSeriesTooShort, "neighbor index beyond map range");
  }
  auto row = tangent_row(series, i, neighbors.neighbors, static_cast<std::size_t>(d),
                         static_cast<std::size_t>(m));
  if (!row) {
    throw Error(ErrorCode::kDegenerateNeighborhood,
                "all displacement vectors around reference " + std::to_string(i) + " are zero");
  }
  return companion(*row);
}

QrAccumulator::QrAccumulator(std::size_t d) : q_(Matrix::identity(d)), sums_(d, 0.0) {}

void QrAccumulator::push(const Matrix& map) {
  auto [q, r] = householder_qr(map * q_, kQrRankTolerance);
  for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k] += std::log(std::max(r(k, k), kLogFloor));
  q_ = std::move(q);
  ++steps_;
}

QrAccumulation qr_accumulate(std::span<const Matrix> maps) {
  if (maps.empty()) throw Error(ErrorCode::kInvalidArgument, "qr_accumulate needs at least one map");
  QrAccumulator acc(maps.front().rows());
  for (const auto& t : maps) {
    if (t.rows() != maps.front().rows() || t.cols() != t.rows()) {
      throw Error(ErrorCode::kDimMismatch, "maps must share one square shape");
    }
    acc.push(t);
  }
  return {acc.log_sums(), acc.steps()};
}

LyapunovSpectrum lyap_spectrum(const TimeSeries& series, const LyapunovParams& params) {
  params.validate();
  const auto raw = series.values();
  const std::size_t n = raw.size();
  if (std::all_of(raw.begin(), raw.end(), [&](double v) { return v == raw.front(); })) {
    throw Error(ErrorCode::kZeroVariance, "series is constant");
  }

  const auto d = static_cast<std::size_t>(params.matrix_dim);
  const auto m = static_cast<std::size_t>(params.map_step());
  if (n < d * m + 1 || n < static_cast<std::size_t>(params.emb_dim)) {
    throw Error(ErrorCode::kSeriesTooShort, "series of length " + std::to_string(n) +
                                                " is shorter than one tangent-map span");
  }

  // z-score; exponents are invariant, and equal samples stay bit-equal.
  double mean = 0.0;
  for (double v : raw) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : raw) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = (raw[k] - mean) / sd;

  const std::size_t last = n - 1 - d * m;
  const DelayOrbit orbit = delay_embed(x, params.emb_dim, 1);
  const auto valid = [last](std::size_t j) { return j <= last; };

  QrAccumulator acc(d);
  const std::vector<double> zero_row(d, 0.0);
  for (std::size_t i = 0; i <= last; i += m) {
    const auto nb = find_neighbors(orbit, i, params.min_nb, params.min_tsep, valid, kNeighborTieTolerance);
    const auto row = tangent_row(x, i, nb.neighbors, d, m);
    // A zero neighborhood has the zero vector as its min-norm fit.
    acc.push(companion(row ? *row : zero_row));
  }

  LyapunovSpectrum out;
  out.n_steps = acc.steps();
  const double scale = static_cast<double>(out.n_steps) * static_cast<double>(m) * params.tau;
  out.exponents.reserve(d);
  for (double s : acc.log_sums()) out.exponents.push_back(s / scale);
  return out;
}

bool has_positive_exponent(const LyapunovSpectrum& spectrum, double tol) {
  return std::any_of(spectrum.exponents.begin(), spectrum.exponents.end(),
                     [tol](double e) { return e > tol; });
}

}  // namespace lyapguard
