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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "image.hpp"
#include "lyap.hpp"

namespace lyapguard {

struct RowMeta {
  std::string id;
  Provenance provenance = Legitimate{};
  std::optional<int> label;
};

class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  // Throws InvalidArgument on ragged or non-finite rows, or a meta/row count mismatch.
  FeatureMatrix(std::size_t dim, std::vector<double> values, std::vector<RowMeta> meta);

  std::size_t rows() const noexcept { return meta_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * dim_, dim_}; }
  double at(std::size_t r, std::size_t c) const { return values_[r * dim_ + c]; }
  const RowMeta& meta(std::size_t r) const { return meta_.at(r); }
  const std::vector<RowMeta>& meta() const noexcept { return meta_; }
  std::span<const double> values() const noexcept { return values_; }

  void append(const FeatureMatrix& other);
  FeatureMatrix select(std::span<const std::size_t> rows) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::vector<RowMeta> meta_;
};

FeatureMatrix build_features(std::span<const LyapunovSpectrum> spectra, std::size_t dim,
                             std::span<const RowMeta> meta);

// First `dim` columns of every row. Throws DimTooLarge.
FeatureMatrix leading_columns(const FeatureMatrix& features, std::size_t dim);

double l2_distance(const Image& a, const Image& b);

struct PcaModel {
  std::vector<double> mean;
  // Two rows of length D, orthonormal.
  std::vector<std::vector<double>> components;
  std::vector<double> explained_variance;
};

PcaModel pca_fit(const FeatureMatrix& features);
// N rows of (pc1, pc2), row-major.
std::vector<double> pca_project(const PcaModel& model, const FeatureMatrix& features);

// Mean silhouette over rows, with cluster = legitimate vs not. Reported only.
std::optional<double> silhouette_score(std::span<const double> points, std::size_t dim,
                                       std::span<const int> cluster);

// CSV header: id,provenance,label,l1..lD
std::string features_to_csv(const FeatureMatrix& features);
FeatureMatrix features_from_csv(const std::string& text);
void write_features_csv(const FeatureMatrix& features, const std::filesystem::path& path);
FeatureMatrix read_features_csv(const std::filesystem::path& path);

}  // namespace lyapguard
