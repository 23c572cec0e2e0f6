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
#include "features.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "error.hpp"

namespace lyapguard {
namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t dim, std::vector<double> values, std::vector<RowMeta> meta)
    : dim_(dim), values_(std::move(values)), meta_(std::move(meta)) {
  if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "feature dimension must be >= 1");
  if (values_.size() != meta_.size() * dim_) {
    throw Error(ErrorCode::kInvalidArgument, "feature values do not match rows x dim");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "feature entries must be finite");
  }
}

void FeatureMatrix::append(const FeatureMatrix& other) {
  if (other.rows() == 0) return;
  if (rows() == 0 && dim_ == 0) {
    *this = other;
    return;
  }
  if (other.dim_ != dim_) throw Error(ErrorCode::kDimMismatch, "cannot append rows of different dimension");
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
  meta_.insert(meta_.end(), other.meta_.begin(), other.meta_.end());
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> rows) const {
  std::vector<double> values;
  std::vector<RowMeta> meta;
  values.reserve(rows.size() * dim_);
  for (std::size_t r : rows) {
    if (r >= this->rows()) throw Error(ErrorCode::kInvalidArgument, "row index out of range");
    auto src = row(r);
    values.insert(values.end(), src.begin(), src.end());
    meta.push_back(meta_[r]);
  }
  return FeatureMatrix(dim_, std::move(values), std::move(meta));
}

FeatureMatrix build_features(std::span<const LyapunovSpectrum> spectra, std::size_t dim,
                             std::span<const RowMeta> meta) {
  if (spectra.size() != meta.size()) {
    throw Error(ErrorCode::kLengthMismatch, "spectra and metadata lengths differ");
  }
  if (dim == 0) throw Error(ErrorCode::kBadParam, "feature dimension must be >= 1");
  std::vector<double> values;
  values.reserve(spectra.size() * dim);
  for (std::size_t k = 0; k < spectra.size(); ++k) {
    const auto& ex = spectra[k].exponents;
    if (ex.size() < dim) {
      throw Error(ErrorCode::kDimTooLarge, "dim " + std::to_string(dim) + " exceeds spectrum length " +
                                               std::to_string(ex.size()));
    }
    values.insert(values.end(), ex.begin(), ex.begin() + static_cast<std::ptrdiff_t>(dim));
  }
  return FeatureMatrix(dim, std::move(values), std::vector<RowMeta>(meta.begin(), meta.end()));
}

FeatureMatrix leading_columns(const FeatureMatrix& features, std::size_t dim) {
  if (dim == 0) throw Error(ErrorCode::kBadParam, "feature dimension must be >= 1");
  if (dim > features.dim()) {
    throw Error(ErrorCode::kDimTooLarge, "dim " + std::to_string(dim) + " exceeds feature width " +
                                             std::to_string(features.dim()));
  }
  std::vector<double> values;
  values.reserve(features.rows() * dim);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto row = features.row(r);
    values.insert(values.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(dim));
  }
  return FeatureMatrix(dim, std::move(values), features.meta());
}

double l2_distance(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error(ErrorCode::kDimMismatch, "images differ in shape");
  }
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  double sum = 0.0;
  for (std::size_t k = 0; k < pa.size(); ++k) sum += (pa[k] - pb[k]) * (pa[k] - pb[k]);
  return std::sqrt(sum);
}

PcaModel pca_fit(const FeatureMatrix& features) {
  const std::size_t n = features.rows();
  const std::size_t d = features.dim();
  if (n < 2 || d < 2) throw Error(ErrorCode::kInvalidArgument, "pca needs at least 2 rows and 2 columns");

  Eigen::MatrixXd x(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) x(r, c) = features.at(r, c);
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  if (x.squaredNorm() == 0.0) throw Error(ErrorCode::kDegenerateData, "zero total variance");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();

  PcaModel model;
  model.mean.assign(mean.data(), mean.data() + d);
  for (int k = 0; k < 2; ++k) {
    std::vector<double> comp(d);
    std::size_t arg = 0;
    for (std::size_t c = 0; c < d; ++c) {
      comp[c] = v(static_cast<Eigen::Index>(c), k);
      if (std::abs(comp[c]) > std::abs(comp[arg])) arg = c;
    }
    if (comp[arg] < 0.0) {
      for (auto& c : comp) c = -c;
    }
    model.components.push_back(std::move(comp));
    model.explained_variance.push_back(sv(k) * sv(k) / static_cast<double>(n - 1));
  }
  return model;
}

std::vector<double> pca_project(const PcaModel& model, const FeatureMatrix& features) {
  const std::size_t d = model.mean.size();
  if (features.dim() != d) throw Error(ErrorCode::kDimMismatch, "pca model and features differ in dim");
  std::vector<double> out(features.rows() * 2, 0.0);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t k = 0; k < 2; ++k) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += (features.at(r, c) - model.mean[c]) * model.components[k][c];
      out[r * 2 + k] = acc;
    }
  }
  return out;
}

std::optional<double> silhouette_score(std::span<const double> points, std::size_t dim,
                                       std::span<const int> cluster) {
  const std::size_t n = cluster.size();
  if (dim == 0 || points.size() != n * dim) {
    throw Error(ErrorCode::kLengthMismatch, "points and cluster labels differ in length");
  }
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double t = points[a * dim + c] - points[b * dim + c];
      s += t * t;
    }
    return std::sqrt(s);
  };
  std::vector<int> labels(cluster.begin(), cluster.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (labels.size() < 2) return std::nullopt;

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(labels.size(), 0.0);
    std::vector<std::size_t> count(labels.size(), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto li = static_cast<std::size_t>(
          std::lower_bound(labels.begin(), labels.end(), cluster[j]) - labels.begin());
      sum[li] += dist(i, j);
      ++count[li];
    }
    const auto own = static_cast<std::size_t>(
        std::lower_bound(labels.begin(), labels.end(), cluster[i]) - labels.begin());
    if (count[own] == 0) continue;  // singleton cluster scores 0
    const double a = sum[own] / static_cast<double>(count[own]);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < labels.size(); ++l) {
      if (l != own && count[l] > 0) b = std::min(b, sum[l] / static_cast<double>(count[l]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

std::string features_to_csv(const FeatureMatrix& features) {
  std::string out = "id,provenance,label";
  for (std::size_t c = 0; c < features.dim(); ++c) out += ",l" + std::to_string(c + 1);
  out += '\n';
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto& m = features.meta(r);
    if (m.id.find_first_of(",\r\n") != std::string::npos) {
      throw Error(ErrorCode::kFormat, "image id '" + m.id + "' cannot be written to CSV");
    }
    out += m.id + ',' + provenance_tag(m.provenance) + ',';
    if (m.label) out += std::to_string(*m.label);
    for (double v : features.row(r)) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

FeatureMatrix features_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kFormat, "empty feature CSV");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "provenance" || header[2] != "label") {
    throw Error(ErrorCode::kFormat, "feature CSV header must be id,provenance,label,l1..lD");
  }
  const std::size_t dim = header.size() - 3;
  for (std::size_t c = 0; c < dim; ++c) {
    if (header[3 + c] != "l" + std::to_string(c + 1)) {
      throw Error(ErrorCode::kFormat, "unexpected feature column '" + header[3 + c] + "'");
    }
  }
  std::vector<double> values;
  std::vector<RowMeta> meta;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": expected " +
                                          std::to_string(header.size()) + " cells");
    }
    RowMeta m;
    m.id = cells[0];
    try {
      m.provenance = parse_provenance_tag(cells[1]);
    } catch (const Error& e) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!cells[2].empty()) m.label = static_cast<int>(parse_double(cells[2], line_no));
    for (std::size_t c = 0; c < dim; ++c) values.push_back(parse_double(cells[3 + c], line_no));
    meta.push_back(std::move(m));
  }
  return FeatureMatrix(dim, std::move(values), std::move(meta));
}

void write_features_csv(const FeatureMatrix& features, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << features_to_csv(features);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

FeatureMatrix read_features_csv(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return features_from_csv(std::string(bytes.begin(), bytes.end()));
}

}  // namespace lyapguard
