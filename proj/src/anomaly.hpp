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
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "features.hpp"
#include "json.hpp"
#include "random.hpp"

namespace lyapguard {

// Flat node array; node 0 is the root. Leaves have feature == -1.
struct IsolationNode {
  int feature = -1;
  double split = 0.0;
  int left = -1;
  int right = -1;
  std::size_t size = 0;
};

struct IsolationTree {
  std::vector<IsolationNode> nodes;
  std::size_t height() const;
};

struct IsolationForestModel {
  std::vector<IsolationTree> trees;
  std::size_t subsample_size = 0;
  std::size_t n_trees = 0;
  std::size_t dim = 0;
  double threshold = 0.5;
  RngSeed train_seed{0};
};

struct IforestParams {
  std::size_t n_trees = 100;
  // 0 selects min(256, N).
  std::size_t subsample_size = 0;
};

inline constexpr double kDefaultContamination = 0.1;

// Expected unsuccessful-search depth in a BST of n points (exact harmonic sum).
double average_path_length(std::size_t n);

IsolationForestModel iforest_fit(const FeatureMatrix& features, const IforestParams& params,
                                 RngSeed seed, unsigned jobs = 1);

double path_length(const IsolationTree& tree, std::span<const double> point);
double anomaly_score(const IsolationForestModel& model, std::span<const double> point);
// 2^(-mean_path / c(subsample_size)).
double score_from_mean_path(double mean_path, std::size_t subsample_size);

enum class Decision { kAccept, kReject };
Decision decide(const IsolationForestModel& model, std::span<const double> point);
Decision decide_score(double score, double threshold);

// (1 - contamination) quantile of the scores, midpoint interpolation.
double quantile_midpoint(std::vector<double> scores, double q);
double calibrate_threshold(IsolationForestModel& model, const FeatureMatrix& features,
                           double contamination);

nlohmann::json iforest_to_json(const IsolationForestModel& model);
IsolationForestModel iforest_from_json(const nlohmann::json& j);
void save_iforest(const IsolationForestModel& model, const std::filesystem::path& path);
IsolationForestModel load_iforest(const std::filesystem::path& path);

}  // namespace lyapguard
