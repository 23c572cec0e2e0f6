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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "features.hpp"
#include "json.hpp"
#include "metrics.hpp"
#include "random.hpp"

namespace lyapguard {

struct Standardizer {
  std::vector<double> mean;
  // Zero-variance columns get std 1 so they standardize to 0.
  std::vector<double> std;

  static Standardizer fit(const FeatureMatrix& features);
  std::vector<double> apply(std::span<const double> point) const;
};

struct LogisticConfig {
  double l2_penalty = 1e-4;
  int max_iters = 5000;
  double tol = 1e-8;
  // Unused by the deterministic solver; kept in the manifest.
  std::uint64_t seed = 0;
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  Standardizer standardizer;
  bool converged = false;
  int iterations = 0;
  std::vector<double> loss_history;
};

LogisticModel logistic_fit(const FeatureMatrix& features, std::span<const int> labels,
                           const LogisticConfig& config = {});
double logistic_score(const LogisticModel& model, std::span<const double> point);

nlohmann::json logistic_to_json(const LogisticModel& model);
LogisticModel logistic_from_json(const nlohmann::json& j);

struct LoaoResult {
  std::string left_out;
  RocCurve curve;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  bool converged = false;
};

// Naturals are split by row position: the first half trains, the second
// half is the held-out natural pool for every left-out evaluation.
std::map<std::string, LoaoResult> leave_one_attack_out(
    const FeatureMatrix& natural, const std::map<std::string, FeatureMatrix>& per_attack,
    const LogisticConfig& config = {});

}  // namespace lyapguard
