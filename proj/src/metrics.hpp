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
#include <span>
#include <string>
#include <vector>

#include "anomaly.hpp"
#include "image.hpp"
#include "json.hpp"
#include "random.hpp"

namespace lyapguard {

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocCurve {
  // Starts at threshold +inf, (0,0); ends at (1,1).
  std::vector<RocPoint> points;
  double auroc = 0.5;
};

// Label 1 = positive (adversarial). Higher score = more positive.
RocCurve roc(std::span<const double> scores, std::span<const int> labels);

// Mann-Whitney pair count, ties count 1/2. O(P*N); used as a cross-check.
double auroc_pair_count(std::span<const double> scores, std::span<const int> labels);

struct DetectionCounts {
  std::size_t n_legit = 0;
  std::size_t n_adv = 0;
  std::size_t accepted_legit = 0;
  std::size_t rejected_adv = 0;
};

// A rate whose pool is empty is NaN (serialized as null).
struct DetectionReport {
  double true_acceptance_rate;
  double false_alarm_rate;
  double attacker_rejection_rate;
  DetectionCounts counts;
};

// Noisy images count toward the legitimate pool.
DetectionReport detection_report(std::span<const Decision> decisions,
                                 std::span<const Provenance> provenance);

struct ConfidenceInterval {
  double estimate;
  double lower;
  double upper;
};

// Percentile bootstrap, resampling positives and negatives separately.
ConfidenceInterval bootstrap_auroc(std::span<const double> scores, std::span<const int> labels,
                                   std::size_t resamples, double level, RngSeed seed);

std::string roc_to_csv(const RocCurve& curve);
nlohmann::json report_to_json(const DetectionReport& report);

}  // namespace lyapguard
