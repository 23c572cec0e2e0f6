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
#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "error.hpp"

namespace lyapguard {
namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "scores and labels differ in length");
  }
  bool pos = false;
  bool neg = false;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] != 0 && labels[k] != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    if (std::isnan(scores[k])) throw Error(ErrorCode::kInvalidArgument, "scores must not be NaN");
    (labels[k] == 1 ? pos : neg) = true;
  }
  if (!pos || !neg) throw Error(ErrorCode::kSingleClass, "roc needs both positive and negative labels");
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? std::numeric_limits<double>::quiet_NaN()
                  : static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json nan_to_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

}  // namespace

RocCurve roc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const auto total_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t total_neg = labels.size() - total_pos;

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  double area = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      (labels[order[k]] == 1 ? tp : fp) += 1;
      ++k;
    }
    const RocPoint p{s, ratio(fp, total_neg), ratio(tp, total_pos)};
    const RocPoint& prev = curve.points.back();
    area += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) * 0.5;
    curve.points.push_back(p);
  }
  curve.auroc = area;
  return curve;
}

double auroc_pair_count(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

DetectionReport detection_report(std::span<const Decision> decisions,
                                 std::span<const Provenance> provenance) {
  if (decisions.empty()) throw Error(ErrorCode::kEmptyInput, "no decisions to report on");
  if (decisions.size() != provenance.size()) {
    throw Error(ErrorCode::kLengthMismatch, "decisions and provenance differ in length");
  }
  DetectionCounts c;
  for (std::size_t k = 0; k < decisions.size(); ++k) {
    if (is_adversarial(provenance[k])) {
      ++c.n_adv;
      if (decisions[k] == Decision::kReject) ++c.rejected_adv;
    } else {
      ++c.n_legit;
      if (decisions[k] == Decision::kAccept) ++c.accepted_legit;
    }
  }
  DetectionReport r;
  r.counts = c;
  r.true_acceptance_rate = ratio(c.accepted_legit, c.n_legit);
  r.false_alarm_rate = c.n_legit == 0 ? std::numeric_limits<double>::quiet_NaN()
                                      : ratio(c.n_legit - c.accepted_legit, c.n_legit);
  r.attacker_rejection_rate = ratio(c.rejected_adv, c.n_adv);
  return r;
}

ConfidenceInterval bootstrap_auroc(std::span<const double> scores, std::span<const int> labels,
                                   std::size_t resamples, double level, RngSeed seed) {
  check_inputs(scores, labels);
  if (resamples == 0) throw Error(ErrorCode::kBadParam, "resamples must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::kBadParam, "level must be in (0,1)");
  std::vector<double> pos;
  std::vector<double> neg;
  for (std::size_t k = 0; k < scores.size(); ++k) (labels[k] == 1 ? pos : neg).push_back(scores[k]);

  Rng rng = make_rng(seed);
  std::uniform_int_distribution<std::size_t> pick_pos(0, pos.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_neg(0, neg.size() - 1);
  std::vector<double> s(scores.size());
  std::vector<int> l(scores.size());
  std::fill(l.begin(), l.begin() + static_cast<std::ptrdiff_t>(pos.size()), 1);
  std::fill(l.begin() + static_cast<std::ptrdiff_t>(pos.size()), l.end(), 0);
  std::vector<double> stats;
  stats.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (std::size_t k = 0; k < pos.size(); ++k) s[k] = pos[pick_pos(rng)];
    for (std::size_t k = 0; k < neg.size(); ++k) s[pos.size() + k] = neg[pick_neg(rng)];
    stats.push_back(roc(s, l).auroc);
  }
  const double alpha = (1.0 - level) / 2.0;
  ConfidenceInterval ci;
  ci.estimate = roc(scores, labels).auroc;
  ci.lower = quantile_midpoint(stats, alpha);
  ci.upper = quantile_midpoint(stats, 1.0 - alpha);
  return ci;
}

std::string roc_to_csv(const RocCurve& curve) {
  std::string out = "threshold,fpr,tpr\n";
  char buf[96];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    out += buf;
  }
  return out;
}

nlohmann::json report_to_json(const DetectionReport& report) {
  return {{"true_acceptance_rate", nan_to_null(report.true_acceptance_rate)},
          {"false_alarm_rate", nan_to_null(report.false_alarm_rate)},
          {"attacker_rejection_rate", nan_to_null(report.attacker_rejection_rate)},
          {"counts",
           {{"n_legit", report.counts.n_legit},
            {"n_adv", report.counts.n_adv},
            {"accepted_legit", report.counts.accepted_legit},
            {"rejected_adv", report.counts.rejected_adv}}}};
}

}  // namespace lyapguard
