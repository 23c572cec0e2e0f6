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
#include "supervised.hpp"

#include <cmath>
#include <numeric>

#include "error.hpp"

namespace lyapguard {
namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct Problem {
  std::vector<std::vector<double>> x;
  std::span<const int> y;
  double l2;

  // Mean negative log-likelihood plus (l2/2)|w|^2; bias unpenalized.
  double loss(std::span<const double> w, double b) const {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double z = std::inner_product(w.begin(), w.end(), x[i].begin(), b);
      total += softplus(z) - (y[i] == 1 ? z : 0.0);
    }
    double reg = 0.0;
    for (double v : w) reg += v * v;
    return total / static_cast<double>(x.size()) + 0.5 * l2 * reg;
  }

  void gradient(std::span<const double> w, double b, std::vector<double>& gw, double& gb) const {
    gw.assign(w.size(), 0.0);
    gb = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double z = std::inner_product(w.begin(), w.end(), x[i].begin(), b);
      const double r = sigmoid(z) - (y[i] == 1 ? 1.0 : 0.0);
      for (std::size_t c = 0; c < w.size(); ++c) gw[c] += r * x[i][c];
      gb += r;
    }
    const double n = static_cast<double>(x.size());
    for (std::size_t c = 0; c < w.size(); ++c) gw[c] = gw[c] / n + l2 * w[c];
    gb /= n;
  }
};

}  // namespace

Standardizer Standardizer::fit(const FeatureMatrix& features) {
  const std::size_t n = features.rows();
  const std::size_t d = features.dim();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.std.assign(d, 1.0);
  if (n == 0) return s;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += features.at(r, c);
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t c = 0; c < d; ++c) {
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (features.at(r, c) - s.mean[c]) * (features.at(r, c) - s.mean[c]);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    s.std[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> point) const {
  if (point.size() != mean.size()) throw Error(ErrorCode::kDimMismatch, "point dimension does not match model");
  std::vector<double> out(point.size());
  for (std::size_t c = 0; c < point.size(); ++c) out[c] = (point[c] - mean[c]) / std[c];
  return out;
}

LogisticModel logistic_fit(const FeatureMatrix& features, std::span<const int> labels,
                           const LogisticConfig& config) {
  if (labels.size() != features.rows()) throw Error(ErrorCode::kLengthMismatch, "labels and rows differ in count");
  if (features.rows() < 2) throw Error(ErrorCode::kTooFewPoints, "logistic fit needs N >= 2");
  bool pos = false;
  bool neg = false;
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    (l == 1 ? pos : neg) = true;
  }
  if (!pos || !neg) throw Error(ErrorCode::kSingleClass, "logistic fit needs both classes");
  if (!(config.l2_penalty >= 0.0) || config.max_iters < 0 || !(config.tol > 0.0)) {
    throw Error(ErrorCode::kBadParam, "l2_penalty >= 0, max_iters >= 0 and tol > 0 required");
  }

  LogisticModel model;
  model.standardizer = Standardizer::fit(features);
  Problem prob{{}, labels, config.l2_penalty};
  for (std::size_t r = 0; r < features.rows(); ++r) prob.x.push_back(model.standardizer.apply(features.row(r)));

  const std::size_t d = features.dim();
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  std::vector<double> gw;
  double gb = 0.0;
  double f = prob.loss(w, b);
  model.loss_history.push_back(f);

  std::vector<double> w_new(d);
  double step = 1.0;
  for (int it = 0; it < config.max_iters; ++it) {
    prob.gradient(w, b, gw, gb);
    double g2 = gb * gb;
    for (double g : gw) g2 += g * g;
    if (std::sqrt(g2) < config.tol) {
      model.converged = true;
      break;
    }
    // Armijo backtracking; the trial step grows again after each success.
    step = std::min(step * 2.0, 64.0);
    double f_new = f;
    bool accepted = false;
    while (step > 1e-12) {
      for (std::size_t c = 0; c < d; ++c) w_new[c] = w[c] - step * gw[c];
      const double b_new = b - step * gb;
      f_new = prob.loss(w_new, b_new);
      if (f_new <= f - 0.5 * step * g2) {
        w = w_new;
        b = b_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    model.iterations = it + 1;
    if (!accepted) break;
    f = f_new;
    model.loss_history.push_back(f);
  }
  if (!model.converged) {
    prob.gradient(w, b, gw, gb);
    double g2 = gb * gb;
    for (double g : gw) g2 += g * g;
    model.converged = std::sqrt(g2) < config.tol;
  }
  model.weights = std::move(w);
  model.bias = b;
  return model;
}

double logistic_score(const LogisticModel& model, std::span<const double> point) {
  const auto z = model.standardizer.apply(point);
  return sigmoid(std::inner_product(model.weights.begin(), model.weights.end(), z.begin(), model.bias));
}

nlohmann::json logistic_to_json(const LogisticModel& model) {
  return {{"format", "lyapguard.logistic"},
          {"version", 1},
          {"weights", model.weights},
          {"bias", model.bias},
          {"mean", model.standardizer.mean},
          {"std", model.standardizer.std},
          {"converged", model.converged},
          {"iterations", model.iterations}};
}

LogisticModel logistic_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "lyapguard.logistic" || j.at("version").get<int>() != 1) {
      throw Error(ErrorCode::kFormat, "not a version 1 logistic model document");
    }
    LogisticModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.standardizer.mean = j.at("mean").get<std::vector<double>>();
    m.standardizer.std = j.at("std").get<std::vector<double>>();
    m.converged = j.value("converged", false);
    m.iterations = j.value("iterations", 0);
    const std::size_t d = m.weights.size();
    if (d == 0 || m.standardizer.mean.size() != d || m.standardizer.std.size() != d) {
      throw Error(ErrorCode::kFormat, "logistic parameter sizes disagree");
    }
    for (double s : m.standardizer.std) {
      if (!(s > 0.0)) throw Error(ErrorCode::kFormat, "standardizer std must be > 0");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("logistic json: ") + e.what());
  }
}

std::map<std::string, LoaoResult> leave_one_attack_out(
    const FeatureMatrix& natural, const std::map<std::string, FeatureMatrix>& per_attack,
    const LogisticConfig& config) {
  if (per_attack.size() < 2) throw Error(ErrorCode::kTooFewAttacks, "leave-one-attack-out needs >= 2 attacks");
  if (natural.rows() < 2) throw Error(ErrorCode::kTooFewPoints, "need >= 2 natural rows");

  const std::size_t half = natural.rows() / 2;
  std::vector<std::size_t> train_idx(half);
  std::vector<std::size_t> test_idx(natural.rows() - half);
  std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
  std::iota(test_idx.begin(), test_idx.end(), half);
  const FeatureMatrix natural_train = natural.select(train_idx);
  const FeatureMatrix natural_test = natural.select(test_idx);

  std::map<std::string, LoaoResult> out;
  for (const auto& [left_out, held] : per_attack) {
    FeatureMatrix train = natural_train;
    std::vector<int> train_labels(natural_train.rows(), 0);
    for (const auto& [name, fm] : per_attack) {
      if (name == left_out) continue;
      train.append(fm);
      train_labels.insert(train_labels.end(), fm.rows(), 1);
    }
    const LogisticModel model = logistic_fit(train, train_labels, config);

    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t r = 0; r < natural_test.rows(); ++r) {
      scores.push_back(logistic_score(model, natural_test.row(r)));
      labels.push_back(0);
    }
    for (std::size_t r = 0; r < held.rows(); ++r) {
      scores.push_back(logistic_score(model, held.row(r)));
      labels.push_back(1);
    }
    LoaoResult res;
    res.left_out = left_out;
    res.curve = roc(scores, labels);
    res.n_train = train.rows();
    res.n_test = scores.size();
    res.converged = model.converged;
    out.emplace(left_out, std::move(res));
  }
  return out;
}

}  // namespace lyapguard
