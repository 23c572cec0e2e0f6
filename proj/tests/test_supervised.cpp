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
#include <cmath>

#include <functional>
#include <numeric>

#include "doctest.h"
#include "error.hpp"
#include "supervised.hpp"

using namespace lyapguard;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kPartialFailure;
}

FeatureMatrix from_values(std::size_t dim, std::vector<double> v, const std::string& prefix = "r") {
  const std::size_t n = v.size() / dim;
  std::vector<RowMeta> meta(n);
  for (std::size_t k = 0; k < n; ++k) meta[k].id = prefix + std::to_string(k);
  return FeatureMatrix(dim, std::move(v), std::move(meta));
}

FeatureMatrix cloud(std::size_t n, std::size_t dim, double shift, RngSeed seed, const std::string& prefix) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n * dim);
  for (auto& x : v) x = g(rng) + shift;
  return from_values(dim, std::move(v), prefix);
}

// Deterministic, not separable: the label depends on a term absent from the features.
void pinned_problem(FeatureMatrix& fm, std::vector<int>& y) {
  std::vector<double> v;
  y.clear();
  for (int k = 0; k < 40; ++k) {
    const double a = std::sin(0.7 * k), b = 2.0 * std::cos(1.3 * k) + 1.0, c = (k % 7) / 7.0;
    v.insert(v.end(), {a, b, c});
    y.push_back(a + 0.5 * b + std::sin(5.0 * k) > 0.8 ? 1 : 0);
  }
  fm = from_values(3, std::move(v));
}

}  // namespace

TEST_CASE("separable 1-D data is fit perfectly") {
  const auto fm = from_values(1, {-1.0, -1.0, -1.0, 1.0, 1.0, 1.0});
  const std::vector<int> y = {0, 0, 0, 1, 1, 1};
  const auto m = logistic_fit(fm, y);
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    CHECK((logistic_score(m, fm.row(r)) > 0.5) == (y[r] == 1));
  }
  CHECK(m.weights[0] > 0.0);
}

TEST_CASE("identical classes give zero weights") {
  const auto fm = from_values(2, {0.3, 1.0, -0.7, 2.0, 0.3, 1.0, -0.7, 2.0});
  // Rows 0/2 and 1/3 are identical, so each feature vector carries both labels.
  const auto m = logistic_fit(fm, std::vector<int>{0, 0, 1, 1});
  CHECK(std::abs(m.weights[0]) < 1e-6);
  CHECK(std::abs(m.weights[1]) < 1e-6);
  CHECK(std::abs(m.bias) < 1e-6);
  CHECK(m.converged);
}

TEST_CASE("logistic_fit errors") {
  const auto fm = from_values(1, {1.0, 2.0, 3.0});
  CHECK(code_of([&] { logistic_fit(fm, std::vector<int>{1, 1, 1}); }) == ErrorCode::kSingleClass);
  CHECK(code_of([&] { logistic_fit(fm, std::vector<int>{1, 0}); }) == ErrorCode::kLengthMismatch);
  CHECK(code_of([&] { logistic_fit(from_values(1, {1.0}), std::vector<int>{1}); }) == ErrorCode::kTooFewPoints);
  LogisticConfig bad;
  bad.tol = 0.0;
  CHECK(code_of([&] { logistic_fit(fm, std::vector<int>{1, 0, 1}, bad); }) == ErrorCode::kBadParam);
}

TEST_CASE("logistic_score limits") {
  LogisticModel m;
  m.weights = {0.0, 0.0};
  m.standardizer.mean = {0.0, 0.0};
  m.standardizer.std = {1.0, 1.0};
  CHECK(logistic_score(m, std::vector<double>{5.0, -3.0}) == 0.5);
  m.bias = 50.0;
  CHECK(logistic_score(m, std::vector<double>{5.0, -3.0}) > 1.0 - 1e-15);
  m.bias = -800.0;
  const double s = logistic_score(m, std::vector<double>{0.0, 0.0});
  CHECK(s >= 0.0);
  CHECK(s < 1e-300);
}

TEST_CASE("pinned model score") {
  FeatureMatrix fm(3, {}, {});
  std::vector<int> y;
  pinned_problem(fm, y);
  const auto m = logistic_fit(fm, y);
  CHECK(m.converged);
  const std::vector<double> point = {0.3, -0.2, 0.5};
  const double s = logistic_score(m, point);
  // Independent quasi-Newton solve of the same objective (gradient norm 4e-11).
  CHECK(std::abs(s - 0.22377601928052634) < 1e-6);
  CHECK(std::abs(m.bias - 0.25298539) < 1e-5);
  // Regression pin.
  CHECK(std::abs(s - 0.22377603219179698) < 1e-12);
}

TEST_CASE("standardization") {
  const auto fm = cloud(100, 3, 4.0, RngSeed{3}, "s");
  const auto st = Standardizer::fit(fm);
  std::vector<double> sum(3, 0.0), sq(3, 0.0);
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    const auto z = st.apply(fm.row(r));
    for (std::size_t c = 0; c < 3; ++c) {
      sum[c] += z[c];
      sq[c] += z[c] * z[c];
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(std::abs(sum[c] / 100.0) < 1e-9);
    CHECK(std::abs(std::sqrt(sq[c] / 100.0) - 1.0) < 1e-9);
  }
  const auto flat = Standardizer::fit(from_values(2, {1.0, 5.0, 2.0, 5.0}));
  CHECK(flat.std[1] == 1.0);
  CHECK(flat.apply(std::vector<double>{1.5, 5.0})[1] == 0.0);
}

TEST_CASE("scaling a raw feature changes nothing") {
  FeatureMatrix fm(3, {}, {});
  std::vector<int> y;
  pinned_problem(fm, y);
  std::vector<double> scaled(fm.values().begin(), fm.values().end());
  for (std::size_t r = 0; r < fm.rows(); ++r) scaled[r * 3 + 1] *= 10.0;
  const auto fs = from_values(3, scaled);
  const auto a = logistic_fit(fm, y);
  const auto b = logistic_fit(fs, y);
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    const auto za = a.standardizer.apply(fm.row(r));
    const auto zb = b.standardizer.apply(fs.row(r));
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(za[c] - zb[c]) < 1e-9);
    CHECK(std::abs(logistic_score(a, fm.row(r)) - logistic_score(b, fs.row(r))) < 1e-9);
  }
}

TEST_CASE("loss decreases across accepted steps") {
  const auto neg = cloud(60, 2, 0.0, RngSeed{11}, "n");
  auto all = cloud(60, 2, 1.0, RngSeed{12}, "p");
  std::vector<int> y(60, 1);
  all.append(neg);
  y.insert(y.end(), 60, 0);
  const auto m = logistic_fit(all, y);
  REQUIRE(m.loss_history.size() >= 2);
  for (std::size_t k = 1; k < m.loss_history.size(); ++k) CHECK(m.loss_history[k] < m.loss_history[k - 1]);
  CHECK(m.iterations + 1 == static_cast<int>(m.loss_history.size()));
}

TEST_CASE("json round-trip") {
  FeatureMatrix fm(3, {}, {});
  std::vector<int> y;
  pinned_problem(fm, y);
  const auto m = logistic_fit(fm, y);
  const auto back = logistic_from_json(nlohmann::json::parse(logistic_to_json(m).dump()));
  for (std::size_t r = 0; r < fm.rows(); ++r) CHECK(logistic_score(back, fm.row(r)) == logistic_score(m, fm.row(r)));
  auto j = logistic_to_json(m);
  j["format"] = "something.else";
  CHECK(code_of([&] { logistic_from_json(j); }) == ErrorCode::kFormat);
}

TEST_CASE("leave-one-attack-out") {
  const auto natural = cloud(200, 2, 0.0, RngSeed{21}, "nat");
  SUBCASE("one attack is not enough") {
    std::map<std::string, FeatureMatrix> one = {{"a", cloud(50, 2, 1.0, RngSeed{22}, "a")}};
    CHECK(code_of([&] { leave_one_attack_out(natural, one); }) == ErrorCode::kTooFewAttacks);
  }
  SUBCASE("identical attack families are symmetric") {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto nat = cloud(200, 2, 0.0, RngSeed{seed * 100}, "nat");
      std::map<std::string, FeatureMatrix> attacks = {
          {"a", cloud(100, 2, 1.0, RngSeed{seed * 100 + 1}, "a")},
          {"b", cloud(100, 2, 1.0, RngSeed{seed * 100 + 2}, "b")}};
      const auto res = leave_one_attack_out(nat, attacks);
      REQUIRE(res.size() == 2);
      CHECK(res.at("a").n_train == 100 + 100);
      CHECK(res.at("a").n_test == 100 + 100);
      worst = std::max(worst, std::abs(res.at("a").curve.auroc - res.at("b").curve.auroc));
    }
    CHECK(worst < 0.05);
  }
  SUBCASE("left-out attack matching a trained one scores like in-distribution validation") {
    std::map<std::string, FeatureMatrix> attacks = {{"a", cloud(300, 2, 1.0, RngSeed{31}, "a")},
                                                    {"b", cloud(300, 2, 1.0, RngSeed{32}, "b")}};
    const auto res = leave_one_attack_out(natural, attacks);
    // In-distribution: train on natural half + a, test on held-out natural + fresh draw of a.
    auto train = natural.select([] {
      std::vector<std::size_t> idx(100);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      return idx;
    }());
    std::vector<int> y(100, 0);
    train.append(attacks.at("a"));
    y.insert(y.end(), 300, 1);
    const auto m = logistic_fit(train, y);
    const auto fresh = cloud(300, 2, 1.0, RngSeed{33}, "f");
    std::vector<double> s;
    std::vector<int> lab;
    for (std::size_t r = 100; r < 200; ++r) {
      s.push_back(logistic_score(m, natural.row(r)));
      lab.push_back(0);
    }
    for (std::size_t r = 0; r < fresh.rows(); ++r) {
      s.push_back(logistic_score(m, fresh.row(r)));
      lab.push_back(1);
    }
    const double in_dist = roc(s, lab).auroc;
    CHECK(std::abs(res.at("b").curve.auroc - in_dist) < 0.05);
  }
}
