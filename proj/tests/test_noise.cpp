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
#include <map>

#include "doctest.h"
#include "error.hpp"
#include "noise.hpp"

using namespace lyapguard;

namespace {

Image gray(std::size_t side, double v) { return Image(side, side, std::vector<double>(side * side, v)); }

Image ramp(std::size_t side) {
  std::vector<double> px(side * side);
  for (std::size_t k = 0; k < px.size(); ++k) px[k] = static_cast<double>(k % 101) / 100.0;
  return Image(side, side, px);
}

std::vector<NoiseModel> all_models() {
  return {GaussianNoise{},      PepperNoise{}, SaltNoise{}, SaltAndPepperNoise{},
          PoissonNoise{},       SpeckleNoise{}, LocalVarGaussianNoise{}};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kPartialFailure;
}

}  // namespace

TEST_CASE("salt with amount 1 gives an all-ones image") {
  const Image out = apply_noise(ramp(10), SaltNoise{1.0}, RngSeed{1});
  for (double v : out.pixels()) CHECK(v == 1.0);
  CHECK(out.provenance() == Provenance(Noisy{"salt", std::nullopt, std::nullopt}));
}

TEST_CASE("gaussian with zero variance is the identity") {
  const Image in = ramp(10);
  const Image out = apply_noise(in, GaussianNoise{0.0, 0.0}, RngSeed{2});
  CHECK(std::equal(in.pixels().begin(), in.pixels().end(), out.pixels().begin()));
}

TEST_CASE("gaussian var 0.01 on mid-gray has the requested empirical variance") {
  const Image in = gray(100, 0.5);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Image out = apply_noise(in, GaussianNoise{0.0, 0.01}, RngSeed{seed});
    double mean = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) mean += out.pixels()[k] - 0.5;
    mean /= static_cast<double>(out.size());
    double var = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) var += std::pow(out.pixels()[k] - 0.5 - mean, 2);
    var /= static_cast<double>(out.size() - 1);
    CHECK(var >= 0.008);
    CHECK(var <= 0.012);
  }
}

TEST_CASE("every model yields valid clipped images, deterministic per seed") {
  const Image in = ramp(30);
  for (const auto& model : all_models()) {
    const Image a = apply_noise(in, model, RngSeed{7});
    const Image b = apply_noise(in, model, RngSeed{7});
    const Image c = apply_noise(in, model, RngSeed{8});
    for (double v : a.pixels()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(std::equal(a.pixels().begin(), a.pixels().end(), b.pixels().begin()));
    CHECK_FALSE(std::equal(a.pixels().begin(), a.pixels().end(), c.pixels().begin()));
    CHECK(std::get<Noisy>(a.provenance()).model == noise_model_name(model));
  }
}

TEST_CASE("pepper never brightens and salt never darkens") {
  const Image in = ramp(30);
  const Image p = apply_noise(in, PepperNoise{0.3}, RngSeed{4});
  const Image s = apply_noise(in, SaltNoise{0.3}, RngSeed{4});
  for (std::size_t k = 0; k < in.size(); ++k) {
    CHECK(p.pixels()[k] <= in.pixels()[k]);
    CHECK(s.pixels()[k] >= in.pixels()[k]);
  }
}

TEST_CASE("salt and pepper hits about amount of pixels, split by salt_fraction") {
  const Image in = gray(100, 0.5);
  const Image out = apply_noise(in, SaltAndPepperNoise{0.2, 0.25}, RngSeed{5});
  std::size_t salt = 0;
  std::size_t pepper = 0;
  for (double v : out.pixels()) {
    salt += v == 1.0;
    pepper += v == 0.0;
  }
  // n = 1e4: 3-sigma binomial bands.
  CHECK(std::abs(static_cast<double>(salt) - 500.0) < 3 * std::sqrt(1e4 * 0.05 * 0.95));
  CHECK(std::abs(static_cast<double>(pepper) - 1500.0) < 3 * std::sqrt(1e4 * 0.15 * 0.85));
}

TEST_CASE("poisson is the identity in expectation") {
  const Image in = gray(100, 0.4);
  const Image out = apply_noise(in, PoissonNoise{}, RngSeed{6});
  double mean = 0.0;
  for (double v : out.pixels()) mean += v;
  mean /= 1e4;
  // Var of one pixel = 0.4 / 255; 3 sigma of the mean over 1e4 pixels.
  CHECK(std::abs(mean - 0.4) < 3.0 * std::sqrt(0.4 / 255.0 / 1e4));
  for (double v : out.pixels()) CHECK(std::abs(v * 255.0 - std::round(v * 255.0)) < 1e-9);
}

TEST_CASE("speckle leaves black pixels black") {
  std::vector<double> px(100, 0.0);
  for (std::size_t k = 50; k < 100; ++k) px[k] = 0.6;
  const Image out = apply_noise(Image(10, 10, px), SpeckleNoise{0.05}, RngSeed{3});
  for (std::size_t k = 0; k < 50; ++k) CHECK(out.pixels()[k] == 0.0);
}

TEST_CASE("local-variance gaussian uses the map, and the default map tracks intensity") {
  std::vector<double> var_map(100, 0.0);
  var_map[0] = 0.04;
  const Image in = gray(10, 0.5);
  const Image out = apply_noise(in, LocalVarGaussianNoise{var_map, 0.05}, RngSeed{9});
  for (std::size_t k = 1; k < 100; ++k) CHECK(out.pixels()[k] == 0.5);
  CHECK(out.pixels()[0] != 0.5);

  std::vector<double> px(100, 0.0);
  px[10] = 1.0;
  const Image dflt = apply_noise(Image(10, 10, px), LocalVarGaussianNoise{}, RngSeed{9});
  for (std::size_t k = 0; k < 100; ++k) {
    if (k != 10) CHECK(dflt.pixels()[k] == 0.0);
  }

  CHECK(code_of([&] { apply_noise(in, LocalVarGaussianNoise{std::vector<double>(99, 0.0), 0.05}, RngSeed{1}); }) ==
        ErrorCode::kDimMismatch);
}

TEST_CASE("parameter validation") {
  CHECK(code_of([] { validate_noise_model(SaltNoise{1.5}); }) == ErrorCode::kBadParam);
  CHECK(code_of([] { validate_noise_model(GaussianNoise{0.0, -1.0}); }) == ErrorCode::kBadParam);
  CHECK(code_of([] { validate_noise_model(SaltAndPepperNoise{0.1, 2.0}); }) == ErrorCode::kBadParam);
  CHECK(code_of([] { noise_model_from_json({{"kind", "blur"}}); }) == ErrorCode::kBadParam);
}

TEST_CASE("noise model JSON round-trips with defaults filled in") {
  for (const auto& model : all_models()) {
    const auto j = noise_model_to_json(model);
    CHECK(noise_model_to_json(noise_model_from_json(j)) == j);
  }
  const auto g = std::get<GaussianNoise>(noise_model_from_json({{"kind", "gaussian"}}));
  CHECK(g.mean == 0.0);
  CHECK(g.var == 0.01);
  const auto sp = std::get<SaltAndPepperNoise>(noise_model_from_json({{"kind", "salt_and_pepper"}}));
  CHECK(sp.amount == 0.05);
  CHECK(sp.salt_fraction == 0.5);
}

TEST_CASE("sample_matched_magnitude") {
  const std::vector<double> one = {2.0};
  CHECK(sample_matched_magnitude(one, RngSeed{1}) == 2.0);
  CHECK(code_of([] { sample_matched_magnitude({}, RngSeed{1}); }) == ErrorCode::kEmptyDistances);

  const std::vector<double> three = {1.0, 2.0, 3.0};
  std::map<double, int> counts;
  const int n = 3000;
  for (int k = 0; k < n; ++k) counts[sample_matched_magnitude(three, derive_seed(RngSeed{42}, k))]++;
  const double sigma = std::sqrt(n * (1.0 / 3.0) * (2.0 / 3.0));
  for (double v : three) CHECK(std::abs(counts[v] - n / 3.0) < 3.0 * sigma);
}

TEST_CASE("perturb_to_magnitude") {
  const Image mid = gray(28, 0.5);
  const Image same = perturb_to_magnitude(mid, 0.0, RngSeed{1});
  CHECK(std::equal(same.pixels().begin(), same.pixels().end(), mid.pixels().begin()));

  const Image moved = perturb_to_magnitude(mid, 0.5, RngSeed{2});
  double norm = 0.0;
  for (std::size_t k = 0; k < mid.size(); ++k) norm += std::pow(moved.pixels()[k] - 0.5, 2);
  CHECK(std::abs(std::sqrt(norm) - 0.5) <= 1e-9);
  const auto& meta = std::get<Noisy>(moved.provenance());
  CHECK(*meta.requested_l2 == 0.5);
  CHECK(std::abs(*meta.achieved_l2 - 0.5) <= 1e-9);

  const Image bright = gray(28, 0.999);
  const Image clipped = perturb_to_magnitude(bright, 5.0, RngSeed{3});
  CHECK(*std::get<Noisy>(clipped.provenance()).achieved_l2 <= 5.0);
  for (double v : clipped.pixels()) CHECK(v <= 1.0);
}
