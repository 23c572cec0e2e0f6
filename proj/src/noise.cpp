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
#include "noise.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace lyapguard {
namespace {

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::kBadParam, std::string(what) + " must be in [0,1]");
  }
}

void check_var(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::kBadParam, std::string(what) + " must be a finite value >= 0");
  }
}

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

}  // namespace

std::string noise_model_name(const NoiseModel& model) {
  return std::visit(Overloaded{
                        [](const GaussianNoise&) { return "gaussian"; },
                        [](const PepperNoise&) { return "pepper"; },
                        [](const SaltNoise&) { return "salt"; },
                        [](const SaltAndPepperNoise&) { return "salt_and_pepper"; },
                        [](const PoissonNoise&) { return "poisson"; },
                        [](const SpeckleNoise&) { return "speckle"; },
                        [](const LocalVarGaussianNoise&) { return "local_var_gaussian"; },
                    },
                    model);
}

void validate_noise_model(const NoiseModel& model) {
  std::visit(Overloaded{
                 [](const GaussianNoise& g) {
                   check_var(g.var, "gaussian var");
                   if (!std::isfinite(g.mean)) throw Error(ErrorCode::kBadParam, "gaussian mean must be finite");
                 },
                 [](const PepperNoise& p) { check_unit(p.amount, "amount"); },
                 [](const SaltNoise& s) { check_unit(s.amount, "amount"); },
                 [](const SaltAndPepperNoise& s) {
                   check_unit(s.amount, "amount");
                   check_unit(s.salt_fraction, "salt_fraction");
                 },
                 [](const PoissonNoise&) {},
                 [](const SpeckleNoise& s) { check_var(s.var, "speckle var"); },
                 [](const LocalVarGaussianNoise& l) {
                   check_var(l.max_var, "max_var");
                   if (l.var_map) {
                     for (double v : *l.var_map) check_var(v, "var_map entry");
                   }
                 },
             },
             model);
}

NoiseModel noise_model_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  NoiseModel model;
  if (kind == "gaussian") {
    model = GaussianNoise{params.value("mean", 0.0), params.value("var", 0.01)};
  } else if (kind == "pepper") {
    model = PepperNoise{params.value("amount", 0.05)};
  } else if (kind == "salt") {
    model = SaltNoise{params.value("amount", 0.05)};
  } else if (kind == "salt_and_pepper" || kind == "s&p") {
    model = SaltAndPepperNoise{params.value("amount", 0.05), params.value("salt_fraction", 0.5)};
  } else if (kind == "poisson") {
    model = PoissonNoise{};
  } else if (kind == "speckle") {
    model = SpeckleNoise{params.value("var", 0.01)};
  } else if (kind == "local_var_gaussian" || kind == "localvar") {
    LocalVarGaussianNoise lv;
    lv.max_var = params.value("max_var", 0.05);
    if (params.contains("var_map")) lv.var_map = params.at("var_map").get<std::vector<double>>();
    model = std::move(lv);
  } else {
    throw Error(ErrorCode::kBadParam, "unknown noise kind '" + kind + "'");
  }
  validate_noise_model(model);
  return model;
}

nlohmann::json noise_model_to_json(const NoiseModel& model) {
  nlohmann::json params = nlohmann::json::object();
  std::visit(Overloaded{
                 [&](const GaussianNoise& g) {
                   params["mean"] = g.mean;
                   params["var"] = g.var;
                 },
                 [&](const PepperNoise& p) { params["amount"] = p.amount; },
                 [&](const SaltNoise& s) { params["amount"] = s.amount; },
                 [&](const SaltAndPepperNoise& s) {
                   params["amount"] = s.amount;
                   params["salt_fraction"] = s.salt_fraction;
                 },
                 [](const PoissonNoise&) {},
                 [&](const SpeckleNoise& s) { params["var"] = s.var; },
                 [&](const LocalVarGaussianNoise& l) {
                   params["max_var"] = l.max_var;
                   if (l.var_map) params["var_map"] = *l.var_map;
                 },
             },
             model);
  return {{"kind", noise_model_name(model)}, {"params", params}};
}

Image apply_noise(const Image& image, const NoiseModel& model, RngSeed seed) {
  validate_noise_model(model);
  const auto in = image.pixels();
  std::vector<double> out(in.begin(), in.end());
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::visit(Overloaded{
                 [&](const GaussianNoise& g) {
                   std::normal_distribution<double> n(g.mean, std::sqrt(g.var));
                   for (auto& v : out) v += n(rng);
                 },
                 [&](const PepperNoise& p) {
                   for (auto& v : out) {
                     if (unit(rng) < p.amount) v = 0.0;
                   }
                 },
                 [&](const SaltNoise& s) {
                   for (auto& v : out) {
                     if (unit(rng) < s.amount) v = 1.0;
                   }
                 },
                 [&](const SaltAndPepperNoise& s) {
                   for (auto& v : out) {
                     const bool hit = unit(rng) < s.amount;
                     const bool salt = unit(rng) < s.salt_fraction;
                     if (hit) v = salt ? 1.0 : 0.0;
                   }
                 },
                 [&](const PoissonNoise&) {
                   for (auto& v : out) {
                     const double lambda = v * kPoissonLevels;
                     if (lambda <= 0.0) continue;
                     std::poisson_distribution<long> pd(lambda);
                     v = static_cast<double>(pd(rng)) / kPoissonLevels;
                   }
                 },
                 [&](const SpeckleNoise& s) {
                   std::normal_distribution<double> n(0.0, std::sqrt(s.var));
                   for (auto& v : out) v += v * n(rng);
                 },
                 [&](const LocalVarGaussianNoise& l) {
                   std::vector<double> vars;
                   if (l.var_map) {
                     if (l.var_map->size() != out.size()) {
                       throw Error(ErrorCode::kDimMismatch,
                                   "var_map has " + std::to_string(l.var_map->size()) +
                                       " entries for " + std::to_string(out.size()) + " pixels");
                     }
                     vars = *l.var_map;
                   } else {
                     const double peak = *std::max_element(in.begin(), in.end());
                     vars.resize(out.size(), 0.0);
                     if (peak > 0.0) {
                       for (std::size_t k = 0; k < vars.size(); ++k) vars[k] = l.max_var * in[k] / peak;
                     }
                   }
                   std::normal_distribution<double> n(0.0, 1.0);
                   for (std::size_t k = 0; k < out.size(); ++k) out[k] += std::sqrt(vars[k]) * n(rng);
                 },
             },
             model);

  for (auto& v : out) v = clip01(v);
  Image noisy = image.with_pixels(std::move(out));
  noisy.set_provenance(Noisy{noise_model_name(model), {}, {}});
  return noisy;
}

double sample_matched_magnitude(std::span<const double> distances, RngSeed seed) {
  if (distances.empty()) throw Error(ErrorCode::kEmptyDistances, "no distances to sample from");
  for (double d : distances) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw Error(ErrorCode::kBadParam, "distances must be finite and >= 0");
    }
  }
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, distances.size() - 1);
  return distances[pick(rng)];
}

Image perturb_to_magnitude(const Image& image, double l2_target, RngSeed seed) {
  if (!(l2_target >= 0.0) || !std::isfinite(l2_target)) {
    throw Error(ErrorCode::kBadParam, "l2_target must be finite and >= 0");
  }
  const auto in = image.pixels();
  std::vector<double> out(in.begin(), in.end());
  if (l2_target > 0.0) {
    Rng rng = make_rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> dir(out.size());
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& v : dir) {
        v = n(rng);
        norm2 += v * v;
      }
    } while (norm2 == 0.0);
    const double scale = l2_target / std::sqrt(norm2);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = clip01(out[k] + scale * dir[k]);
  }
  double achieved = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) achieved += (out[k] - in[k]) * (out[k] - in[k]);
  Image noisy = image.with_pixels(std::move(out));
  noisy.set_provenance(Noisy{"matched_l2", l2_target, std::sqrt(achieved)});
  return noisy;
}

}  // namespace lyapguard
