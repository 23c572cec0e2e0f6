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

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "image.hpp"
#include "json.hpp"
#include "random.hpp"

namespace lyapguard {

// Defaults follow the scikit-image random_noise conventions.
struct GaussianNoise {
  double mean = 0.0;
  double var = 0.01;
};
struct PepperNoise {
  double amount = 0.05;
};
struct SaltNoise {
  double amount = 0.05;
};
struct SaltAndPepperNoise {
  double amount = 0.05;
  double salt_fraction = 0.5;
};
// Counts ~ Poisson(255 x), output counts / 255.
struct PoissonNoise {};
struct SpeckleNoise {
  double var = 0.01;
};
// Additive N(0, var_map[p]). Without an explicit map the variance is
// proportional to pixel intensity, peaking at max_var on the brightest pixel.
struct LocalVarGaussianNoise {
  std::optional<std::vector<double>> var_map;
  double max_var = 0.05;
};

using NoiseModel = std::variant<GaussianNoise, PepperNoise, SaltNoise, SaltAndPepperNoise,
                                PoissonNoise, SpeckleNoise, LocalVarGaussianNoise>;

inline constexpr double kPoissonLevels = 255.0;

std::string noise_model_name(const NoiseModel& model);

// Throws BadParam for out-of-range parameters.
void validate_noise_model(const NoiseModel& model);

// {"kind": "...", "params": {...}}; kinds: gaussian, pepper, salt,
// salt_and_pepper, poisson, speckle, local_var_gaussian.
NoiseModel noise_model_from_json(const nlohmann::json& j);
nlohmann::json noise_model_to_json(const NoiseModel& model);

// Result is clipped to [0,1] and tagged Noisy{model name}.
Image apply_noise(const Image& image, const NoiseModel& model, RngSeed seed);

// Uniform draw from the empirical distribution of distances.
double sample_matched_magnitude(std::span<const double> distances, RngSeed seed);

// Adds an isotropic Gaussian direction scaled to L2 norm l2_target, then
// clips. The provenance records the requested and post-clip norms.
Image perturb_to_magnitude(const Image& image, double l2_target, RngSeed seed);

}  // namespace lyapguard
