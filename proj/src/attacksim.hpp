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
#include <optional>
#include <span>
#include <vector>

#include "image.hpp"
#include "json.hpp"
#include "random.hpp"

namespace lyapguard {

struct SoftmaxModel {
  std::size_t classes = 0;
  std::size_t pixels = 0;
  // classes x pixels, row-major.
  std::vector<double> weights;
  std::vector<double> bias;
  double train_accuracy = 0.0;

  std::vector<double> logits(std::span<const double> x) const;
  std::vector<double> probabilities(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
};

struct SoftmaxConfig {
  double lr = 0.5;
  int epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

// Labels must be in [0, C) where C = 1 + max label; at least two distinct.
SoftmaxModel softmax_train(std::span<const Image> images, const SoftmaxConfig& config);

double cross_entropy(const SoftmaxModel& model, std::span<const double> x, int label);
// d loss / d x = W^T (p - e_label).
std::vector<double> input_gradient(const SoftmaxModel& model, std::span<const double> x, int label);

struct FgsmParams {
  double epsilon = 0.25;
  bool targeted = false;
  std::optional<int> target;
};

Image fgsm(const SoftmaxModel& model, const Image& image, const FgsmParams& params);

nlohmann::json softmax_to_json(const SoftmaxModel& model);
SoftmaxModel softmax_from_json(const nlohmann::json& j);

}  // namespace lyapguard
