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
#include "attacksim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "error.hpp"

namespace lyapguard {
namespace {

void check_dims(const SoftmaxModel& model, std::span<const double> x) {
  if (x.size() != model.pixels) {
    throw Error(ErrorCode::kDimMismatch, "input has " + std::to_string(x.size()) + " pixels, model expects " +
                                             std::to_string(model.pixels));
  }
}

void check_class(const SoftmaxModel& model, int c) {
  if (c < 0 || static_cast<std::size_t>(c) >= model.classes) {
    throw Error(ErrorCode::kInvalidArgument, "class " + std::to_string(c) + " out of range");
  }
}

}  // namespace

std::vector<double> SoftmaxModel::logits(std::span<const double> x) const {
  check_dims(*this, x);
  std::vector<double> z(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const double* w = weights.data() + c * pixels;
    z[c] = std::inner_product(x.begin(), x.end(), w, bias[c]);
  }
  return z;
}

std::vector<double> SoftmaxModel::probabilities(std::span<const double> x) const {
  auto z = logits(x);
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    total += v;
  }
  for (auto& v : z) v /= total;
  return z;
}

int SoftmaxModel::predict(std::span<const double> x) const {
  const auto z = logits(x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

SoftmaxModel softmax_train(std::span<const Image> images, const SoftmaxConfig& config) {
  if (images.empty()) throw Error(ErrorCode::kEmptyInput, "no training images");
  if (!(config.lr > 0.0) || config.epochs < 0 || config.batch_size == 0) {
    throw Error(ErrorCode::kBadParam, "lr > 0, epochs >= 0 and batch_size >= 1 required");
  }
  const std::size_t p = images.front().size();
  int max_label = -1;
  std::vector<int> distinct;
  for (const auto& img : images) {
    if (!img.label()) throw Error(ErrorCode::kMissingLabel, "training image '" + img.id() + "' has no label");
    if (*img.label() < 0) throw Error(ErrorCode::kInvalidArgument, "labels must be >= 0");
    if (img.size() != p) throw Error(ErrorCode::kDimMismatch, "training images differ in size");
    max_label = std::max(max_label, *img.label());
    if (std::find(distinct.begin(), distinct.end(), *img.label()) == distinct.end()) distinct.push_back(*img.label());
  }
  if (distinct.size() < 2) throw Error(ErrorCode::kSingleClass, "softmax training needs >= 2 classes");

  SoftmaxModel model;
  model.classes = static_cast<std::size_t>(max_label) + 1;
  model.pixels = p;
  model.weights.assign(model.classes * p, 0.0);
  model.bias.assign(model.classes, 0.0);

  Rng rng = make_rng(RngSeed{config.seed});
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> gw(model.weights.size());
  std::vector<double> gb(model.classes);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const Image& img = images[order[k]];
        const auto x = img.pixels();
        auto prob = model.probabilities(x);
        prob[static_cast<std::size_t>(*img.label())] -= 1.0;
        for (std::size_t c = 0; c < model.classes; ++c) {
          double* g = gw.data() + c * p;
          for (std::size_t j = 0; j < p; ++j) g[j] += prob[c] * x[j];
          gb[c] += prob[c];
        }
      }
      const double scale = config.lr / static_cast<double>(stop - start);
      for (std::size_t k = 0; k < gw.size(); ++k) model.weights[k] -= scale * gw[k];
      for (std::size_t c = 0; c < model.classes; ++c) model.bias[c] -= scale * gb[c];
    }
  }

  std::size_t correct = 0;
  for (const auto& img : images) correct += model.predict(img.pixels()) == *img.label() ? 1 : 0;
  model.train_accuracy = static_cast<double>(correct) / static_cast<double>(images.size());
  return model;
}

double cross_entropy(const SoftmaxModel& model, std::span<const double> x, int label) {
  check_class(model, label);
  const auto z = model.logits(x);
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - mx);
  return mx + std::log(total) - z[static_cast<std::size_t>(label)];
}

std::vector<double> input_gradient(const SoftmaxModel& model, std::span<const double> x, int label) {
  check_class(model, label);
  auto prob = model.probabilities(x);
  prob[static_cast<std::size_t>(label)] -= 1.0;
  std::vector<double> g(model.pixels, 0.0);
  for (std::size_t c = 0; c < model.classes; ++c) {
    const double* w = model.weights.data() + c * model.pixels;
    for (std::size_t j = 0; j < model.pixels; ++j) g[j] += prob[c] * w[j];
  }
  return g;
}

Image fgsm(const SoftmaxModel& model, const Image& image, const FgsmParams& params) {
  if (!(params.epsilon >= 0.0) || !std::isfinite(params.epsilon)) {
    throw Error(ErrorCode::kBadParam, "epsilon must be finite and >= 0");
  }
  int label = 0;
  double direction = 1.0;
  if (params.targeted) {
    if (!params.target) throw Error(ErrorCode::kMissingLabel, "targeted attack needs a target class");
    label = *params.target;
    direction = -1.0;
  } else {
    if (!image.label()) throw Error(ErrorCode::kMissingLabel, "image '" + image.id() + "' has no label");
    label = *image.label();
  }
  const auto x = image.pixels();
  const auto g = input_gradient(model, x, label);
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double s = g[j] > 0.0 ? 1.0 : (g[j] < 0.0 ? -1.0 : 0.0);
    double v = std::clamp(x[j] + direction * params.epsilon * s, 0.0, 1.0);
    // x + eps can round one ulp past eps; pull back so |x' - x| <= eps holds exactly
    while (std::abs(v - x[j]) > params.epsilon) v = std::nextafter(v, x[j]);
    out[j] = v;
  }
  Image adv = image.with_pixels(std::move(out));
  adv.set_provenance(Adversarial{"fgsm", params.targeted, params.targeted ? params.target : std::nullopt});
  return adv;
}

nlohmann::json softmax_to_json(const SoftmaxModel& model) {
  return {{"format", "lyapguard.softmax"}, {"version", 1},
          {"classes", model.classes},      {"pixels", model.pixels},
          {"weights", model.weights},      {"bias", model.bias},
          {"train_accuracy", model.train_accuracy}};
}

SoftmaxModel softmax_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "lyapguard.softmax" || j.at("version").get<int>() != 1) {
      throw Error(ErrorCode::kFormat, "not a version 1 softmax model document");
    }
    SoftmaxModel m;
    m.classes = j.at("classes").get<std::size_t>();
    m.pixels = j.at("pixels").get<std::size_t>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<std::vector<double>>();
    m.train_accuracy = j.value("train_accuracy", 0.0);
    if (m.weights.size() != m.classes * m.pixels || m.bias.size() != m.classes) {
      throw Error(ErrorCode::kFormat, "softmax parameter sizes do not match classes x pixels");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("softmax json: ") + e.what());
  }
}

}  // namespace lyapguard
