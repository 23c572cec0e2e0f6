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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace lyapguard {

struct Legitimate {
  bool operator==(const Legitimate&) const = default;
};

struct Adversarial {
  std::string attack;
  bool targeted = false;
  std::optional<int> target;
  bool operator==(const Adversarial&) const = default;
};

struct Noisy {
  std::string model;
  // Set by magnitude-matched perturbation: requested and post-clip L2 norms.
  std::optional<double> requested_l2;
  std::optional<double> achieved_l2;
  bool operator==(const Noisy&) const = default;
};

using Provenance = std::variant<Legitimate, Adversarial, Noisy>;

bool is_adversarial(const Provenance& p);

// Compact single-token form used in CSV files:
//   legitimate | adversarial/<attack>/untargeted | adversarial/<attack>/target-<k>
//   | noisy/<model>
std::string provenance_tag(const Provenance& p);
Provenance parse_provenance_tag(const std::string& tag);

nlohmann::json provenance_to_json(const Provenance& p);
Provenance provenance_from_json(const nlohmann::json& j);

// Normalized grey-level image, row-major, every pixel in [0,1].
class Image {
 public:
  Image(std::size_t height, std::size_t width, std::vector<double> pixels,
        std::optional<int> label = std::nullopt,
        Provenance provenance = Legitimate{}, std::string id = {});

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  std::span<const double> pixels() const noexcept { return pixels_; }
  double at(std::size_t row, std::size_t col) const { return pixels_.at(row * width_ + col); }

  const std::optional<int>& label() const noexcept { return label_; }
  const Provenance& provenance() const noexcept { return provenance_; }
  const std::string& id() const noexcept { return id_; }

  void set_provenance(Provenance p) { provenance_ = std::move(p); }
  void set_id(std::string id) { id_ = std::move(id); }

  // Same metadata, new pixels (validated).
  Image with_pixels(std::vector<double> pixels) const;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<double> pixels_;
  std::optional<int> label_;
  Provenance provenance_;
  std::string id_;
};

class TimeSeries {
 public:
  explicit TimeSeries(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t length() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

 private:
  std::vector<double> values_;
};

struct Dataset {
  std::string name;
  std::vector<Image> images;
};

// Throws BadDimensions when images disagree on height/width.
void validate_dataset(const Dataset& dataset);

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::optional<std::span<const std::uint8_t>> label_bytes,
                  const std::string& name = "idx");

// Inverse of parse_idx. Pixels are quantized as round(255 x).
std::vector<std::uint8_t> serialize_idx_images(const Dataset& dataset);
std::vector<std::uint8_t> serialize_idx_labels(const Dataset& dataset);

Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels,
                 const std::string& name = "idx");

// x[i * width + j] = X[i][j]
TimeSeries flatten(const Image& image);
Image unflatten(const TimeSeries& series, std::size_t height, std::size_t width);

enum class PixelScaling { kNone, kByte255 };

struct ProvenanceDescriptor {
  PixelScaling scaling = PixelScaling::kNone;
  // Overrides the per-file sidecar provenance when present.
  std::optional<Provenance> provenance;
};

ProvenanceDescriptor provenance_descriptor_from_json(const nlohmann::json& j);

// Directory of <stem>.csv (one row of height*width reals) plus <stem>.json
// sidecars {height, width, label, provenance}; files are read in name order.
Dataset load_image_dir(const std::filesystem::path& dir,
                       const ProvenanceDescriptor& descriptor);

// Writes the layout load_image_dir reads (scaling "none", full precision).
void write_image_dir(const Dataset& dataset, const std::filesystem::path& dir);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace lyapguard
