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
#include "image.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "error.hpp"

namespace lyapguard {
namespace {

constexpr std::size_t kIdxImageHeader = 16;
constexpr std::size_t kIdxLabelHeader = 8;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string format_hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

double parse_real(std::string_view token, const std::string& where) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
    token.remove_suffix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
    throw Error(ErrorCode::kFormat, where + ": not a number: '" + std::string(token) + "'");
  }
  return value;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

bool is_adversarial(const Provenance& p) { return std::holds_alternative<Adversarial>(p); }

std::string provenance_tag(const Provenance& p) {
  if (std::holds_alternative<Legitimate>(p)) return "legitimate";
  if (const auto* adv = std::get_if<Adversarial>(&p)) {
    std::string tag = "adversarial/" + adv->attack + "/";
    if (adv->targeted) {
      tag += adv->target ? "target-" + std::to_string(*adv->target) : "targeted";
    } else {
      tag += "untargeted";
    }
    return tag;
  }
  return "noisy/" + std::get<Noisy>(p).model;
}

Provenance parse_provenance_tag(const std::string& tag) {
  if (tag == "legitimate") return Legitimate{};
  if (tag.rfind("noisy/", 0) == 0 && tag.size() > 6) return Noisy{tag.substr(6), {}, {}};
  if (tag.rfind("adversarial/", 0) == 0) {
    const std::string rest = tag.substr(12);
    const auto slash = rest.rfind('/');
    if (slash != std::string::npos && slash > 0) {
      Adversarial adv;
      adv.attack = rest.substr(0, slash);
      const std::string mode = rest.substr(slash + 1);
      if (mode == "untargeted") return adv;
      adv.targeted = true;
      if (mode == "targeted") return adv;
      if (mode.rfind("target-", 0) == 0) {
        int target = 0;
        const char* first = mode.data() + 7;
        const char* last = mode.data() + mode.size();
        auto [ptr, ec] = std::from_chars(first, last, target);
        if (ec == std::errc() && ptr == last) {
          adv.target = target;
          return adv;
        }
      }
    }
  }
  throw Error(ErrorCode::kFormat, "unknown provenance tag '" + tag + "'");
}

nlohmann::json provenance_to_json(const Provenance& p) {
  nlohmann::json j;
  if (std::holds_alternative<Legitimate>(p)) {
    j["kind"] = "legitimate";
  } else if (const auto* adv = std::get_if<Adversarial>(&p)) {
    j["kind"] = "adversarial";
    j["attack"] = adv->attack;
    j["targeted"] = adv->targeted;
    j["target"] = adv->target ? nlohmann::json(*adv->target) : nlohmann::json(nullptr);
  } else {
    const auto& noisy = std::get<Noisy>(p);
    j["kind"] = "noisy";
    j["model"] = noisy.model;
    if (noisy.requested_l2) j["requested_l2"] = *noisy.requested_l2;
    if (noisy.achieved_l2) j["achieved_l2"] = *noisy.achieved_l2;
  }
  return j;
}

Provenance provenance_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_provenance_tag(j.get<std::string>());
  if (!j.is_object() || !j.contains("kind")) {
    throw Error(ErrorCode::kFormat, "provenance must be an object with a 'kind'");
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "legitimate") return Legitimate{};
  if (kind == "adversarial") {
    Adversarial adv;
    adv.attack = j.at("attack").get<std::string>();
    adv.targeted = j.value("targeted", false);
    if (j.contains("target") && !j.at("target").is_null()) adv.target = j.at("target").get<int>();
    if (adv.attack.empty() || adv.attack.find_first_of("/,") != std::string::npos) {
      throw Error(ErrorCode::kFormat, "attack name must be non-empty without '/' or ','");
    }
    return adv;
  }
  if (kind == "noisy") {
    Noisy noisy;
    noisy.model = j.at("model").get<std::string>();
    if (j.contains("requested_l2")) noisy.requested_l2 = j.at("requested_l2").get<double>();
    if (j.contains("achieved_l2")) noisy.achieved_l2 = j.at("achieved_l2").get<double>();
    return noisy;
  }
  throw Error(ErrorCode::kFormat, "unknown provenance kind '" + kind + "'");
}

Image::Image(std::size_t height, std::size_t width, std::vector<double> pixels,
             std::optional<int> label, Provenance provenance, std::string id)
    : height_(height),
      width_(width),
      pixels_(std::move(pixels)),
      label_(label),
      provenance_(std::move(provenance)),
      id_(std::move(id)) {
  if (height_ == 0 || width_ == 0 || pixels_.size() != height_ * width_) {
    throw Error(ErrorCode::kBadDimensions,
                "image " + std::to_string(height_) + "x" + std::to_string(width_) + " given " +
                    std::to_string(pixels_.size()) + " pixels");
  }
  for (std::size_t k = 0; k < pixels_.size(); ++k) {
    // NaN fails both comparisons.
    if (!(pixels_[k] >= 0.0 && pixels_[k] <= 1.0)) {
      throw Error(ErrorCode::kOutOfRangePixel,
                  "pixel " + std::to_string(k) + " = " + std::to_string(pixels_[k]) +
                      " outside [0,1]");
    }
  }
}

Image Image::with_pixels(std::vector<double> pixels) const {
  return Image(height_, width_, std::move(pixels), label_, provenance_, id_);
}

TimeSeries::TimeSeries(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error(ErrorCode::kInvalidArgument, "time series must be non-empty");
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "time series has non-finite value");
  }
}

void validate_dataset(const Dataset& dataset) {
  if (dataset.images.empty()) return;
  const auto h = dataset.images.front().height();
  const auto w = dataset.images.front().width();
  for (const auto& img : dataset.images) {
    if (img.height() != h || img.width() != w) {
      throw Error(ErrorCode::kBadDimensions,
                  "dataset '" + dataset.name + "' mixes image sizes (image '" + img.id() + "')");
    }
  }
}

Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::optional<std::span<const std::uint8_t>> label_bytes,
                  const std::string& name) {
  if (image_bytes.size() < 4) throw Error(ErrorCode::kTruncatedStream, "IDX image header");
  const std::uint32_t magic = read_be32(image_bytes, 0);
  if (magic != kIdxImageMagic) {
    throw Error(ErrorCode::kBadMagic, "IDX image magic " + format_hex(magic));
  }
  if (image_bytes.size() < kIdxImageHeader) {
    throw Error(ErrorCode::kTruncatedStream, "IDX image header");
  }
  const std::size_t count = read_be32(image_bytes, 4);
  const std::size_t rows = read_be32(image_bytes, 8);
  const std::size_t cols = read_be32(image_bytes, 12);
  const std::size_t per_image = rows * cols;
  if (image_bytes.size() - kIdxImageHeader < count * per_image) {
    throw Error(ErrorCode::kTruncatedStream,
                "IDX image payload holds " + std::to_string(image_bytes.size() - kIdxImageHeader) +
                    " bytes, header declares " + std::to_string(count * per_image));
  }

  std::vector<std::optional<int>> labels(count);
  if (label_bytes) {
    const auto lb = *label_bytes;
    if (lb.size() < 4) throw Error(ErrorCode::kTruncatedStream, "IDX label header");
    const std::uint32_t lmagic = read_be32(lb, 0);
    if (lmagic != kIdxLabelMagic) {
      throw Error(ErrorCode::kBadMagic, "IDX label magic " + format_hex(lmagic));
    }
    if (lb.size() < kIdxLabelHeader) throw Error(ErrorCode::kTruncatedStream, "IDX label header");
    const std::size_t lcount = read_be32(lb, 4);
    if (lcount != count) {
      throw Error(ErrorCode::kCountMismatch, std::to_string(lcount) + " labels for " +
                                                 std::to_string(count) + " images");
    }
    if (lb.size() - kIdxLabelHeader < count) {
      throw Error(ErrorCode::kTruncatedStream, "IDX label payload");
    }
    for (std::size_t k = 0; k < count; ++k) labels[k] = lb[kIdxLabelHeader + k];
  }

  Dataset out{name, {}};
  out.images.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<double> px(per_image);
    const auto* src = image_bytes.data() + kIdxImageHeader + k * per_image;
    for (std::size_t p = 0; p < per_image; ++p) px[p] = src[p] / 255.0;
    out.images.emplace_back(rows, cols, std::move(px), labels[k], Legitimate{},
                            name + ":" + std::to_string(k));
  }
  return out;
}

std::vector<std::uint8_t> serialize_idx_images(const Dataset& dataset) {
  validate_dataset(dataset);
  std::vector<std::uint8_t> out;
  const std::size_t h = dataset.images.empty() ? 0 : dataset.images.front().height();
  const std::size_t w = dataset.images.empty() ? 0 : dataset.images.front().width();
  out.reserve(kIdxImageHeader + dataset.images.size() * h * w);
  append_be32(out, kIdxImageMagic);
  append_be32(out, static_cast<std::uint32_t>(dataset.images.size()));
  append_be32(out, static_cast<std::uint32_t>(h));
  append_be32(out, static_cast<std::uint32_t>(w));
  for (const auto& img : dataset.images) {
    for (double v : img.pixels()) out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  }
  return out;
}

std::vector<std::uint8_t> serialize_idx_labels(const Dataset& dataset) {
  std::vector<std::uint8_t> out;
  append_be32(out, kIdxLabelMagic);
  append_be32(out, static_cast<std::uint32_t>(dataset.images.size()));
  for (const auto& img : dataset.images) {
    if (!img.label()) throw Error(ErrorCode::kMissingLabel, "image '" + img.id() + "' has no label");
    out.push_back(static_cast<std::uint8_t>(*img.label()));
  }
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels, const std::string& name) {
  const auto image_bytes = read_file_bytes(images);
  if (!labels) return parse_idx(image_bytes, std::nullopt, name);
  const auto label_bytes = read_file_bytes(*labels);
  return parse_idx(image_bytes, std::span<const std::uint8_t>(label_bytes), name);
}

TimeSeries flatten(const Image& image) {
  return TimeSeries(std::vector<double>(image.pixels().begin(), image.pixels().end()));
}

Image unflatten(const TimeSeries& series, std::size_t height, std::size_t width) {
  return Image(height, width, std::vector<double>(series.values().begin(), series.values().end()));
}

ProvenanceDescriptor provenance_descriptor_from_json(const nlohmann::json& j) {
  ProvenanceDescriptor d;
  if (!j.contains("scaling")) {
    throw Error(ErrorCode::kConfig, "provenance descriptor must declare 'scaling' (none|byte255)");
  }
  const auto scaling = j.at("scaling").get<std::string>();
  if (scaling == "none") {
    d.scaling = PixelScaling::kNone;
  } else if (scaling == "byte255") {
    d.scaling = PixelScaling::kByte255;
  } else {
    throw Error(ErrorCode::kConfig, "scaling must be 'none' or 'byte255', got '" + scaling + "'");
  }
  if (j.contains("provenance") && !j.at("provenance").is_null()) {
    d.provenance = provenance_from_json(j.at("provenance"));
  }
  return d;
}

Dataset load_image_dir(const std::filesystem::path& dir, const ProvenanceDescriptor& descriptor) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::kUnreadableFile, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> csvs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") csvs.push_back(entry.path());
  }
  std::sort(csvs.begin(), csvs.end());

  Dataset out{dir.filename().string(), {}};
  for (const auto& csv : csvs) {
    auto sidecar_path = csv;
    sidecar_path.replace_extension(".json");
    nlohmann::json sidecar;
    try {
      sidecar = nlohmann::json::parse(read_text(sidecar_path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kUnreadableFile, sidecar_path.string() + ": " + e.what());
    }
    std::size_t height = 0;
    std::size_t width = 0;
    try {
      height = sidecar.at("height").get<std::size_t>();
      width = sidecar.at("width").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kBadDimensions, sidecar_path.string() + ": " + e.what());
    }

    const std::string text = read_text(csv);
    std::vector<double> px;
    std::string_view rest(text);
    while (!rest.empty() && (rest.back() == '\n' || rest.back() == '\r')) rest.remove_suffix(1);
    if (rest.find('\n') != std::string_view::npos) {
      throw Error(ErrorCode::kFormat, csv.string() + ": expected a single row");
    }
    while (true) {
      const auto comma = rest.find(',');
      px.push_back(parse_real(rest.substr(0, comma), csv.string()));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (px.size() != height * width) {
      throw Error(ErrorCode::kBadDimensions, csv.string() + ": " + std::to_string(px.size()) +
                                                 " values for " + std::to_string(height) + "x" +
                                                 std::to_string(width));
    }
    if (descriptor.scaling == PixelScaling::kByte255) {
      for (auto& v : px) v /= 255.0;
    }
    for (std::size_t k = 0; k < px.size(); ++k) {
      if (!(px[k] >= 0.0 && px[k] <= 1.0)) {
        throw Error(ErrorCode::kOutOfRangePixel,
                    csv.string() + ": value " + std::to_string(px[k]) + " at " + std::to_string(k));
      }
    }

    std::optional<int> label;
    if (sidecar.contains("label") && !sidecar.at("label").is_null()) label = sidecar.at("label").get<int>();
    Provenance prov = Legitimate{};
    if (descriptor.provenance) {
      prov = *descriptor.provenance;
    } else if (sidecar.contains("provenance")) {
      prov = provenance_from_json(sidecar.at("provenance"));
    }
    std::string id = sidecar.value("id", csv.stem().string());
    out.images.emplace_back(height, width, std::move(px), label, std::move(prov), std::move(id));
  }
  validate_dataset(out);
  return out;
}

void write_image_dir(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char stem[32];
  for (std::size_t k = 0; k < dataset.images.size(); ++k) {
    const auto& img = dataset.images[k];
    std::snprintf(stem, sizeof stem, "img-%05zu", k);
    {
      std::ofstream csv(dir / (std::string(stem) + ".csv"), std::ios::binary);
      if (!csv) throw Error(ErrorCode::kIo, "cannot write " + (dir / stem).string() + ".csv");
      char buf[32];
      for (std::size_t p = 0; p < img.size(); ++p) {
        if (p) csv << ',';
        std::snprintf(buf, sizeof buf, "%.17g", img.pixels()[p]);
        csv << buf;
      }
      csv << '\n';
    }
    nlohmann::ordered_json sidecar;
    sidecar["id"] = img.id();
    sidecar["height"] = img.height();
    sidecar["width"] = img.width();
    sidecar["label"] = img.label() ? nlohmann::json(*img.label()) : nlohmann::json(nullptr);
    sidecar["provenance"] = provenance_to_json(img.provenance());
    std::ofstream js(dir / (std::string(stem) + ".json"), std::ios::binary);
    if (!js) throw Error(ErrorCode::kIo, "cannot write sidecar for " + std::string(stem));
    js << sidecar.dump(1) << '\n';
  }
}

}  // namespace lyapguard
