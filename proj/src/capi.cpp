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
#include "lyapguard/lyapguard.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

#include "anomaly.hpp"
#include "error.hpp"
#include "image.hpp"
#include "lyap.hpp"
#include "metrics.hpp"
#include "noise.hpp"
#include "pipeline.hpp"

struct lg_dataset {
  lyapguard::Dataset data;
};

struct lg_iforest {
  lyapguard::IsolationForestModel model;
};

namespace {

thread_local std::string g_last_error;

lg_status fail(lg_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

template <class F>
lg_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const lyapguard::Error& e) {
    return fail(static_cast<lg_status>(static_cast<int>(e.code())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(LG_FORMAT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(LG_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LG_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LG_INTERNAL, e.what());
  } catch (...) {
    return fail(LG_INTERNAL, "unknown exception");
  }
}

#define LG_REQUIRE(cond, what) \
  if (!(cond)) return fail(LG_INVALID_ARGUMENT, what)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const lyapguard::Image* image_at(const lg_dataset* ds, size_t index) {
  if (!ds || index >= ds->data.images.size()) return nullptr;
  return &ds->data.images[index];
}

}  // namespace

extern "C" {

const char* lg_status_name(lg_status status) {
  switch (status) {
    case LG_OK:
      return "Ok";
    case LG_INTERNAL:
      return "Internal";
    default:
      if (status > LG_OK && status <= LG_PARTIAL_FAILURE) {
        return lyapguard::error_code_name(static_cast<lyapguard::ErrorCode>(status));
      }
      return "Unknown";
  }
}

const char* lg_last_error(void) { return g_last_error.c_str(); }

const char* lg_version(void) { return lyapguard::kVersion; }

void lg_string_free(char* s) { std::free(s); }

lg_status lg_dataset_load_idx(const char* images_path, const char* labels_path, lg_dataset** out) {
  LG_REQUIRE(images_path && out, "images_path and out are required");
  return guarded([&] {
    std::optional<std::filesystem::path> labels;
    if (labels_path) labels = labels_path;
    auto ds = std::make_unique<lg_dataset>();
    ds->data = lyapguard::load_idx(images_path, labels, std::filesystem::path(images_path).stem().string());
    *out = ds.release();
    return LG_OK;
  });
}

lg_status lg_dataset_load_dir(const char* dir, const char* descriptor_json, lg_dataset** out) {
  LG_REQUIRE(dir && out, "dir and out are required");
  return guarded([&] {
    lyapguard::ProvenanceDescriptor desc;
    if (descriptor_json) desc = lyapguard::provenance_descriptor_from_json(nlohmann::json::parse(descriptor_json));
    auto ds = std::make_unique<lg_dataset>();
    ds->data = lyapguard::load_image_dir(dir, desc);
    *out = ds.release();
    return LG_OK;
  });
}

size_t lg_dataset_count(const lg_dataset* ds) { return ds ? ds->data.images.size() : 0; }

lg_status lg_dataset_shape(const lg_dataset* ds, size_t index, size_t* height, size_t* width) {
  const auto* img = image_at(ds, index);
  LG_REQUIRE(img && height && width, "bad dataset, index or output pointer");
  *height = img->height();
  *width = img->width();
  return LG_OK;
}

lg_status lg_dataset_pixels(const lg_dataset* ds, size_t index, const double** pixels, size_t* count) {
  const auto* img = image_at(ds, index);
  LG_REQUIRE(img && pixels && count, "bad dataset, index or output pointer");
  *pixels = img->pixels().data();
  *count = img->size();
  return LG_OK;
}

lg_status lg_dataset_label(const lg_dataset* ds, size_t index, int* label) {
  const auto* img = image_at(ds, index);
  LG_REQUIRE(img && label, "bad dataset, index or output pointer");
  *label = img->label() ? *img->label() : -1;
  return LG_OK;
}

void lg_dataset_free(lg_dataset* ds) { delete ds; }

lg_lyap_params lg_lyap_params_default(void) {
  const lyapguard::LyapunovParams p;
  return lg_lyap_params{p.emb_dim, p.matrix_dim, p.min_nb, p.min_tsep, p.tau};
}

lg_status lg_lyap_spectrum(const double* series, size_t length, const lg_lyap_params* params,
                           double* exponents, int* n_steps) {
  LG_REQUIRE(series && params && exponents, "series, params and exponents are required");
  return guarded([&] {
    lyapguard::LyapunovParams p;
    p.emb_dim = params->emb_dim;
    p.matrix_dim = params->matrix_dim;
    p.min_nb = params->min_nb;
    p.min_tsep = params->min_tsep;
    p.tau = params->tau;
    const auto spec =
        lyapguard::lyap_spectrum(lyapguard::TimeSeries(std::vector<double>(series, series + length)), p);
    std::copy(spec.exponents.begin(), spec.exponents.end(), exponents);
    if (n_steps) *n_steps = spec.n_steps;
    return LG_OK;
  });
}

lg_status lg_apply_noise(const double* pixels, size_t height, size_t width, const char* model_json,
                         uint64_t seed, double* out) {
  LG_REQUIRE(pixels && model_json && out, "pixels, model_json and out are required");
  return guarded([&] {
    const lyapguard::Image img(height, width, std::vector<double>(pixels, pixels + height * width));
    const auto model = lyapguard::noise_model_from_json(nlohmann::json::parse(model_json));
    const auto noisy = lyapguard::apply_noise(img, model, lyapguard::RngSeed{seed});
    std::copy(noisy.pixels().begin(), noisy.pixels().end(), out);
    return LG_OK;
  });
}

namespace {

lyapguard::FeatureMatrix rows_to_matrix(const double* rows, size_t n, size_t dim) {
  std::vector<lyapguard::RowMeta> meta(n);
  for (size_t r = 0; r < n; ++r) meta[r].id = std::to_string(r);
  return lyapguard::FeatureMatrix(dim, std::vector<double>(rows, rows + n * dim), std::move(meta));
}

}  // namespace

lg_status lg_iforest_fit(const double* rows, size_t n, size_t dim, size_t n_trees, size_t subsample_size,
                         uint64_t seed, lg_iforest** out) {
  LG_REQUIRE((rows || n == 0) && out, "rows and out are required");
  return guarded([&] {
    lyapguard::IforestParams params;
    params.n_trees = n_trees;
    params.subsample_size = subsample_size;
    auto model = std::make_unique<lg_iforest>();
    model->model = lyapguard::iforest_fit(rows_to_matrix(rows, n, dim), params, lyapguard::RngSeed{seed});
    *out = model.release();
    return LG_OK;
  });
}

lg_status lg_iforest_calibrate(lg_iforest* model, const double* rows, size_t n, double contamination,
                               double* threshold) {
  LG_REQUIRE(model && (rows || n == 0), "model and rows are required");
  return guarded([&] {
    const double t = lyapguard::calibrate_threshold(model->model, rows_to_matrix(rows, n, model->model.dim),
                                                    contamination);
    if (threshold) *threshold = t;
    return LG_OK;
  });
}

lg_status lg_iforest_score(const lg_iforest* model, const double* point, size_t dim, double* score) {
  LG_REQUIRE(model && point && score, "model, point and score are required");
  return guarded([&] {
    *score = lyapguard::anomaly_score(model->model, std::span<const double>(point, dim));
    return LG_OK;
  });
}

lg_status lg_iforest_decide(const lg_iforest* model, const double* point, size_t dim, int* reject) {
  LG_REQUIRE(model && point && reject, "model, point and reject are required");
  return guarded([&] {
    *reject = lyapguard::decide(model->model, std::span<const double>(point, dim)) == lyapguard::Decision::kReject;
    return LG_OK;
  });
}

lg_status lg_iforest_save(const lg_iforest* model, const char* path) {
  LG_REQUIRE(model && path, "model and path are required");
  return guarded([&] {
    lyapguard::save_iforest(model->model, path);
    return LG_OK;
  });
}

lg_status lg_iforest_load(const char* path, lg_iforest** out) {
  LG_REQUIRE(path && out, "path and out are required");
  return guarded([&] {
    auto model = std::make_unique<lg_iforest>();
    model->model = lyapguard::load_iforest(path);
    *out = model.release();
    return LG_OK;
  });
}

void lg_iforest_free(lg_iforest* model) { delete model; }

lg_status lg_auroc(const double* scores, const int* labels, size_t n, double* auroc) {
  LG_REQUIRE(scores && labels && auroc, "scores, labels and auroc are required");
  return guarded([&] {
    *auroc = lyapguard::roc(std::span<const double>(scores, n), std::span<const int>(labels, n)).auroc;
    return LG_OK;
  });
}

lg_status lg_run(const char* command, const char* options_json, char** summary_json) {
  LG_REQUIRE(command, "command is required");
  if (summary_json) *summary_json = nullptr;
  return guarded([&] {
    lyapguard::RunOptions opts;
    nlohmann::json o = nlohmann::json::object();
    if (options_json && *options_json) {
      try {
        o = nlohmann::json::parse(options_json);
      } catch (const nlohmann::json::exception& e) {
        throw lyapguard::Error(lyapguard::ErrorCode::kConfig, std::string("options: ") + e.what());
      }
    }
    try {
      if (o.contains("config")) opts.config_path = o.at("config").get<std::string>();
      if (o.contains("config_json")) {
        opts.config = o.at("config_json");
        if (o.contains("base_dir")) opts.base_dir = o.at("base_dir").get<std::string>();
      }
      if (o.contains("seed")) opts.seed = o.at("seed").get<std::uint64_t>();
      if (o.contains("jobs")) opts.jobs = o.at("jobs").get<unsigned>();
      if (o.contains("out")) opts.out = o.at("out").get<std::string>();
      if (o.contains("feature_dim")) opts.feature_dim = o.at("feature_dim").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw lyapguard::Error(lyapguard::ErrorCode::kConfig, std::string("options: ") + e.what());
    }
    const auto result = lyapguard::run_command(command, opts);
    if (summary_json) *summary_json = dup_string(result.summary.dump(1));
    if (result.partial) {
      g_last_error = "command finished with entries in its error ledger";
      return LG_PARTIAL_FAILURE;
    }
    return LG_OK;
  });
}

}  // extern "C"
