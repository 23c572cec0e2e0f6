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
#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "anomaly.hpp"
#include "attacksim.hpp"
#include "error.hpp"
#include "features.hpp"
#include "image.hpp"
#include "lyap.hpp"
#include "metrics.hpp"
#include "noise.hpp"
#include "random.hpp"
#include "supervised.hpp"

namespace lyapguard {
namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kConfig, where + ": " + what);
}

const json* find(const json& obj, const std::string& key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

template <class T>
T as(const json& v, const std::string& where) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    config_error(where, "unexpected type " + std::string(v.type_name()));
  }
}

template <class T>
T get_or(const json& obj, const std::string& key, const std::string& where, T fallback) {
  const json* v = find(obj, key);
  return v ? as<T>(*v, where + "." + key) : fallback;
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  const json* v = find(obj, key);
  if (!v) config_error(where + "." + key, "missing required field");
  return *v;
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; fn writes to its own slot.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(jobs, n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

class Context {
 public:
  Context(std::string command, json root, fs::path base_dir, const RunOptions& opts)
      : command_(std::move(command)), root_(std::move(root)), base_dir_(std::move(base_dir)) {
    if (!root_.is_object()) config_error("config", "top level must be a JSON object");
    if (const json* s = find(root_, command_)) {
      if (!s->is_object()) config_error(command_, "section must be an object");
      section_ = *s;
    } else {
      section_ = json::object();
    }
    if (opts.out) {
      out_dir_ = *opts.out;
    } else {
      out_dir_ = base_dir_ / get_or<std::string>(root_, "out", "config", "out");
    }
    // ${out} expands to this; relative paths would be re-rooted at base_dir.
    out_dir_ = fs::absolute(out_dir_);
    jobs_ = opts.jobs ? *opts.jobs : get_or<unsigned>(root_, "jobs", "config", 1u);
    if (jobs_ == 0) jobs_ = 1;
    cli_seed_ = opts.seed;
    feature_dim_override_ = opts.feature_dim;
  }

  const std::string& command() const { return command_; }
  const json& root() const { return root_; }
  const json& section() const { return section_; }
  const fs::path& out_dir() const { return out_dir_; }
  unsigned jobs() const { return jobs_; }

  // --seed, then the command section, then the top level. No default.
  RngSeed seed() {
    std::uint64_t v = 0;
    if (cli_seed_) {
      v = *cli_seed_;
    } else if (const json* s = find(section_, "seed")) {
      v = as<std::uint64_t>(*s, command_ + ".seed");
    } else if (const json* s = find(root_, "seed")) {
      v = as<std::uint64_t>(*s, "seed");
    } else {
      config_error(command_ + ".seed", "a seed is required (config \"seed\" or --seed)");
    }
    seeds_[command_] = v;
    return RngSeed{v};
  }

  std::size_t feature_dim() {
    std::size_t d = 4;
    if (feature_dim_override_) {
      d = *feature_dim_override_;
    } else if (find(section_, "feature_dim")) {
      d = get_or<std::size_t>(section_, "feature_dim", command_, 4);
    } else {
      d = get_or<std::size_t>(root_, "feature_dim", "config", 4);
    }
    if (d != 2 && d != 4) config_error(command_ + ".feature_dim", "must be 2 or 4");
    feature_dim_ = d;
    return d;
  }

  LyapunovParams lyap_params() const {
    LyapunovParams p;
    json merged = get_or<json>(root_, "lyapunov", "config", json::object());
    if (const json* s = find(section_, "lyapunov")) merged.update(*s);
    const std::string where = "lyapunov";
    p.emb_dim = get_or<int>(merged, "emb_dim", where, p.emb_dim);
    p.matrix_dim = get_or<int>(merged, "matrix_dim", where, p.matrix_dim);
    p.min_nb = get_or<int>(merged, "min_nb", where, p.min_nb);
    p.min_tsep = get_or<int>(merged, "min_tsep", where, p.min_tsep);
    p.tau = get_or<double>(merged, "tau", where, p.tau);
    try {
      p.validate();
    } catch (const Error& e) {
      config_error(where, e.what());
    }
    return p;
  }

  fs::path resolve_input(const std::string& raw) const {
    std::string s = raw;
    const std::string token = "${out}";
    for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token)) {
      s.replace(pos, token.size(), out_dir_.string());
    }
    fs::path p(s);
    return p.is_absolute() ? p : base_dir_ / p;
  }

  // Records the digest of an input file once, keyed by its config spelling.
  std::vector<std::uint8_t> read_input(const std::string& raw) {
    const fs::path p = resolve_input(raw);
    auto bytes = read_file_bytes(p);
    if (!inputs_.count(raw)) {
      inputs_[raw] = fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
    return bytes;
  }

  void record_input_dir(const std::string& raw) {
    inputs_[raw] = digest_dir(resolve_input(raw));
  }

  void write_output(const std::string& name, const std::string& content) {
    const fs::path p = out_dir_ / name;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
    out << content;
    out.close();
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + p.string());
    outputs_[name] = fnv1a64(content);
  }

  void write_dataset(const std::string& name, const Dataset& ds) {
    const fs::path dir = out_dir_ / name;
    if (fs::exists(dir)) {
      // Stale files from an earlier run would leak into the next load.
      for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".csv" || ext == ".json")) fs::remove(entry.path());
      }
    }
    fs::create_directories(dir);
    write_image_dir(ds, dir);
    outputs_[name + "/"] = digest_dir(dir);
  }

  void add_error(const std::string& id, const Error& e) {
    errors_.push_back({{"id", id}, {"code", error_code_name(e.code())}, {"message", e.what()}});
  }

  bool partial() const { return !errors_.empty(); }

  void finish(json& summary) {
    write_output("errors-" + command_ + ".json", errors_.dump(1) + "\n");
    json cfg = root_;
    cfg.erase("jobs");
    json manifest = {{"command", command_},
                     {"version", kVersion},
                     {"config_fnv1a64", hex64(fnv1a64(cfg.dump()))},
                     {"seeds", seeds_},
                     {"errors", errors_.size()}};
    if (feature_dim_) manifest["feature_dim"] = *feature_dim_;
    json ins = json::array();
    for (const auto& [path, h] : inputs_) ins.push_back({{"path", path}, {"fnv1a64", hex64(h)}});
    json outs = json::array();
    for (const auto& [path, h] : outputs_) outs.push_back({{"path", path}, {"fnv1a64", hex64(h)}});
    manifest["inputs"] = ins;
    manifest["outputs"] = outs;
    const std::string manifest_name = "manifest-" + command_ + ".json";
    write_output(manifest_name, manifest.dump(1) + "\n");

    summary["command"] = command_;
    summary["out"] = out_dir_.string();
    summary["errors"] = errors_.size();
    summary["manifest"] = manifest_name;
  }

 private:
  static std::uint64_t digest_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    if (ec) throw Error(ErrorCode::kUnreadableFile, "cannot list " + dir.string());
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) {
      const auto bytes = read_file_bytes(f);
      acc += f.filename().string() + '\0' +
             hex64(fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()))) + '\n';
    }
    return fnv1a64(acc);
  }

  std::string command_;
  json root_;
  json section_;
  fs::path base_dir_;
  fs::path out_dir_;
  unsigned jobs_ = 1;
  std::optional<std::uint64_t> cli_seed_;
  std::optional<std::size_t> feature_dim_override_;
  std::optional<std::size_t> feature_dim_;
  json seeds_ = json::object();
  std::map<std::string, std::uint64_t> inputs_;
  std::map<std::string, std::uint64_t> outputs_;
  json errors_ = json::array();
};

// ---- input loading --------------------------------------------------------

Dataset load_dataset_spec(Context& ctx, const json& spec, const std::string& where) {
  if (!spec.is_object()) config_error(where, "dataset spec must be an object");
  std::optional<Provenance> override;
  if (const json* p = find(spec, "provenance")) {
    try {
      override = provenance_from_json(*p);
    } catch (const Error& e) {
      config_error(where + ".provenance", e.what());
    }
  }

  Dataset ds;
  if (const json* idx = find(spec, "idx")) {
    const std::string images_path = as<std::string>(*idx, where + ".idx");
    const std::string name = get_or<std::string>(spec, "name", where, fs::path(images_path).stem().string());
    const auto image_bytes = ctx.read_input(images_path);
    std::optional<std::vector<std::uint8_t>> label_bytes;
    if (const json* l = find(spec, "labels")) label_bytes = ctx.read_input(as<std::string>(*l, where + ".labels"));
    std::optional<std::span<const std::uint8_t>> label_span;
    if (label_bytes) label_span = std::span<const std::uint8_t>(*label_bytes);
    Dataset full = parse_idx(image_bytes, label_span, name);

    std::vector<std::size_t> picks;
    if (const json* ind = find(spec, "indices")) {
      picks = as<std::vector<std::size_t>>(*ind, where + ".indices");
    } else {
      const auto first = get_or<std::size_t>(spec, "first", where, 0);
      const auto count = get_or<std::size_t>(spec, "count", where, full.images.size() - std::min(first, full.images.size()));
      for (std::size_t k = first; k < first + count; ++k) picks.push_back(k);
    }
    ds.name = name;
    for (std::size_t k : picks) {
      if (k >= full.images.size()) {
        config_error(where, "index " + std::to_string(k) + " beyond " + std::to_string(full.images.size()) + " images");
      }
      ds.images.push_back(full.images[k]);
    }
  } else if (const json* dir = find(spec, "dir")) {
    const std::string raw = as<std::string>(*dir, where + ".dir");
    ProvenanceDescriptor desc;
    const std::string scaling = get_or<std::string>(spec, "scaling", where, "none");
    if (scaling == "none") {
      desc.scaling = PixelScaling::kNone;
    } else if (scaling == "byte255") {
      desc.scaling = PixelScaling::kByte255;
    } else {
      config_error(where + ".scaling", "must be \"none\" or \"byte255\"");
    }
    ds = load_image_dir(ctx.resolve_input(raw), desc);
    ds.name = get_or<std::string>(spec, "name", where, fs::path(raw).filename().string());
    ctx.record_input_dir(raw);
  } else {
    config_error(where, "dataset spec needs \"idx\" or \"dir\"");
  }
  if (override) {
    for (auto& img : ds.images) img.set_provenance(*override);
  }
  return ds;
}

std::vector<Image> load_dataset_list(Context& ctx, const json& obj, const std::string& key) {
  const std::string where = ctx.command() + "." + key;
  const json& list = require(obj, key, ctx.command());
  std::vector<Image> out;
  if (list.is_object()) {
    auto ds = load_dataset_spec(ctx, list, where);
    return std::move(ds.images);
  }
  if (!list.is_array()) config_error(where, "expected a dataset spec or a list of them");
  for (std::size_t k = 0; k < list.size(); ++k) {
    auto ds = load_dataset_spec(ctx, list[k], where + "[" + std::to_string(k) + "]");
    for (auto& img : ds.images) out.push_back(std::move(img));
  }
  return out;
}

std::vector<std::string> path_list(const json& obj, const std::string& key, const std::string& where,
                                   std::optional<std::string> fallback = std::nullopt) {
  const json* v = find(obj, key);
  if (!v) {
    if (fallback) return {*fallback};
    config_error(where + "." + key, "missing required field");
  }
  if (v->is_string()) return {v->get<std::string>()};
  return as<std::vector<std::string>>(*v, where + "." + key);
}

FeatureMatrix load_features(Context& ctx, const std::vector<std::string>& paths) {
  FeatureMatrix all;
  for (const auto& raw : paths) {
    const auto bytes = ctx.read_input(raw);
    all.append(features_from_csv(std::string(bytes.begin(), bytes.end())));
  }
  if (all.rows() == 0) throw Error(ErrorCode::kEmptyInput, "no feature rows in " + ctx.command() + " inputs");
  return all;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- commands -------------------------------------------------------------

json cmd_exponents(Context& ctx) {
  const auto params = ctx.lyap_params();
  const auto images = load_dataset_list(ctx, ctx.section(), "datasets");
  const std::string output = get_or<std::string>(ctx.section(), "output", "exponents", "features.csv");

  std::vector<std::optional<LyapunovSpectrum>> spectra(images.size());
  std::vector<std::optional<Error>> failures(images.size());
  parallel_for(images.size(), ctx.jobs(), [&](std::size_t k) {
    try {
      spectra[k] = lyap_spectrum(flatten(images[k]), params);
    } catch (const Error& e) {
      failures[k] = e;
    }
  });

  std::vector<LyapunovSpectrum> kept;
  std::vector<RowMeta> meta;
  std::size_t positive = 0;
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (failures[k]) {
      ctx.add_error(images[k].id(), *failures[k]);
      continue;
    }
    positive += has_positive_exponent(*spectra[k]) ? 1 : 0;
    kept.push_back(std::move(*spectra[k]));
    meta.push_back({images[k].id(), images[k].provenance(), images[k].label()});
  }
  const auto dim = static_cast<std::size_t>(params.matrix_dim);
  FeatureMatrix fm = kept.empty() ? FeatureMatrix(dim, {}, {}) : build_features(kept, dim, meta);
  ctx.write_output(output, features_to_csv(fm));
  return {{"rows", fm.rows()}, {"skipped", images.size() - fm.rows()}, {"with_positive_exponent", positive},
          {"output", output}};
}

json cmd_train(Context& ctx) {
  const json& s = ctx.section();
  const auto dim = ctx.feature_dim();
  const FeatureMatrix all = leading_columns(load_features(ctx, path_list(s, "features", "train")), dim);
  const std::string detector = get_or<std::string>(s, "detector", "train", "iforest");
  const std::string output = get_or<std::string>(s, "model", "train", "model.json");

  json summary = {{"detector", detector}, {"model", output}};
  if (detector == "iforest") {
    std::vector<std::size_t> inliers;
    for (std::size_t r = 0; r < all.rows(); ++r) {
      if (!is_adversarial(all.meta(r).provenance)) inliers.push_back(r);
    }
    const FeatureMatrix train = all.select(inliers);
    IforestParams params;
    params.n_trees = get_or<std::size_t>(s, "n_trees", "train", params.n_trees);
    params.subsample_size = get_or<std::size_t>(s, "subsample_size", "train", params.subsample_size);
    const double contamination = get_or<double>(s, "contamination", "train", kDefaultContamination);
    if (!(contamination >= 0.0 && contamination < 0.5)) config_error("train.contamination", "must be in [0, 0.5)");
    auto model = iforest_fit(train, params, ctx.seed(), ctx.jobs());
    calibrate_threshold(model, train, contamination);
    ctx.write_output(output, iforest_to_json(model).dump() + "\n");
    summary.update({{"rows", train.rows()},
                    {"excluded_adversarial", all.rows() - train.rows()},
                    {"threshold", model.threshold},
                    {"contamination", contamination}});
  } else if (detector == "logistic") {
    std::vector<int> labels;
    for (const auto& m : all.meta()) labels.push_back(is_adversarial(m.provenance) ? 1 : 0);
    LogisticConfig cfg;
    cfg.l2_penalty = get_or<double>(s, "l2_penalty", "train", cfg.l2_penalty);
    cfg.max_iters = get_or<int>(s, "max_iters", "train", cfg.max_iters);
    cfg.tol = get_or<double>(s, "tol", "train", cfg.tol);
    const auto model = logistic_fit(all, labels, cfg);
    ctx.write_output(output, logistic_to_json(model).dump() + "\n");
    summary.update({{"rows", all.rows()}, {"converged", model.converged}, {"iterations", model.iterations}});
  } else {
    config_error("train.detector", "must be \"iforest\" or \"logistic\"");
  }
  return summary;
}

json cmd_score(Context& ctx) {
  const json& s = ctx.section();
  const std::string model_path = get_or<std::string>(s, "model", "score", "${out}/model.json");
  const auto model_bytes = ctx.read_input(model_path);
  json model_doc;
  try {
    model_doc = json::parse(model_bytes.begin(), model_bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, model_path + ": " + e.what());
  }
  const std::string format = model_doc.value("format", "");
  const FeatureMatrix raw = load_features(ctx, path_list(s, "features", "score"));

  std::vector<double> scores(raw.rows());
  std::vector<Decision> decisions(raw.rows());
  std::size_t dim = 0;
  if (format == "lyapguard.iforest") {
    const auto model = iforest_from_json(model_doc);
    dim = model.dim;
    const FeatureMatrix fm = leading_columns(raw, dim);
    for (std::size_t r = 0; r < fm.rows(); ++r) {
      scores[r] = anomaly_score(model, fm.row(r));
      decisions[r] = decide_score(scores[r], model.threshold);
    }
  } else if (format == "lyapguard.logistic") {
    const auto model = logistic_from_json(model_doc);
    dim = model.weights.size();
    const FeatureMatrix fm = leading_columns(raw, dim);
    for (std::size_t r = 0; r < fm.rows(); ++r) {
      scores[r] = logistic_score(model, fm.row(r));
      decisions[r] = decide_score(scores[r], 0.5);
    }
  } else {
    throw Error(ErrorCode::kFormat, model_path + ": unknown model format '" + format + "'");
  }

  std::string csv = "id,provenance,label,score,decision\n";
  std::vector<Provenance> prov;
  std::vector<int> labels;
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    const auto& m = raw.meta(r);
    csv += m.id + ',' + provenance_tag(m.provenance) + ',' + (m.label ? std::to_string(*m.label) : "") + ',' +
           fmt(scores[r]) + ',' + (decisions[r] == Decision::kReject ? "reject" : "accept") + '\n';
    prov.push_back(m.provenance);
    labels.push_back(is_adversarial(m.provenance) ? 1 : 0);
  }
  const std::string scores_out = get_or<std::string>(s, "scores", "score", "scores.csv");
  const std::string report_out = get_or<std::string>(s, "report", "score", "report.json");
  ctx.write_output(scores_out, csv);

  json report = report_to_json(detection_report(decisions, prov));
  report["feature_dim"] = dim;
  const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
  if (both) {
    const auto curve = roc(scores, labels);
    report["auroc"] = curve.auroc;
    const std::string roc_out = get_or<std::string>(s, "roc", "score", "roc.csv");
    ctx.write_output(roc_out, roc_to_csv(curve));
  } else {
    report["auroc"] = nullptr;
  }
  ctx.write_output(report_out, report.dump(1) + "\n");
  return {{"rows", raw.rows()}, {"report", report}};
}

json cmd_perturb(Context& ctx) {
  const json& s = ctx.section();
  const auto images = load_dataset_list(ctx, s, "datasets");
  const std::string output = get_or<std::string>(s, "output_dir", "perturb", "perturbed");
  const RngSeed seed = ctx.seed();

  std::vector<std::optional<Image>> out(images.size());
  std::string model_name;
  json extra = json::object();
  if (const json* noise = find(s, "noise")) {
    NoiseModel model;
    try {
      model = noise_model_from_json(*noise);
    } catch (const json::exception& e) {
      config_error("perturb.noise", e.what());
    } catch (const Error& e) {
      config_error("perturb.noise", e.what());
    }
    model_name = noise_model_name(model);
    parallel_for(images.size(), ctx.jobs(), [&](std::size_t k) {
      out[k] = apply_noise(images[k], model, derive_seed(seed, k));
    });
    extra["noise"] = noise_model_to_json(model);
  } else if (const json* matched = find(s, "matched_l2")) {
    const auto clean = load_dataset_list(ctx, *matched, "clean");
    const auto perturbed = load_dataset_list(ctx, *matched, "perturbed");
    if (clean.size() != perturbed.size()) {
      throw Error(ErrorCode::kLengthMismatch, "matched_l2: clean and perturbed sets differ in size");
    }
    std::vector<double> distances;
    for (std::size_t k = 0; k < clean.size(); ++k) distances.push_back(l2_distance(clean[k], perturbed[k]));
    model_name = "matched_l2";
    parallel_for(images.size(), ctx.jobs(), [&](std::size_t k) {
      const double target = sample_matched_magnitude(distances, derive_seed(seed, 2 * k));
      out[k] = perturb_to_magnitude(images[k], target, derive_seed(seed, 2 * k + 1));
    });
    double mean = 0.0;
    for (double d : distances) mean += d;
    extra["reference_pairs"] = distances.size();
    extra["mean_reference_l2"] = distances.empty() ? 0.0 : mean / static_cast<double>(distances.size());
  } else {
    config_error("perturb", "needs a \"noise\" or \"matched_l2\" block");
  }

  Dataset ds{output, {}};
  for (auto& img : out) {
    img->set_id(img->id() + "~" + model_name);
    ds.images.push_back(std::move(*img));
  }
  ctx.write_dataset(output, ds);
  extra.update({{"images", ds.images.size()}, {"model", model_name}, {"output_dir", output}});
  return extra;
}

json cmd_attack_fgsm(Context& ctx) {
  const json& s = ctx.section();
  SoftmaxModel victim;
  json summary = json::object();
  if (const json* v = find(s, "victim_model")) {
    const std::string raw = as<std::string>(*v, "attack-fgsm.victim_model");
    const auto bytes = ctx.read_input(raw);
    try {
      victim = softmax_from_json(json::parse(bytes.begin(), bytes.end()));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, raw + ": " + e.what());
    }
  } else {
    const json& vcfg = require(s, "victim", "attack-fgsm");
    const auto train = load_dataset_list(ctx, vcfg, "train");
    SoftmaxConfig cfg;
    cfg.lr = get_or<double>(vcfg, "lr", "attack-fgsm.victim", cfg.lr);
    cfg.epochs = get_or<int>(vcfg, "epochs", "attack-fgsm.victim", cfg.epochs);
    cfg.batch_size = get_or<std::size_t>(vcfg, "batch_size", "attack-fgsm.victim", cfg.batch_size);
    cfg.seed = ctx.seed().value;
    victim = softmax_train(train, cfg);
    const std::string victim_out = get_or<std::string>(s, "victim_output", "attack-fgsm", "victim.json");
    ctx.write_output(victim_out, softmax_to_json(victim).dump() + "\n");
    summary["victim_output"] = victim_out;
  }
  summary["victim_train_accuracy"] = victim.train_accuracy;

  FgsmParams params;
  params.epsilon = get_or<double>(s, "epsilon", "attack-fgsm", params.epsilon);
  params.targeted = get_or<bool>(s, "targeted", "attack-fgsm", false);
  if (const json* t = find(s, "target")) params.target = as<int>(*t, "attack-fgsm.target");
  if (params.targeted && !params.target) config_error("attack-fgsm.target", "targeted attack needs a target");
  if (!(params.epsilon >= 0.0)) config_error("attack-fgsm.epsilon", "must be >= 0");

  const auto images = load_dataset_list(ctx, s, "datasets");
  std::vector<std::optional<Image>> out(images.size());
  std::vector<std::optional<Error>> failures(images.size());
  parallel_for(images.size(), ctx.jobs(), [&](std::size_t k) {
    try {
      out[k] = fgsm(victim, images[k], params);
    } catch (const Error& e) {
      failures[k] = e;
    }
  });

  const std::string output = get_or<std::string>(s, "output_dir", "attack-fgsm", "adversarial");
  Dataset ds{output, {}};
  std::size_t labelled = 0;
  std::size_t clean_correct = 0;
  std::size_t adv_correct = 0;
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (failures[k]) {
      ctx.add_error(images[k].id(), *failures[k]);
      continue;
    }
    if (images[k].label() && static_cast<std::size_t>(*images[k].label()) < victim.classes) {
      ++labelled;
      clean_correct += victim.predict(images[k].pixels()) == *images[k].label() ? 1 : 0;
      adv_correct += victim.predict(out[k]->pixels()) == *images[k].label() ? 1 : 0;
    }
    out[k]->set_id(images[k].id() + "~fgsm");
    ds.images.push_back(std::move(*out[k]));
  }
  ctx.write_dataset(output, ds);
  summary.update({{"images", ds.images.size()}, {"epsilon", params.epsilon}, {"output_dir", output}});
  if (labelled > 0) {
    summary["clean_accuracy"] = static_cast<double>(clean_correct) / static_cast<double>(labelled);
    summary["adversarial_accuracy"] = static_cast<double>(adv_correct) / static_cast<double>(labelled);
  }
  return summary;
}

json cmd_eval_loao(Context& ctx) {
  const json& s = ctx.section();
  const auto dim = ctx.feature_dim();
  const FeatureMatrix nat_all = leading_columns(load_features(ctx, path_list(s, "natural", "eval-loao")), dim);
  std::vector<std::size_t> nat_rows;
  for (std::size_t r = 0; r < nat_all.rows(); ++r) {
    if (!is_adversarial(nat_all.meta(r).provenance)) nat_rows.push_back(r);
  }
  const FeatureMatrix natural = nat_all.select(nat_rows);

  std::map<std::string, FeatureMatrix> per_attack;
  const json& attacks = require(s, "attacks", "eval-loao");
  if (attacks.is_object()) {
    for (const auto& [name, paths] : attacks.items()) {
      std::vector<std::string> list =
          paths.is_string() ? std::vector<std::string>{paths.get<std::string>()}
                            : as<std::vector<std::string>>(paths, "eval-loao.attacks." + name);
      per_attack[name] = leading_columns(load_features(ctx, list), dim);
    }
  } else {
    const FeatureMatrix adv = leading_columns(load_features(ctx, path_list(s, "attacks", "eval-loao")), dim);
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < adv.rows(); ++r) {
      if (const auto* a = std::get_if<Adversarial>(&adv.meta(r).provenance)) groups[a->attack].push_back(r);
    }
    for (const auto& [name, rows] : groups) per_attack[name] = adv.select(rows);
  }

  LogisticConfig cfg;
  cfg.l2_penalty = get_or<double>(s, "l2_penalty", "eval-loao", cfg.l2_penalty);
  cfg.max_iters = get_or<int>(s, "max_iters", "eval-loao", cfg.max_iters);
  cfg.tol = get_or<double>(s, "tol", "eval-loao", cfg.tol);
  const auto results = leave_one_attack_out(natural, per_attack, cfg);

  json out = {{"feature_dim", dim}, {"attacks", json::object()}};
  for (const auto& [name, res] : results) {
    const std::string file = "roc-" + sanitize(name) + ".csv";
    ctx.write_output(file, roc_to_csv(res.curve));
    out["attacks"][name] = {{"auroc", res.curve.auroc},
                            {"n_train", res.n_train},
                            {"n_test", res.n_test},
                            {"converged", res.converged},
                            {"roc", file}};
  }
  const std::string summary_out = get_or<std::string>(s, "output", "eval-loao", "loao.json");
  ctx.write_output(summary_out, out.dump(1) + "\n");
  return out;
}

json cmd_scatter(Context& ctx) {
  const json& s = ctx.section();
  const auto dim = ctx.feature_dim();
  const FeatureMatrix fm = leading_columns(load_features(ctx, path_list(s, "features", "scatter")), dim);
  const PcaModel model = pca_fit(fm);
  const auto proj = pca_project(model, fm);

  std::string csv = "id,provenance,pc1,pc2\n";
  std::vector<int> cluster;
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    csv += fm.meta(r).id + ',' + provenance_tag(fm.meta(r).provenance) + ',' + fmt(proj[2 * r]) + ',' +
           fmt(proj[2 * r + 1]) + '\n';
    cluster.push_back(is_adversarial(fm.meta(r).provenance) ? 1 : 0);
  }
  const auto sil = silhouette_score(proj, 2, cluster);
  json pca = {{"mean", model.mean},
              {"components", model.components},
              {"explained_variance", model.explained_variance},
              {"silhouette", sil ? json(*sil) : json(nullptr)}};
  const std::string out_csv = get_or<std::string>(s, "output", "scatter", "scatter.csv");
  const std::string out_json = get_or<std::string>(s, "pca", "scatter", "pca.json");
  ctx.write_output(out_csv, csv);
  ctx.write_output(out_json, pca.dump(1) + "\n");
  return {{"rows", fm.rows()}, {"pca", pca}};
}

struct ScoreRow {
  Provenance provenance;
  double score;
  Decision decision;
};

std::vector<ScoreRow> parse_scores(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "id,provenance,label,score,decision") {
    throw Error(ErrorCode::kFormat, name + ": expected header id,provenance,label,score,decision");
  }
  std::vector<ScoreRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw Error(ErrorCode::kFormat, name + ":" + std::to_string(line_no) + ": expected 5 cells");
    ScoreRow r;
    try {
      r.provenance = parse_provenance_tag(cells[1]);
      r.score = std::stod(cells[3]);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kFormat, name + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (cells[4] == "accept") {
      r.decision = Decision::kAccept;
    } else if (cells[4] == "reject") {
      r.decision = Decision::kReject;
    } else {
      throw Error(ErrorCode::kFormat, name + ":" + std::to_string(line_no) + ": bad decision");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

json cmd_report(Context& ctx) {
  const json& s = ctx.section();
  const std::string scores_path = get_or<std::string>(s, "scores", "report", "${out}/scores.csv");
  const auto bytes = ctx.read_input(scores_path);
  const auto rows = parse_scores(std::string(bytes.begin(), bytes.end()), scores_path);

  std::vector<Decision> decisions;
  std::vector<Provenance> prov;
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& r : rows) {
    decisions.push_back(r.decision);
    prov.push_back(r.provenance);
    scores.push_back(r.score);
    labels.push_back(is_adversarial(r.provenance) ? 1 : 0);
  }
  json out = {{"detection", report_to_json(detection_report(decisions, prov))}};

  const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
  if (both) {
    const json boot = get_or<json>(s, "bootstrap", "report", json::object());
    const auto resamples = get_or<std::size_t>(boot, "resamples", "report.bootstrap", 1000);
    const auto level = get_or<double>(boot, "level", "report.bootstrap", 0.95);
    const auto ci = bootstrap_auroc(scores, labels, resamples, level, ctx.seed());
    out["auroc"] = {{"estimate", ci.estimate}, {"lower", ci.lower}, {"upper", ci.upper},
                    {"level", level}, {"resamples", resamples}};
  } else {
    out["auroc"] = nullptr;
  }

  if (find(s, "features")) {
    const FeatureMatrix fm = load_features(ctx, path_list(s, "features", "report"));
    std::size_t n[2] = {0, 0};
    std::size_t pos[2] = {0, 0};
    for (std::size_t r = 0; r < fm.rows(); ++r) {
      const int c = is_adversarial(fm.meta(r).provenance) ? 1 : 0;
      ++n[c];
      const auto row = fm.row(r);
      pos[c] += std::any_of(row.begin(), row.end(), [](double v) { return v > 0.0; }) ? 1 : 0;
    }
    auto frac = [](std::size_t a, std::size_t b) {
      return b == 0 ? json(nullptr) : json(static_cast<double>(a) / static_cast<double>(b));
    };
    out["positive_exponent_fraction"] = {{"legitimate", frac(pos[0], n[0])},
                                         {"adversarial", frac(pos[1], n[1])},
                                         {"n_legitimate", n[0]},
                                         {"n_adversarial", n[1]}};
  }
  const std::string output = get_or<std::string>(s, "output", "report", "summary.json");
  ctx.write_output(output, out.dump(1) + "\n");
  return out;
}

using Handler = json (*)(Context&);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> table = {
      {"exponents", cmd_exponents}, {"train", cmd_train},         {"score", cmd_score},
      {"perturb", cmd_perturb},     {"attack-fgsm", cmd_attack_fgsm}, {"eval-loao", cmd_eval_loao},
      {"scatter", cmd_scatter},     {"report", cmd_report},
  };
  return table;
}

}  // namespace

RunResult run_command(const std::string& command, const RunOptions& options) {
  const auto& table = handlers();
  const auto it = table.find(command);
  if (it == table.end()) throw Error(ErrorCode::kConfig, "unknown command '" + command + "'");

  json root;
  fs::path base_dir = options.base_dir;
  if (options.config) {
    root = *options.config;
  } else if (options.config_path) {
    std::vector<std::uint8_t> bytes;
    try {
      bytes = read_file_bytes(*options.config_path);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, std::string("cannot read config: ") + e.what());
    }
    try {
      root = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfig, options.config_path->string() + ": " + e.what());
    }
    base_dir = options.config_path->parent_path();
    if (base_dir.empty()) base_dir = ".";
  } else {
    throw Error(ErrorCode::kConfig, "no config given (--config)");
  }

  Context ctx(command, std::move(root), base_dir, options);
  fs::create_directories(ctx.out_dir());
  json summary = it->second(ctx);
  ctx.finish(summary);
  return RunResult{ctx.partial(), std::move(summary)};
}

}  // namespace lyapguard
