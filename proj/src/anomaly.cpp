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
#include "anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "error.hpp"

namespace lyapguard {
namespace {

constexpr const char* kFormatName = "lyapguard.iforest";
constexpr int kFormatVersion = 1;

std::size_t height_limit(std::size_t subsample_size) {
  std::size_t h = 0;
  while ((std::size_t{1} << h) < subsample_size) ++h;
  return h;
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::size_t limit, Rng& rng) : x_(x), limit_(limit), rng_(rng) {}

  int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, std::size_t depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(IsolationNode{});
    tree.nodes[node_id].size = hi - lo;
    if (depth >= limit_ || hi - lo <= 1) return node_id;

    std::vector<std::size_t> eligible;
    std::vector<std::pair<double, double>> range(x_.dim());
    for (std::size_t c = 0; c < x_.dim(); ++c) {
      double mn = x_.at(idx[lo], c);
      double mx = mn;
      for (std::size_t k = lo + 1; k < hi; ++k) {
        mn = std::min(mn, x_.at(idx[k], c));
        mx = std::max(mx, x_.at(idx[k], c));
      }
      range[c] = {mn, mx};
      if (mx > mn) eligible.push_back(c);
    }
    if (eligible.empty()) return node_id;

    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    const std::size_t feature = eligible[pick(rng_)];
    const auto [mn, mx] = range[feature];
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double split = mn + unit(rng_) * (mx - mn);
    // Keep the split strictly inside (min, max).
    if (!(split > mn)) split = std::nextafter(mn, mx);
    if (!(split < mx)) split = std::nextafter(mx, mn);
    if (!(split > mn && split < mx)) split = mn + 0.5 * (mx - mn);

    const auto mid_it = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                       idx.begin() + static_cast<std::ptrdiff_t>(hi),
                                       [&](std::size_t r) { return x_.at(r, feature) < split; });
    const auto mid = static_cast<std::size_t>(mid_it - idx.begin());

    tree.nodes[node_id].feature = static_cast<int>(feature);
    tree.nodes[node_id].split = split;
    const int left = build(idx, lo, mid, depth + 1);
    const int right = build(idx, mid, hi, depth + 1);
    tree.nodes[node_id].left = left;
    tree.nodes[node_id].right = right;
    return node_id;
  }

  IsolationTree tree;

 private:
  const FeatureMatrix& x_;
  std::size_t limit_;
  Rng& rng_;
};

IsolationTree build_tree(const FeatureMatrix& x, std::size_t psi, RngSeed seed) {
  Rng rng = make_rng(seed);
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (psi < x.rows()) {
    // Partial Fisher-Yates: the first psi entries are a without-replacement sample.
    for (std::size_t k = 0; k < psi; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
    }
    idx.resize(psi);
  }
  TreeBuilder builder(x, height_limit(psi), rng);
  builder.build(idx, 0, idx.size(), 0);
  return std::move(builder.tree);
}

void check_point(const IsolationForestModel& model, std::span<const double> point) {
  if (point.size() != model.dim) {
    throw Error(ErrorCode::kDimMismatch, "point has dim " + std::to_string(point.size()) +
                                             ", model expects " + std::to_string(model.dim));
  }
}

}  // namespace

std::size_t IsolationTree::height() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes[n].feature >= 0) {
      stack.push_back({nodes[n].left, d + 1});
      stack.push_back({nodes[n].right, d + 1});
    }
  }
  return best;
}

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  double h = 0.0;
  for (std::size_t i = 1; i <= n - 1; ++i) h += 1.0 / static_cast<double>(i);
  const double nn = static_cast<double>(n);
  return 2.0 * h - 2.0 * (nn - 1.0) / nn;
}

IsolationForestModel iforest_fit(const FeatureMatrix& features, const IforestParams& params,
                                 RngSeed seed, unsigned jobs) {
  if (features.rows() < 2) throw Error(ErrorCode::kTooFewPoints, "isolation forest needs N >= 2");
  if (params.n_trees < 1) throw Error(ErrorCode::kBadParam, "n_trees must be >= 1");
  std::size_t psi = params.subsample_size == 0 ? std::size_t{256} : params.subsample_size;
  if (psi < 2) throw Error(ErrorCode::kBadParam, "subsample_size must be >= 2");
  psi = std::min(psi, features.rows());

  IsolationForestModel model;
  model.subsample_size = psi;
  model.n_trees = params.n_trees;
  model.dim = features.dim();
  model.train_seed = seed;
  model.trees.resize(params.n_trees);

  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(params.n_trees)));
  auto work = [&](unsigned w) {
    for (std::size_t t = w; t < params.n_trees; t += workers) {
      model.trees[t] = build_tree(features, psi, derive_seed(seed, t));
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  return model;
}

double path_length(const IsolationTree& tree, std::span<const double> point) {
  int n = 0;
  double depth = 0.0;
  while (tree.nodes[n].feature >= 0) {
    const auto& node = tree.nodes[n];
    n = point[static_cast<std::size_t>(node.feature)] < node.split ? node.left : node.right;
    depth += 1.0;
  }
  return depth + average_path_length(tree.nodes[n].size);
}

double score_from_mean_path(double mean_path, std::size_t subsample_size) {
  const double c = average_path_length(subsample_size);
  if (c <= 0.0) return 1.0;
  return std::exp2(-mean_path / c);
}

double anomaly_score(const IsolationForestModel& model, std::span<const double> point) {
  check_point(model, point);
  double total = 0.0;
  for (const auto& tree : model.trees) total += path_length(tree, point);
  return score_from_mean_path(total / static_cast<double>(model.trees.size()), model.subsample_size);
}

Decision decide_score(double score, double threshold) {
  return score > threshold ? Decision::kReject : Decision::kAccept;
}

Decision decide(const IsolationForestModel& model, std::span<const double> point) {
  return decide_score(anomaly_score(model, point), model.threshold);
}

double quantile_midpoint(std::vector<double> scores, double q) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyInput, "no scores to take a quantile of");
  std::sort(scores.begin(), scores.end());
  const double pos = q * static_cast<double>(scores.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return lo == hi ? scores[lo] : 0.5 * (scores[lo] + scores[hi]);
}

double calibrate_threshold(IsolationForestModel& model, const FeatureMatrix& features,
                           double contamination) {
  if (!(contamination >= 0.0 && contamination < 0.5)) {
    throw Error(ErrorCode::kBadContamination, "contamination must be in [0, 0.5)");
  }
  std::vector<double> scores;
  scores.reserve(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) scores.push_back(anomaly_score(model, features.row(r)));
  model.threshold = quantile_midpoint(std::move(scores), 1.0 - contamination);
  return model.threshold;
}

nlohmann::json iforest_to_json(const IsolationForestModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      if (n.feature < 0) {
        nodes.push_back({{"size", n.size}});
      } else {
        nodes.push_back({{"feature", n.feature}, {"split", n.split}, {"left", n.left},
                         {"right", n.right}, {"size", n.size}});
      }
    }
    trees.push_back(std::move(nodes));
  }
  return {{"format", kFormatName},
          {"version", kFormatVersion},
          {"n_trees", model.n_trees},
          {"subsample_size", model.subsample_size},
          {"dim", model.dim},
          {"threshold", model.threshold},
          {"train_seed", model.train_seed.value},
          {"trees", std::move(trees)}};
}

IsolationForestModel iforest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormatName) {
      throw Error(ErrorCode::kFormat, "not an isolation forest document");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::kFormat, "unsupported isolation forest version");
    }
    IsolationForestModel model;
    model.n_trees = j.at("n_trees").get<std::size_t>();
    model.subsample_size = j.at("subsample_size").get<std::size_t>();
    model.dim = j.at("dim").get<std::size_t>();
    model.threshold = j.at("threshold").get<double>();
    model.train_seed = RngSeed{j.at("train_seed").get<std::uint64_t>()};
    for (const auto& jt : j.at("trees")) {
      IsolationTree tree;
      for (const auto& jn : jt) {
        IsolationNode n;
        n.size = jn.at("size").get<std::size_t>();
        if (jn.contains("feature")) {
          n.feature = jn.at("feature").get<int>();
          n.split = jn.at("split").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
        }
        tree.nodes.push_back(n);
      }
      const int count = static_cast<int>(tree.nodes.size());
      if (count == 0) throw Error(ErrorCode::kFormat, "empty tree");
      for (int k = 0; k < count; ++k) {
        const auto& n = tree.nodes[k];
        if (n.feature >= 0 && (static_cast<std::size_t>(n.feature) >= model.dim || n.left <= k ||
                               n.right <= k || n.left >= count || n.right >= count)) {
          throw Error(ErrorCode::kFormat, "malformed tree node");
        }
      }
      model.trees.push_back(std::move(tree));
    }
    if (model.trees.size() != model.n_trees || model.n_trees == 0) {
      throw Error(ErrorCode::kFormat, "tree count does not match n_trees");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("isolation forest json: ") + e.what());
  }
}

void save_iforest(const IsolationForestModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << iforest_to_json(model).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

IsolationForestModel load_iforest(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
  return iforest_from_json(j);
}

}  // namespace lyapguard
