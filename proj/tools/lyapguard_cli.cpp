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
// Command-line front end. Talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lyapguard/lyapguard.h"

namespace {

int exit_code_for(lg_status status) {
  switch (status) {
    case LG_OK:
      return 0;
    case LG_PARTIAL_FAILURE:
      return 2;
    case LG_CONFIG:
    case LG_BAD_PARAM:
    case LG_BAD_CONTAMINATION:
    case LG_DIM_TOO_LARGE:
      return 1;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lyapunov-spectrum features for adversarial image detection"};
  app.set_version_flag("--version", std::string(lg_version()));
  app.require_subcommand(1);
  // Global flags may also follow the subcommand.
  app.fallthrough();

  std::string config;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out;
  std::size_t feature_dim = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random draw (overrides the config)");
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads for image-level work")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides the config)");
  app.add_option("--config", config, "Pipeline config JSON")->required()->check(CLI::ExistingFile);

  const char* commands[][2] = {
      {"exponents", "Compute Lyapunov spectra and write a feature CSV"},
      {"train", "Fit an isolation forest or logistic detector"},
      {"score", "Score feature rows with a trained detector"},
      {"perturb", "Write a noisy copy of an image set"},
      {"attack-fgsm", "Train the softmax victim and write FGSM images"},
      {"eval-loao", "Leave-one-attack-out logistic evaluation"},
      {"scatter", "2-D PCA scatter data of the features"},
      {"report", "Detection report with a bootstrap AUROC interval"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    const std::string n = name;
    if (n == "train" || n == "eval-loao" || n == "scatter") {
      sub->add_option("--feature-dim", feature_dim, "Use the first 2 or all 4 exponents")
          ->check(CLI::IsMember({2, 4}));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; every usage error is a config error.
    return app.exit(e) == 0 ? 0 : 1;
  }

  nlohmann::json options = {{"config", config}};
  if (seed_opt->count() > 0) options["seed"] = seed;
  if (jobs_opt->count() > 0) options["jobs"] = jobs;
  if (out_opt->count() > 0) options["out"] = out;
  if (feature_dim != 0) options["feature_dim"] = feature_dim;

  const std::string command = app.get_subcommands().front()->get_name();
  char* summary = nullptr;
  const lg_status status = lg_run(command.c_str(), options.dump().c_str(), &summary);
  if (summary) {
    std::printf("%s\n", summary);
    lg_string_free(summary);
  }
  if (status != LG_OK) {
    std::fprintf(stderr, "lyapguard %s: %s: %s\n", command.c_str(), lg_status_name(status), lg_last_error());
  }
  return exit_code_for(status);
}
