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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace lyapguard {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
  std::optional<std::filesystem::path> config_path;
  // Used instead of reading config_path; relative inputs resolve against base_dir.
  std::optional<nlohmann::json> config;
  std::filesystem::path base_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> feature_dim;
};

struct RunResult {
  // True when the per-item error ledger is nonempty.
  bool partial = false;
  nlohmann::json summary;
};

// Commands: exponents, train, score, perturb, attack-fgsm, eval-loao,
// scatter, report. Throws Error; kConfig marks configuration problems.
RunResult run_command(const std::string& command, const RunOptions& options);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace lyapguard
