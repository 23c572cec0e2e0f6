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

#include <stdexcept>
#include <string>

namespace lyapguard {

// Numeric values are shared with the C API status codes (lg_status).
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kBadMagic = 2,
  kTruncatedStream = 3,
  kCountMismatch = 4,
  kUnreadableFile = 5,
  kBadDimensions = 6,
  kOutOfRangePixel = 7,
  kSeriesTooShort = 8,
  kNotEnoughNeighbors = 9,
  kDegenerateNeighborhood = 10,
  kZeroVariance = 11,
  kDimMismatch = 12,
  kBadParam = 13,
  kEmptyDistances = 14,
  kDimTooLarge = 15,
  kDegenerateData = 16,
  kTooFewPoints = 17,
  kBadContamination = 18,
  kSingleClass = 19,
  kNoConvergence = 20,
  kLengthMismatch = 21,
  kTooFewAttacks = 22,
  kMissingLabel = 23,
  kEmptyInput = 24,
  kConfig = 25,
  kIo = 26,
  kFormat = 27,
  kPartialFailure = 28,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lyapguard
