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

#include "error.hpp"

namespace lyapguard {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncatedStream: return "TruncatedStream";
    case ErrorCode::kCountMismatch: return "CountMismatch";
    case ErrorCode::kUnreadableFile: return "UnreadableFile";
    case ErrorCode::kBadDimensions: return "BadDimensions";
    case ErrorCode::kOutOfRangePixel: return "OutOfRangePixel";
    case ErrorCode::kSeriesTooShort: return "SeriesTooShort";
    case ErrorCode::kNotEnoughNeighbors: return "NotEnoughNeighbors";
    case ErrorCode::kDegenerateNeighborhood: return "DegenerateNeighborhood";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kBadParam: return "BadParam";
    case ErrorCode::kEmptyDistances: return "EmptyDistances";
    case ErrorCode::kDimTooLarge: return "DimTooLarge";
    case ErrorCode::kDegenerateData: return "DegenerateData";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kBadContamination: return "BadContamination";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kTooFewAttacks: return "TooFewAttacks";
    case ErrorCode::kMissingLabel: return "MissingLabel";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kPartialFailure: return "PartialFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

}  // namespace lyapguard
