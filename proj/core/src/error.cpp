// Copyright 2026 The Marrow Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "marrow/error.hpp"

namespace marrow {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kCorruptHeader: return "CorruptHeader";
    case ErrorCode::kInvalidGeometry: return "InvalidGeometry";
    case ErrorCode::kOutOfGrid: return "OutOfGrid";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kReadFailure: return "ReadFailure";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kInferenceFailure: return "InferenceFailure";
    case ErrorCode::kUnknownClassId: return "UnknownClassId";
    case ErrorCode::kUnknownClassName: return "UnknownClassName";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyHistogram: return "EmptyHistogram";
    case ErrorCode::kAlreadyConverged: return "AlreadyConverged";
    case ErrorCode::kEmptyConfusion: return "EmptyConfusion";
    case ErrorCode::kSingleClassInput: return "SingleClassInput";
    case ErrorCode::kNoGroundTruth: return "NoGroundTruth";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kDegenerateCrop: return "DegenerateCrop";
    case ErrorCode::kInfeasibleTarget: return "InfeasibleTarget";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kUnknownTileRef: return "UnknownTileRef";
    case ErrorCode::kConflictingDuplicate: return "ConflictingDuplicate";
    case ErrorCode::kUnconfirmedBox: return "UnconfirmedBox";
    case ErrorCode::kConflict: return "Conflict";
    case ErrorCode::kPartialRun: return "PartialRun";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace marrow
