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

#ifndef MARROW_ERROR_HPP_
#define MARROW_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace marrow {

/// Failure categories surfaced by every module. The CLI maps these onto the
/// machine-readable error JSON it prints on stderr.
enum class ErrorCode {
  kNotFound,
  kUnsupportedFormat,
  kCorruptHeader,
  kInvalidGeometry,
  kOutOfGrid,
  kOutOfBounds,
  kReadFailure,
  kBackendUnavailable,
  kInferenceFailure,
  kUnknownClassId,
  kUnknownClassName,
  kEmptyInput,
  kDimensionMismatch,
  kEmptyHistogram,
  kAlreadyConverged,
  kEmptyConfusion,
  kSingleClassInput,
  kNoGroundTruth,
  kParseError,
  kInsufficientData,
  kDegenerateCrop,
  kInfeasibleTarget,
  kEmptyPool,
  kUnknownTileRef,
  kConflictingDuplicate,
  kUnconfirmedBox,
  kConflict,
  kPartialRun,
  kInvalidConfig,
  kIoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace marrow

#endif  // MARROW_ERROR_HPP_
