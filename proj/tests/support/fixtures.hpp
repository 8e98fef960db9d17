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

#ifndef MARROW_TESTS_FIXTURES_HPP_
#define MARROW_TESTS_FIXTURES_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "marrow/annotation.hpp"
#include "marrow/detection.hpp"
#include "marrow/eval_metrics.hpp"

namespace marrow::testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "marrow");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

/// Box on the 1/128 lattice, fully inside the unit square.
BBox lattice_box(std::mt19937_64& rng, int min_side = 4, int max_side = 16);

/// Ground truth and predictions for detection-metric checks: at most
/// `max_boxes` boxes on each side, a few images and a handful of classes,
/// coordinates on the 1/128 lattice and confidences on the 1/16 lattice so
/// ties occur.
struct DetectionInstance {
  std::vector<AnnotationRecord> ground_truth;
  std::vector<Detection> predictions;
};
DetectionInstance random_detection_instance(std::uint64_t seed, std::size_t max_boxes = 20);

/// Up to `max_scores` scores on the 1/100 lattice with both labels present.
std::vector<ScoredLabel> random_scores(std::uint64_t seed, std::size_t max_scores = 1000);

/// Random detections on one tile with heavy overlap, for NMS properties.
std::vector<Detection> random_raw_detections(std::uint64_t seed, std::size_t max_boxes = 40);

/// Random annotation record; with `voc_exact`, coordinates are chosen so
/// the pixel-corner form is exact on a power-of-two image.
AnnotationRecord random_record(std::uint64_t seed, bool voc_exact);

}  // namespace marrow::testing

#endif  // MARROW_TESTS_FIXTURES_HPP_
