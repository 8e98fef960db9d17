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

#ifndef MARROW_TOOLS_COMMANDS_HPP_
#define MARROW_TOOLS_COMMANDS_HPP_

#include <cstdint>
#include <optional>
#include <string>

namespace marrow::cli {

struct ProcessArgs {
  std::string slide;
  std::string config;
  std::string out;
  std::string run_record;
  std::string decisions;
  std::optional<std::size_t> max_tiles;
  std::optional<double> conf_thresh;
  std::optional<double> nms_iou;
};
int run_process(const ProcessArgs& a);

struct EvalRoiArgs {
  std::string scores;
  double threshold = 0.5;
  std::size_t grid_points = 101;
  std::string out;
};
int run_eval_roi(const EvalRoiArgs& a);

struct EvalDetArgs {
  std::string pred;
  std::string gt;
  double iou = 0.5;
  std::string format = "csv";
  std::string out;
  std::string confusion;
};
int run_eval_det(const EvalDetArgs& a);

struct SplitArgs {
  std::string manifest;
  int folds = 5;
  double validation_share = 0.7;
  std::uint64_t seed = 0;
  bool pool_small = false;
  std::string out;
};
int run_dataset_split(const SplitArgs& a);

struct AugmentArgs {
  std::string pool;
  std::string out;
  int copies = 1;
  std::uint64_t seed = 0;
  std::string mix = "none";  // none | cutmix | mosaic
  // With a manifest and fold, only tiles in that fold's training view are
  // augmented; the split is recomputed from the same options as `split`.
  std::string manifest;
  std::optional<int> fold;
  int folds = 5;
  double validation_share = 0.7;
  std::uint64_t split_seed = 0;
  bool pool_small = false;
};
int run_dataset_augment(const AugmentArgs& a);

struct OversampleArgs {
  std::string manifest;
  std::string counts;
  std::string targets;
  std::optional<std::uint64_t> factor;
  std::uint64_t seed = 0;
  std::string out;
};
int run_dataset_oversample(const OversampleArgs& a);

struct QueryArgs {
  std::string pool;
  std::string manifest;
  std::size_t n = 250;
  std::uint64_t seed = 0;
  std::string out;
};
int run_al_query(const QueryArgs& a);

struct ExportArgs {
  std::string pool;
  std::string keys;  // file with one key per line, or comma-separated list
  std::string out;
};
int run_al_export(const ExportArgs& a);

struct MergeArgs {
  std::string manifest;
  std::string package;
  std::string corrections;
};
int run_al_merge(const MergeArgs& a);

struct ServeReviewArgs {
  std::string package;
  std::string manifest;
  std::string host = "127.0.0.1";
  int port = 8088;
};
int run_serve_review(const ServeReviewArgs& a);

struct ServeBackendArgs {
  std::string roi = "synthetic";
  std::string detector = "synthetic";
  double saturation_count = 10.0;
  std::string host = "127.0.0.1";
  int port = 8090;
};
int run_serve_backend(const ServeBackendArgs& a);

struct SynthSlideArgs {
  std::string out;
  std::string format = "manifest";  // manifest | tiff
  std::string slide_id = "synthetic";
  std::uint64_t seed = 1;
  double roi_fraction = 0.15;
  std::string ground_truth;  // optional annotation directory
  std::string pool;          // optional pool directory of ROI tiles
};
int run_synth_slide(const SynthSlideArgs& a);

}  // namespace marrow::cli

#endif  // MARROW_TOOLS_COMMANDS_HPP_
