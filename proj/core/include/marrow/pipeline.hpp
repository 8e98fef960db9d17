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

#ifndef MARROW_PIPELINE_HPP_
#define MARROW_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "marrow/cytology.hpp"
#include "marrow/detection.hpp"
#include "marrow/roi_gate.hpp"
#include "marrow/wsi_io.hpp"

namespace marrow {

struct BackendConfig {
  /// "synthetic", "sampling" (detector only) or "http".
  std::string kind = "synthetic";
  std::string endpoint;  // for kind == "http"
  /// Synthetic ROI backend: objects that saturate p at 1.
  double saturation_count = 10.0;
  /// Sampling detector: mean objects per tile and class weights (defaults
  /// to the reference class mixture when empty).
  double mean_objects = 0.0;
  std::vector<double> class_weights;
};

struct PipelineConfig {
  int grid_rows = 15;
  int grid_cols = 20;
  int tile_px = 512;
  TileOrder order = TileOrder::kSeededShuffle;

  double roi_threshold = 0.5;
  BackendConfig roi_backend;

  NmsParams nms;
  BackendConfig detector_backend;

  ConvergenceParams convergence;
  std::size_t max_tiles = 600;
  /// Stop streaming once the IHCT has converged.
  bool stop_on_convergence = true;

  std::uint64_t order_seed = 0;
  std::uint64_t detector_seed = 0;

  std::size_t workers = 2;
  std::size_t read_ahead = 4;
  /// Largest tolerated fraction of streamed tiles that failed to read or
  /// infer before the run is reported as partial.
  double failure_tolerance = 0.05;

  /// Output locations; excluded from the snapshot embedded in reports.
  std::string report_path;
  std::string run_record_path;
  std::string decisions_path;
};

/// Throws kInvalidConfig on out-of-range values.
void validate(const PipelineConfig& config);

/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& config);
/// Every field except the output locations.
nlohmann::json config_snapshot(const PipelineConfig& config);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// MARROW_ROI_ENDPOINT and MARROW_DETECTOR_ENDPOINT switch the respective
/// backend to kind "http" with the given URL.
void apply_env_overrides(PipelineConfig& config);

std::unique_ptr<TileClassifierBackend> make_roi_backend(const BackendConfig& c);
std::unique_ptr<DetectorBackend> make_detector_backend(const BackendConfig& c, std::uint64_t seed);

enum class RunStatus { kSuccess, kPartialRun, kFailed };
std::string_view to_string(RunStatus s) noexcept;

struct RunRecord {
  nlohmann::json config;  // snapshot
  std::string slide_id;
  /// Disjoint intervals on the coordinating thread, in seconds.
  std::map<std::string, double> stage_seconds;
  /// Summed per-tile work across worker threads, in seconds.
  std::map<std::string, double> worker_seconds;
  double wall_seconds = 0.0;
  std::size_t tiles_streamed = 0;
  std::size_t tiles_gated = 0;  // accepted by the ROI gate
  std::size_t tiles_processed = 0;  // accumulated into the IHCT
  std::size_t tiles_failed = 0;
  RunStatus status = RunStatus::kSuccess;
  std::string error_code;
  std::string error_message;
  std::string report_path;
};

nlohmann::json to_json(const RunRecord& record);

struct RunResult {
  RunRecord record;
  std::optional<NdcReport> report;  // present iff status == kSuccess
  std::vector<RoiDecision> decisions;  // one per streamed tile that was scored
};

/// Streams the slide's grid, gates each tile, detects and suppresses
/// objects on accepted tiles and folds them into the IHCT in visit order
/// until convergence or max_tiles accepted tiles. Tile work runs on
/// `workers` threads; commits stay sequential. Throws kBackendUnavailable
/// before any tile is read when a backend is down, and mid-run if one goes
/// away. Tile-level failures are counted; above the tolerance the run ends
/// with kPartialRun and no report.
RunResult run_pipeline(const PipelineConfig& config, const SlideHandle& slide,
                       TileClassifierBackend& roi, DetectorBackend& detector);

/// Builds the backends from the config.
RunResult run_pipeline(const PipelineConfig& config, const SlideHandle& slide);

/// Report file contents: the NdcReport JSON plus "config" (snapshot).
nlohmann::json report_document(const NdcReport& report, const PipelineConfig& config);

/// Writes the report (if any), run record and decision log to the paths
/// named in the config.
void write_outputs(const RunResult& result, const PipelineConfig& config);

}  // namespace marrow

#endif  // MARROW_PIPELINE_HPP_
