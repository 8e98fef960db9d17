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

#ifndef MARROW_ROI_GATE_HPP_
#define MARROW_ROI_GATE_HPP_

#include <cstddef>
#include <memory>
#include <span>
#include <string>

#include "marrow/backend.hpp"
#include "marrow/wsi_io.hpp"

namespace marrow {

struct RoiScore {
  GridCoord tile_coord;
  double p_appropriate = 0.0;
  std::string backend_id;
};

struct RoiDecision {
  GridCoord tile_coord;
  double p_appropriate = 0.0;
  bool accepted = false;
  double threshold_used = 0.5;
  std::string backend_id;
};

/// Binary tile classifier: probability that a tile is suitable for cytology.
class TileClassifierBackend {
 public:
  virtual ~TileClassifierBackend() = default;

  virtual BackendInfo info() const = 0;
  /// Throws Error(kBackendUnavailable) when the backend cannot serve.
  virtual void check_available() const {}
  virtual double score(const Tile& tile) = 0;
};

/// Scores one tile, validating the backend output. Throws
/// kInferenceFailure for probabilities outside [0, 1].
RoiScore score_tile(TileClassifierBackend& backend, const Tile& tile);

/// accepted iff p_appropriate >= threshold (inclusive boundary).
RoiDecision gate(const RoiScore& score, double threshold = 0.5);

struct RoiFractionCheck {
  double fraction = 0.0;
  std::size_t accepted = 0;
  std::size_t total = 0;
  bool anomalous = false;
};

/// Accepted fraction over a slide's decisions, flagged when it falls outside
/// [low, high]. Throws kEmptyInput for no decisions.
RoiFractionCheck expected_roi_fraction_check(std::span<const RoiDecision> decisions,
                                             double low = 0.05, double high = 0.5);

/// One JSON-lines record: {coord, p, accepted, threshold, backend_id}.
std::string decision_log_line(const RoiDecision& decision);
RoiDecision parse_decision_log_line(const std::string& line);

/// Scores tiles of synthetic slides by nucleated-object density:
/// p = min(1, objects / saturation_count), or 0 when more than
/// overstain_limit of the tile is overstained.
class SyntheticRoiBackend final : public TileClassifierBackend {
 public:
  struct Options {
    double saturation_count = 10.0;
    double overstain_limit = 0.2;
    bool online = true;
  };

  SyntheticRoiBackend() : SyntheticRoiBackend(Options{}) {}
  explicit SyntheticRoiBackend(Options options);

  BackendInfo info() const override { return {"synthetic-roi", "1", 0}; }
  void check_available() const override;
  double score(const Tile& tile) override;

 private:
  Options options_;
};

}  // namespace marrow

#endif  // MARROW_ROI_GATE_HPP_
