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

#include "marrow/roi_gate.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "marrow/error.hpp"
#include "marrow/synthetic.hpp"

namespace marrow {

RoiScore score_tile(TileClassifierBackend& backend, const Tile& tile) {
  if (tile.pixels.empty()) fail(ErrorCode::kInferenceFailure, "tile has no raster");
  const double p = backend.score(tile);
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
    fail(ErrorCode::kInferenceFailure, "backend returned probability outside [0,1]");
  }
  return {tile.coord, p, backend.info().id()};
}

RoiDecision gate(const RoiScore& score, double threshold) {
  return {score.tile_coord, score.p_appropriate, score.p_appropriate >= threshold, threshold,
          score.backend_id};
}

RoiFractionCheck expected_roi_fraction_check(std::span<const RoiDecision> decisions, double low,
                                             double high) {
  if (decisions.empty()) fail(ErrorCode::kEmptyInput, "no ROI decisions");
  RoiFractionCheck out;
  out.total = decisions.size();
  out.accepted = static_cast<std::size_t>(
      std::count_if(decisions.begin(), decisions.end(), [](const auto& d) { return d.accepted; }));
  out.fraction = static_cast<double>(out.accepted) / static_cast<double>(out.total);
  out.anomalous = out.fraction < low || out.fraction > high;
  return out;
}

std::string decision_log_line(const RoiDecision& d) {
  nlohmann::json j = {{"coord", {d.tile_coord.row, d.tile_coord.col}},
                      {"p", d.p_appropriate},
                      {"accepted", d.accepted},
                      {"threshold", d.threshold_used},
                      {"backend_id", d.backend_id}};
  return j.dump();
}

RoiDecision parse_decision_log_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    RoiDecision d;
    d.tile_coord = {j.at("coord").at(0).get<int>(), j.at("coord").at(1).get<int>()};
    d.p_appropriate = j.at("p").get<double>();
    d.accepted = j.at("accepted").get<bool>();
    d.threshold_used = j.at("threshold").get<double>();
    d.backend_id = j.at("backend_id").get<std::string>();
    return d;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, std::string("decision log: ") + e.what());
  }
}

SyntheticRoiBackend::SyntheticRoiBackend(Options options) : options_(options) {
  if (!(options_.saturation_count > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "saturation_count must be positive");
  }
}

void SyntheticRoiBackend::check_available() const {
  if (!options_.online) fail(ErrorCode::kBackendUnavailable, "synthetic ROI backend is offline");
}

double SyntheticRoiBackend::score(const Tile& tile) {
  check_available();
  if (synthetic::overstain_fraction(tile.pixels) > options_.overstain_limit) return 0.0;
  const auto objects = synthetic::find_objects(tile.pixels);
  return std::min(1.0, static_cast<double>(objects.size()) / options_.saturation_count);
}

}  // namespace marrow
