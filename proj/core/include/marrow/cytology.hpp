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

#ifndef MARROW_CYTOLOGY_HPP_
#define MARROW_CYTOLOGY_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marrow/cell_class.hpp"
#include "marrow/detection.hpp"
#include "marrow/wsi_io.hpp"

namespace marrow {

using ClassCounts = std::array<std::uint64_t, kNumClasses>;

/// Histogram of cell types for one tile: a zero-filled count per class.
struct Hct {
  ClassCounts counts{};
  std::optional<GridCoord> tile_coord;

  std::uint64_t operator[](CellClass c) const noexcept { return counts[index_of(c)]; }
  std::uint64_t total() const noexcept;
};

Hct hct_from_detections(std::span<const Detection> dets);

/// 12 class proportions (normalized over the 12-class subtotal) followed by
/// the myeloid-to-erythroid ratio.
struct ConvergenceVector {
  static constexpr std::size_t kSize = kConvergenceClasses.size() + 1;
  std::array<double, kSize> values{};
  bool bm_me_defined = false;
};

/// Half the sum of (x_i - y_i)^2 / (x_i + y_i); zero-denominator terms count
/// as 0. Throws kDimensionMismatch for unequal lengths.
double chi_square_distance(std::span<const double> x, std::span<const double> y);
double chi_square_distance(const ConvergenceVector& x, const ConvergenceVector& y);

/// (blast + promyelocyte + myelocyte + metamyelocyte + neutrophil +
/// eosinophil) / erythroblast; nullopt when there are no erythroblasts.
std::optional<double> bm_me_ratio(const ClassCounts& counts) noexcept;

/// Sum of counts over kConvergenceClasses.
std::uint64_t convergence_subtotal(const ClassCounts& counts) noexcept;

/// Throws kEmptyHistogram when no convergence-class object has been counted.
ConvergenceVector convergence_vector(const ClassCounts& counts);

struct TracePoint {
  std::size_t tile_index = 0;  // 1-based index of the accumulation producing it
  double distance = 0.0;
};

/// True iff the last `patience` distances are all below `threshold`. Traces
/// shorter than `patience` are not converged.
bool check_convergence(std::span<const TracePoint> trace, double threshold, int patience);

struct ConvergenceParams {
  double threshold = 1e-5;
  int patience = 10;
};

enum class AccumulateMode { kStrict, kForced };

/// Integrated histogram accumulated across tiles, with the chi-square trace
/// between successive convergence vectors.
struct Ihct {
  ClassCounts counts{};
  std::size_t tiles_seen = 0;
  std::vector<TracePoint> trace;
  bool converged = false;
  ConvergenceParams params;
};

/// Adds one tile. The trace gains one point from the second tile on; states
/// with an empty 12-class subtotal use the zero vector, and convergence is
/// never declared while the subtotal is zero. Throws kAlreadyConverged in
/// strict mode once converged.
Ihct accumulate(Ihct ihct, const Hct& hct, AccumulateMode mode = AccumulateMode::kStrict);
void accumulate_into(Ihct& ihct, const Hct& hct, AccumulateMode mode = AccumulateMode::kStrict);

struct NdcReport {
  std::string slide_id;
  ClassCounts counts{};
  /// Percentages over kConvergenceClasses (fractions summing to 1).
  std::array<double, kConvergenceClasses.size()> percentages{};
  double bm_me = 0.0;
  bool bm_me_defined = false;
  double chi_square_final = 0.0;
  std::size_t tiles_seen = 0;
  std::uint64_t cells_counted = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
};

/// Throws kEmptyHistogram when no convergence-class cell was counted.
NdcReport ndc_report(const Ihct& ihct, const std::string& slide_id = "");

/// Percentage of `c` in the report; nullopt for auxiliary classes.
std::optional<double> ndc_percentage(const NdcReport& report, CellClass c) noexcept;

/// JSON: {slide_id, counts{}, percentages{}, bm_me, bm_me_defined,
/// chi_square_final, tiles_seen, cells_counted, converged, trace[]}.
nlohmann::json to_json(const NdcReport& report);
NdcReport ndc_report_from_json(const nlohmann::json& j);

/// One row per class: class,count,percentage (blank for auxiliary classes),
/// followed by summary rows.
std::string ndc_report_csv(const NdcReport& report);

}  // namespace marrow

#endif  // MARROW_CYTOLOGY_HPP_
