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

#ifndef MARROW_DATASET_HPP_
#define MARROW_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marrow/annotation.hpp"
#include "marrow/cytology.hpp"
#include "marrow/image.hpp"

namespace marrow {

/// One merge into the dataset: the version it produced, when, which tiles
/// and the signed per-class change in object counts.
struct MergeLogEntry {
  std::uint64_t version = 0;
  std::string timestamp;
  std::vector<std::string> tiles;
  std::map<std::string, std::int64_t> class_deltas;  // only non-zero entries

  friend bool operator==(const MergeLogEntry&, const MergeLogEntry&) = default;
};

struct DatasetManifest {
  std::uint64_t version = 1;
  std::vector<AnnotationRecord> records;
  /// Tiles exported for review but not merged yet.
  std::vector<TileRef> pending;
  std::vector<MergeLogEntry> provenance;

  /// Object counts per class, recounted from `records`.
  ClassCounts class_counts() const;
  const AnnotationRecord* find(const std::string& tile_key) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

nlohmann::json to_json(const AnnotationRecord& record);
AnnotationRecord annotation_record_from_json(const nlohmann::json& j);

/// Manifest JSON carries a derived "class_counts" object for readers; it is
/// checked against a recount on load (kParseError on mismatch).
nlohmann::json to_json(const DatasetManifest& manifest);
DatasetManifest dataset_manifest_from_json(const nlohmann::json& j);
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Atomic replace (write to a sibling temp file, then rename).
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// ---------------------------------------------------------------------------
// Cross-validation splits

enum class SplitRole : std::uint8_t { kTrain, kValidation, kTest };

enum class SmallStratumPolicy {
  kThrow,  // kInsufficientData
  kPool,   // pool into a shared "rare" stratum and record a warning
};

struct SplitOptions {
  int folds = 5;
  /// Share of each held-out fold used for validation; the rest is test.
  double validation_share = 0.7;
  std::uint64_t seed = 0;
  SmallStratumPolicy small_strata = SmallStratumPolicy::kThrow;
};

/// Records are stratified by their rarest class (by total object count; ties
/// to the lower class id), or "empty" for records without boxes. Each
/// stratum is spread over folds in a seeded order with a running offset, so
/// per-stratum fold sizes differ by at most one and fold sizes overall by at
/// most one. Inside each held-out fold the validation/test split is applied
/// the same way.
struct SplitPlan {
  int folds = 5;
  std::uint64_t seed = 0;
  std::vector<int> fold_of;               // per record
  std::vector<SplitRole> held_out_role;   // per record: kValidation or kTest
  std::vector<std::string> stratum_of;    // per record
  std::vector<std::string> warnings;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct FoldView {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Stratum key of one record given dataset-wide counts.
std::string stratum_key(const AnnotationRecord& record, const ClassCounts& totals);

SplitPlan stratified_split(const DatasetManifest& manifest, const SplitOptions& options = {});
/// Record indices for fold `fold`: train = every other fold.
FoldView fold_view(const SplitPlan& plan, int fold);

nlohmann::json to_json(const SplitPlan& plan);

// ---------------------------------------------------------------------------
// Oversampling

/// Deterministic replication schedule for one stratum (a class or a tile
/// category). Every one of the `current` units appears `base` times
/// (including the original); the units listed in `extra_units` appear once
/// more.
struct OversampleEntry {
  std::string key;
  std::uint64_t current = 0;
  std::uint64_t target = 0;
  std::uint64_t base = 1;
  std::vector<std::uint64_t> extra_units;  // sorted ascending

  std::uint64_t planned_total() const noexcept { return current * base + extra_units.size(); }
  std::uint64_t multiplicity(std::uint64_t unit) const;

  friend bool operator==(const OversampleEntry&, const OversampleEntry&) = default;
};

struct OversamplePlan {
  std::uint64_t seed = 0;
  /// Only strata that gain copies; an all-identity plan is empty.
  std::vector<OversampleEntry> entries;

  const OversampleEntry* find(const std::string& key) const;
  friend bool operator==(const OversamplePlan&, const OversamplePlan&) = default;
};

/// Throws kInfeasibleTarget when a target is below its current count or a
/// stratum with zero units is asked to grow, and kInvalidConfig when a
/// target names an unknown stratum.
OversamplePlan oversample_plan(const std::map<std::string, std::uint64_t>& counts,
                               const std::map<std::string, std::uint64_t>& targets,
                               std::uint64_t seed = 0);

/// Targets = counts * factor for every stratum.
std::map<std::string, std::uint64_t> targets_from_factor(
    const std::map<std::string, std::uint64_t>& counts, std::uint64_t factor);

/// Class counts keyed by class name.
std::map<std::string, std::uint64_t> named_class_counts(const ClassCounts& counts);

nlohmann::json to_json(const OversamplePlan& plan);

// ---------------------------------------------------------------------------
// Active learning

struct QueryOptions {
  std::size_t batch = 250;
  std::uint64_t seed = 0;
};

/// Ranks candidate tiles (model predictions per tile) for review. A tile's
/// priority is the smallest manifest count among the classes it is predicted
/// to contain; lower counts come first, then more boxes of that class, then
/// a seeded hash of the tile key. Tiles already in the manifest are skipped;
/// tiles without predictions rank last. Returns at most `batch` records.
/// Throws kEmptyPool when no eligible candidate remains.
std::vector<AnnotationRecord> query_rare_tiles(const DatasetManifest& manifest,
                                               std::span<const AnnotationRecord> pool,
                                               const QueryOptions& options = {});

struct MergeOptions {
  /// Timestamp source for the provenance log (ISO-8601 UTC by default).
  std::function<std::string()> clock;
  /// Called with each log entry a merge produces.
  std::function<void(const MergeLogEntry&)> on_merge;
};

std::string utc_timestamp();

/// Applies reviewed records. Each correction replaces the record of its tile
/// (or adds it when the tile is pending). Corrections identical to the
/// stored record are no-ops; if nothing changes the manifest is returned
/// unchanged. Otherwise the version increments and one log entry is added.
/// Throws kUnknownTileRef, kConflictingDuplicate (same tile twice with
/// different boxes) and kUnconfirmedBox (a box with source=model).
DatasetManifest merge_confirmed(const DatasetManifest& manifest,
                                std::span<const AnnotationRecord> corrections,
                                const MergeOptions& options = {});

// ---------------------------------------------------------------------------
// Review packages
//
// Directory layout shared by candidate pools and review packages:
//   images/<key>.png    tile raster
//   labels/<key>.txt    model predictions, yolo-txt with confidence column
//   queue.json          ordered list of tile keys (packages only)

struct ReviewItem {
  AnnotationRecord predictions;
  std::filesystem::path image;  // PNG path
};

void write_pool_item(const std::filesystem::path& dir, const AnnotationRecord& predictions,
                     const RgbImage& image);
/// Items sorted by key. Throws kNotFound when the directory is missing.
std::vector<ReviewItem> read_pool(const std::filesystem::path& dir);

/// Copies the chosen items into `out_dir` and writes queue.json in the given
/// order. Returns the queue keys.
std::vector<std::string> export_review_package(const std::filesystem::path& out_dir,
                                               std::span<const ReviewItem> items);
std::vector<std::string> read_queue(const std::filesystem::path& package_dir);

}  // namespace marrow

#endif  // MARROW_DATASET_HPP_
