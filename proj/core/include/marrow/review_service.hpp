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

#ifndef MARROW_REVIEW_SERVICE_HPP_
#define MARROW_REVIEW_SERVICE_HPP_

// Review store and HTTP service for the active-learning correction loop.
//
//   GET  /classes                 -> {"classes": [19 names in id order]}
//   GET  /queue                   -> {"tiles": [{"id", "corrected", "revision"}],
//                                     "total", "corrected"}
//   GET  /tile/{id}               -> {"id", "image_url", "width", "height",
//                                     "predictions": [box], "corrections": [box] | null,
//                                     "revision"}
//   GET  /tile/{id}/image         -> image/png
//   POST /tile/{id}/corrections   body {"boxes": [box], "base_revision"?: n}
//                                 -> {"id", "revision"}
//   POST /merge                   -> {"version", "changed", "tiles", "class_deltas",
//                                     "class_counts"}
//
// box = {"class", "cx", "cy", "w", "h", "source"?, "confidence"?}. Errors
// are {"error", "message"} with 400 (bad body), 404 (unknown tile) or 409
// (stale base_revision, a second unversioned correction, or conflicting
// duplicates at merge).

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "marrow/dataset.hpp"

namespace marrow {

struct QueueEntry {
  std::string id;
  bool corrected = false;
  std::uint64_t revision = 0;
};

struct ReviewTile {
  std::string id;
  AnnotationRecord predictions;
  std::optional<AnnotationRecord> corrections;
  std::uint64_t revision = 0;
};

struct MergeOutcome {
  std::uint64_t version = 0;
  bool changed = false;
  std::vector<std::string> tiles;
  std::map<std::string, std::int64_t> class_deltas;
  ClassCounts class_counts{};
};

/// File-backed store over a review package directory. Corrections live in
/// corrections/<id>.json ({"revision", "record"}) and are replaced
/// atomically, so they survive restarts. Reads may run concurrently; writes
/// are serialized.
class ReviewStore {
 public:
  ReviewStore(std::filesystem::path package_dir, std::filesystem::path manifest_path);

  std::vector<QueueEntry> queue() const;
  /// Throws kNotFound for ids outside the queue.
  ReviewTile tile(const std::string& id) const;
  std::filesystem::path image_path(const std::string& id) const;

  /// Stores the boxes as the tile's correction and returns the new
  /// revision. With `base_revision` the write succeeds only if it matches
  /// the stored revision; without it only if the tile has no correction yet.
  /// Throws kNotFound, kConflict, kUnconfirmedBox or kInvalidGeometry.
  std::uint64_t submit(const std::string& id, std::vector<BoxAnnotation> boxes,
                       std::optional<std::uint64_t> base_revision);

  /// Merges every corrected tile into the manifest (queued tiles count as
  /// pending), saves it, and archives the package queue under
  /// archive/v<version>/. A no-op merge leaves the queue in place.
  MergeOutcome merge(const MergeOptions& options = {});

 private:
  bool in_queue(const std::string& id) const;
  std::filesystem::path correction_path(const std::string& id) const;
  std::optional<std::pair<std::uint64_t, AnnotationRecord>> load_correction(
      const std::string& id) const;

  std::filesystem::path dir_;
  std::filesystem::path manifest_path_;
  mutable std::shared_mutex mu_;
};

class ReviewServer {
 public:
  explicit ReviewServer(ReviewStore& store);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds (port 0 picks a free port), serves on a background thread and
  /// returns the port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Box JSON used by the review API.
nlohmann::json box_to_json(const BoxAnnotation& box);
/// Source defaults to human. Throws kParseError / kUnknownClassName.
BoxAnnotation box_from_json(const nlohmann::json& j);

}  // namespace marrow

#endif  // MARROW_REVIEW_SERVICE_HPP_
