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

#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <system_error>

#include <unistd.h>

namespace marrow::testing {
namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool chance(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

/// A box whose corners stay on the 1/128 lattice: even side lengths, centers
/// at integer steps.
BBox box_from_units(int cx, int cy, int w, int h) {
  return {cx / 128.0, cy / 128.0, w / 128.0, h / 128.0};
}

BBox jitter(std::mt19937_64& rng, const BBox& b) {
  const int cx = static_cast<int>(b.cx * 128) + uniform(rng, -2, 2);
  const int cy = static_cast<int>(b.cy * 128) + uniform(rng, -2, 2);
  const int w = std::max(2, static_cast<int>(b.w * 128) + 2 * uniform(rng, -1, 1));
  const int h = std::max(2, static_cast<int>(b.h * 128) + 2 * uniform(rng, -1, 1));
  const int cxc = std::clamp(cx, w / 2, 128 - w / 2);
  const int cyc = std::clamp(cy, h / 2, 128 - h / 2);
  return box_from_units(cxc, cyc, w, h);
}

}  // namespace

BBox lattice_box(std::mt19937_64& rng, int min_side, int max_side) {
  const int w = 2 * uniform(rng, min_side / 2, max_side / 2);
  const int h = 2 * uniform(rng, min_side / 2, max_side / 2);
  return box_from_units(uniform(rng, w / 2, 128 - w / 2), uniform(rng, h / 2, 128 - h / 2), w, h);
}

DetectionInstance random_detection_instance(std::uint64_t seed, std::size_t max_boxes) {
  std::mt19937_64 rng(seed);
  DetectionInstance inst;
  const int images = uniform(rng, 1, 3);
  std::vector<CellClass> classes;
  const int n_classes = uniform(rng, 1, 4);
  for (int i = 0; i < n_classes; ++i) {
    classes.push_back(kEvaluationClasses[static_cast<std::size_t>(uniform(rng, 0, kEvaluationClasses.size() - 1))]);
  }
  const auto pick_class = [&] { return classes[static_cast<std::size_t>(uniform(rng, 0, n_classes - 1))]; };
  const auto conf = [&] { return uniform(rng, 1, 16) / 16.0; };

  for (int i = 0; i < images; ++i) {
    AnnotationRecord rec;
    rec.tile.slide_id = "s";
    rec.tile.coord = GridCoord{0, i};
    inst.ground_truth.push_back(rec);
  }
  const auto n_gt = static_cast<std::size_t>(uniform(rng, 1, static_cast<int>(max_boxes)));
  for (std::size_t k = 0; k < n_gt; ++k) {
    auto& rec = inst.ground_truth[static_cast<std::size_t>(uniform(rng, 0, images - 1))];
    rec.boxes.push_back({lattice_box(rng), pick_class(), BoxSource::kHuman, std::nullopt});
  }

  const auto add_pred = [&](const BBox& b, CellClass c, int image) {
    if (inst.predictions.size() >= max_boxes) return;
    inst.predictions.push_back({b, c, conf(), GridCoord{0, image}, "s"});
  };
  for (int i = 0; i < images; ++i) {
    for (const auto& box : inst.ground_truth[static_cast<std::size_t>(i)].boxes) {
      if (chance(rng, 0.75)) add_pred(jitter(rng, box.bbox), chance(rng, 0.8) ? box.cls : pick_class(), i);
      if (chance(rng, 0.15)) add_pred(jitter(rng, box.bbox), box.cls, i);  // duplicate
    }
  }
  const int spurious = uniform(rng, 0, 4);
  for (int k = 0; k < spurious; ++k) add_pred(lattice_box(rng), pick_class(), uniform(rng, 0, images - 1));
  std::shuffle(inst.predictions.begin(), inst.predictions.end(), rng);
  return inst;
}

std::vector<ScoredLabel> random_scores(std::uint64_t seed, std::size_t max_scores) {
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(uniform(rng, 2, static_cast<int>(max_scores)));
  const double prevalence = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
  const double separation = std::uniform_real_distribution<double>(0.0, 0.4)(rng);
  std::vector<ScoredLabel> out(n);
  for (auto& s : out) {
    s.positive = chance(rng, prevalence);
    const double mu = 0.5 + (s.positive ? separation : -separation) / 2;
    const double raw = std::normal_distribution<double>(mu, 0.2)(rng);
    s.score = std::clamp(static_cast<int>(raw * 100), 0, 100) / 100.0;
  }
  out[0].positive = true;
  out[1].positive = false;
  return out;
}

std::vector<Detection> random_raw_detections(std::uint64_t seed, std::size_t max_boxes) {
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(max_boxes)));
  std::vector<Detection> out;
  // Clustered centers make overlaps likely.
  const int clusters = uniform(rng, 1, 5);
  std::vector<BBox> seeds;
  for (int i = 0; i < clusters; ++i) seeds.push_back(lattice_box(rng, 8, 24));
  for (std::size_t i = 0; i < n; ++i) {
    const BBox base = seeds[static_cast<std::size_t>(uniform(rng, 0, clusters - 1))];
    const BBox b = chance(rng, 0.8) ? jitter(rng, base) : lattice_box(rng);
    const auto cls = static_cast<CellClass>(uniform(rng, 0, 3));
    out.push_back({b, cls, std::uniform_real_distribution<double>(0.0, 1.0)(rng), GridCoord{1, 2}, "nms"});
  }
  return out;
}

AnnotationRecord random_record(std::uint64_t seed, bool voc_exact) {
  std::mt19937_64 rng(seed);
  AnnotationRecord rec;
  if (chance(rng, 0.5)) {
    rec.tile.slide_id = "slide" + std::to_string(uniform(rng, 0, 9));
    rec.tile.coord = GridCoord{uniform(rng, 0, 14), uniform(rng, 0, 19)};
  } else {
    rec.tile.file = "tile_" + std::to_string(uniform(rng, 0, 99999)) + ".png";
  }
  if (voc_exact) {
    rec.image_width = 1 << uniform(rng, 6, 11);
    rec.image_height = 1 << uniform(rng, 6, 11);
  } else {
    rec.image_width = uniform(rng, 64, 2048);
    rec.image_height = uniform(rng, 64, 2048);
  }
  const int n = uniform(rng, 0, 30);
  for (int i = 0; i < n; ++i) {
    BoxAnnotation b;
    b.cls = kAllClasses[static_cast<std::size_t>(uniform(rng, 0, kNumClasses - 1))];
    if (voc_exact) {
      b.bbox = lattice_box(rng, 2, 64);
    } else {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double w = std::max(1e-6, u(rng) * 0.5);
      const double h = std::max(1e-6, u(rng) * 0.5);
      b.bbox = {w / 2 + u(rng) * (1 - w), h / 2 + u(rng) * (1 - h), w, h};
    }
    switch (uniform(rng, 0, 2)) {
      case 0:
        b.source = BoxSource::kHuman;
        break;
      case 1:
        b.source = BoxSource::kModel;
        b.confidence = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        break;
      default:
        b.source = BoxSource::kModelConfirmed;
        break;
    }
    rec.boxes.push_back(b);
  }
  return rec;
}

}  // namespace marrow::testing
