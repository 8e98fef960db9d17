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

#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "marrow/augment.hpp"
#include "marrow/cytology.hpp"
#include "marrow/detection.hpp"
#include "marrow/eval_metrics.hpp"
#include "marrow/synthetic.hpp"
#include "marrow/wsi_io.hpp"

namespace {

using namespace marrow;

std::vector<Detection> clustered(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  std::vector<BBox> centers(n / 4 + 1);
  for (auto& c : centers) c = {u(rng), u(rng), 0.04, 0.04};
  std::vector<Detection> out;
  for (std::size_t i = 0; i < n; ++i) {
    const BBox& c = centers[i % centers.size()];
    out.push_back({{c.cx + jitter(rng), c.cy + jitter(rng), 0.04, 0.04},
                   static_cast<CellClass>(i % 4),
                   u(rng),
                   {0, 0},
                   "b"});
  }
  return out;
}

void BM_DiouNms(benchmark::State& state) {
  const auto raw = clustered(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(diou_nms(raw));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DiouNms)->Arg(50)->Arg(300)->Arg(1000);

void BM_MatchAndScore(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<AnnotationRecord> gts(10);
  std::vector<Detection> preds;
  for (int img = 0; img < 10; ++img) {
    gts[static_cast<std::size_t>(img)].tile = {"b", GridCoord{0, img}, ""};
    for (auto d : clustered(n / 10, static_cast<std::uint64_t>(img))) {
      d.tile_coord = {0, img};
      gts[static_cast<std::size_t>(img)].boxes.push_back({d.bbox, d.cls, BoxSource::kHuman, std::nullopt});
      d.bbox.cx += 0.005;
      preds.push_back(d);
    }
  }
  for (auto _ : state) {
    const MatchResult m = match_detections(preds, gts);
    benchmark::DoNotOptimize(evaluate_detections(m));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(preds.size()));
}
BENCHMARK(BM_MatchAndScore)->Arg(200)->Arg(2000);

void BM_Accumulate(benchmark::State& state) {
  SamplingDetector detector(synthetic::reference_class_counts(), synthetic::kReferenceObjectsPerTile, 7);
  Tile tile;
  tile.slide_id = "bench";
  tile.pixels = RgbImage(1, 1);
  std::vector<Hct> tiles;
  for (int i = 0; i < 600; ++i) {
    tile.coord = {i / 20, i % 20};
    tiles.push_back(hct_from_detections(detect_raw(detector, tile)));
  }
  for (auto _ : state) {
    Ihct ihct;
    for (const Hct& h : tiles) accumulate_into(ihct, h, AccumulateMode::kForced);
    benchmark::DoNotOptimize(ihct.trace.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tiles.size()));
}
BENCHMARK(BM_Accumulate);

Sample busy_tile() {
  std::vector<synthetic::PlantedCell> cells;
  for (int i = 0; i < 12; ++i) cells.push_back({CellClass::kBlast, 40.0 + 38 * i, 60.0 + 30 * i, 10});
  Sample s;
  s.image = synthetic::render_tile(512, cells);
  for (const auto& c : cells) {
    s.boxes.push_back({{c.cx / 512, c.cy / 512, 20.0 / 512, 20.0 / 512}, c.cls, BoxSource::kHuman, std::nullopt});
  }
  return s;
}

void BM_AugmentGeometric(benchmark::State& state) {
  const Sample s = busy_tile();
  std::uint64_t seed = 0;
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(augment_geometric(s, {}, seed++));
    } catch (const std::exception&) {
    }
  }
}
BENCHMARK(BM_AugmentGeometric)->Unit(benchmark::kMillisecond);

void BM_AugmentPhotometric(benchmark::State& state) {
  const Sample s = busy_tile();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(augment_photometric(s, {}, seed++));
}
BENCHMARK(BM_AugmentPhotometric)->Unit(benchmark::kMillisecond);

class SlideFixture : public benchmark::Fixture {
 public:
  void SetUp(const benchmark::State&) override {
    if (!slide_.reader) {
      dir_ = std::filesystem::temp_directory_path() / "marrow-bench-slide";
      std::filesystem::remove_all(dir_);
      synthetic::SlideSpec spec;
      spec.slide_id = "bench";
      const synthetic::SyntheticSlide synth(spec);
      synth.write_manifest(dir_ / "manifest");
      synth.write_tiff(dir_ / "slide.tiff");
      manifest_ = open_slide(dir_ / "manifest");
      slide_ = open_slide(dir_ / "slide.tiff");
    }
  }
  ~SlideFixture() override { std::filesystem::remove_all(dir_); }

 protected:
  std::filesystem::path dir_;
  SlideHandle manifest_;
  SlideHandle slide_;
};

BENCHMARK_DEFINE_F(SlideFixture, ManifestTileRead)(benchmark::State& state) {
  const TileGrid grid = make_grid(manifest_);
  const auto order = tile_order(grid, TileOrder::kSeededShuffle, 1);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(extract_tile(manifest_, grid, order[i++ % order.size()]));
}
BENCHMARK_REGISTER_F(SlideFixture, ManifestTileRead)->Unit(benchmark::kMillisecond);

BENCHMARK_DEFINE_F(SlideFixture, TiffTileRead)(benchmark::State& state) {
  const TileGrid grid = make_grid(slide_);
  const auto order = tile_order(grid, TileOrder::kSeededShuffle, 1);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(extract_tile(slide_, grid, order[i++ % order.size()]));
}
BENCHMARK_REGISTER_F(SlideFixture, TiffTileRead)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
