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

#include "marrow/review_service.hpp"

#include <fstream>
#include <set>
#include <thread>

#include <httplib.h>

#include "marrow/error.hpp"

namespace marrow {
namespace fs = std::filesystem;
namespace {

using Json = nlohmann::json;

bool safe_id(const std::string& id) {
  if (id.empty() || id.size() > 200 || id == "." || id == "..") return false;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

void write_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << text;
    if (!out.flush()) fail(ErrorCode::kIoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Json boxes_json(const std::vector<BoxAnnotation>& boxes) {
  Json arr = Json::array();
  for (const auto& b : boxes) arr.push_back(box_to_json(b));
  return arr;
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownTileRef: return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kConflictingDuplicate: return 409;
    case ErrorCode::kParseError:
    case ErrorCode::kUnknownClassName:
    case ErrorCode::kUnconfirmedBox:
    case ErrorCode::kInvalidGeometry: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, const Json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

}  // namespace

Json box_to_json(const BoxAnnotation& b) {
  Json j = {{"class", class_name(b.cls)},
            {"cx", b.bbox.cx},
            {"cy", b.bbox.cy},
            {"w", b.bbox.w},
            {"h", b.bbox.h},
            {"source", to_string(b.source)}};
  if (b.confidence) j["confidence"] = *b.confidence;
  return j;
}

BoxAnnotation box_from_json(const Json& j) {
  try {
    BoxAnnotation b;
    b.cls = class_from_name_or_throw(j.at("class").get<std::string>());
    b.bbox = {j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("w").get<double>(),
              j.at("h").get<double>()};
    const auto source = box_source_from_string(j.value("source", std::string("human")));
    if (!source) fail(ErrorCode::kParseError, "unknown box source");
    b.source = *source;
    if (j.contains("confidence") && !j.at("confidence").is_null()) {
      b.confidence = j.at("confidence").get<double>();
    }
    return b;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kParseError, std::string("box JSON: ") + e.what());
  }
}

ReviewStore::ReviewStore(fs::path package_dir, fs::path manifest_path)
    : dir_(std::move(package_dir)), manifest_path_(std::move(manifest_path)) {
  if (!fs::is_directory(dir_)) fail(ErrorCode::kNotFound, "no review package at " + dir_.string());
}

bool ReviewStore::in_queue(const std::string& id) const {
  if (!safe_id(id) || !fs::exists(dir_ / "queue.json")) return false;
  const auto keys = read_queue(dir_);
  return std::find(keys.begin(), keys.end(), id) != keys.end();
}

fs::path ReviewStore::correction_path(const std::string& id) const {
  return dir_ / "corrections" / (id + ".json");
}

fs::path ReviewStore::image_path(const std::string& id) const {
  std::shared_lock lock(mu_);
  if (!in_queue(id)) fail(ErrorCode::kNotFound, "unknown tile " + id);
  return dir_ / "images" / (id + ".png");
}

std::optional<std::pair<std::uint64_t, AnnotationRecord>> ReviewStore::load_correction(
    const std::string& id) const {
  const fs::path p = correction_path(id);
  if (!fs::exists(p)) return std::nullopt;
  std::ifstream in(p);
  try {
    const Json j = Json::parse(in);
    return std::make_pair(j.at("revision").get<std::uint64_t>(),
                          annotation_record_from_json(j.at("record")));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kParseError, p.string() + ": " + e.what());
  }
}

std::vector<QueueEntry> ReviewStore::queue() const {
  std::shared_lock lock(mu_);
  std::vector<QueueEntry> out;
  if (!fs::exists(dir_ / "queue.json")) return out;
  for (const auto& id : read_queue(dir_)) {
    QueueEntry e{id, false, 0};
    if (auto c = load_correction(id)) {
      e.corrected = true;
      e.revision = c->first;
    }
    out.push_back(e);
  }
  return out;
}

ReviewTile ReviewStore::tile(const std::string& id) const {
  std::shared_lock lock(mu_);
  if (!in_queue(id)) fail(ErrorCode::kNotFound, "unknown tile " + id);
  ReviewTile t;
  t.id = id;
  t.predictions = read_annotation_file(dir_ / "labels" / (id + ".txt"));
  const fs::path image = dir_ / "images" / (id + ".png");
  if (fs::exists(image)) {
    const auto [w, h] = png_dimensions(image);
    t.predictions.image_width = w;
    t.predictions.image_height = h;
  }
  if (auto c = load_correction(id)) {
    t.revision = c->first;
    t.corrections = std::move(c->second);
  }
  return t;
}

std::uint64_t ReviewStore::submit(const std::string& id, std::vector<BoxAnnotation> boxes,
                                  std::optional<std::uint64_t> base_revision) {
  for (const auto& b : boxes) {
    if (b.source == BoxSource::kModel) {
      fail(ErrorCode::kUnconfirmedBox, "corrections must be human or model-confirmed");
    }
    if (!is_valid(b.bbox) || !is_inside_unit(b.bbox)) {
      fail(ErrorCode::kInvalidGeometry, "correction box is invalid or outside the tile");
    }
  }
  std::unique_lock lock(mu_);
  if (!in_queue(id)) fail(ErrorCode::kNotFound, "unknown tile " + id);
  const auto existing = load_correction(id);
  const std::uint64_t current = existing ? existing->first : 0;
  if (base_revision ? *base_revision != current : existing.has_value()) {
    fail(ErrorCode::kConflict, "tile " + id + " is at revision " + std::to_string(current));
  }
  AnnotationRecord rec = read_annotation_file(dir_ / "labels" / (id + ".txt"));
  rec.tile = tile_ref_from_key(id);
  const fs::path image = dir_ / "images" / (id + ".png");
  if (fs::exists(image)) {
    const auto [w, h] = png_dimensions(image);
    rec.image_width = w;
    rec.image_height = h;
  }
  rec.boxes = std::move(boxes);
  const std::uint64_t revision = current + 1;
  write_atomic(correction_path(id), Json{{"revision", revision}, {"record", to_json(rec)}}.dump(2));
  return revision;
}

MergeOutcome ReviewStore::merge(const MergeOptions& options) {
  std::unique_lock lock(mu_);
  DatasetManifest manifest = fs::exists(manifest_path_) ? load_manifest(manifest_path_) : DatasetManifest{};
  std::vector<std::string> keys;
  if (fs::exists(dir_ / "queue.json")) keys = read_queue(dir_);

  std::set<std::string> known;
  for (const auto& r : manifest.records) known.insert(r.tile.key());
  for (const auto& t : manifest.pending) known.insert(t.key());
  std::vector<AnnotationRecord> corrections;
  for (const auto& id : keys) {
    if (!known.contains(id)) {
      manifest.pending.push_back(tile_ref_from_key(id));
      known.insert(id);
    }
    if (auto c = load_correction(id)) corrections.push_back(std::move(c->second));
  }

  const DatasetManifest next = merge_confirmed(manifest, corrections, options);
  MergeOutcome out;
  out.version = next.version;
  out.class_counts = next.class_counts();
  out.changed = next.version != manifest.version;
  if (!out.changed) return out;

  out.tiles = next.provenance.back().tiles;
  out.class_deltas = next.provenance.back().class_deltas;
  save_manifest(manifest_path_, next);

  const fs::path archive = dir_ / "archive" / ("v" + std::to_string(next.version));
  fs::create_directories(archive);
  for (const char* name : {"queue.json", "labels", "images", "corrections"}) {
    if (fs::exists(dir_ / name)) fs::rename(dir_ / name, archive / name);
  }
  return out;
}

struct ReviewServer::Impl {
  ReviewStore& store;
  httplib::Server server;
  std::thread thread;

  explicit Impl(ReviewStore& s) : store(s) {}

  template <typename F>
  static void guarded(httplib::Response& res, F&& body) {
    try {
      body();
    } catch (const Error& e) {
      send_json(res, {{"error", to_string(e.code())}, {"message", e.what()}}, status_for(e.code()));
    } catch (const std::exception& e) {
      send_json(res, {{"error", "Internal"}, {"message", e.what()}}, 500);
    }
  }

  void install() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/classes", [](const httplib::Request&, httplib::Response& res) {
      Json names = Json::array();
      for (CellClass c : kAllClasses) names.push_back(class_name(c));
      send_json(res, {{"classes", names}});
    });

    server.Get("/queue", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        Json tiles = Json::array();
        std::size_t corrected = 0;
        for (const auto& e : store.queue()) {
          tiles.push_back({{"id", e.id}, {"corrected", e.corrected}, {"revision", e.revision}});
          corrected += e.corrected ? 1 : 0;
        }
        const std::size_t total = tiles.size();
        send_json(res, {{"tiles", std::move(tiles)}, {"total", total}, {"corrected", corrected}});
      });
    });

    server.Get(R"(/tile/([^/]+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const fs::path p = store.image_path(req.matches[1]);
        std::ifstream in(p, std::ios::binary);
        if (!in) fail(ErrorCode::kNotFound, "image missing for " + std::string(req.matches[1]));
        res.set_content(std::string(std::istreambuf_iterator<char>(in), {}), "image/png");
      });
    });

    server.Get(R"(/tile/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const ReviewTile t = store.tile(req.matches[1]);
        send_json(res, {{"id", t.id},
                        {"image_url", "/tile/" + t.id + "/image"},
                        {"width", t.predictions.image_width},
                        {"height", t.predictions.image_height},
                        {"predictions", boxes_json(t.predictions.boxes)},
                        {"corrections", t.corrections ? boxes_json(t.corrections->boxes) : Json()},
                        {"revision", t.revision}});
      });
    });

    server.Post(R"(/tile/([^/]+)/corrections)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] {
                    Json body;
                    try {
                      body = Json::parse(req.body);
                    } catch (const Json::exception& e) {
                      fail(ErrorCode::kParseError, std::string("body: ") + e.what());
                    }
                    if (!body.is_object() || !body.contains("boxes") || !body.at("boxes").is_array()) {
                      fail(ErrorCode::kParseError, "body must be {\"boxes\": [...]}");
                    }
                    std::vector<BoxAnnotation> boxes;
                    for (const auto& jb : body.at("boxes")) boxes.push_back(box_from_json(jb));
                    std::optional<std::uint64_t> base;
                    if (body.contains("base_revision") && !body.at("base_revision").is_null()) {
                      if (!body.at("base_revision").is_number_unsigned()) {
                        fail(ErrorCode::kParseError, "base_revision must be a non-negative integer");
                      }
                      base = body.at("base_revision").get<std::uint64_t>();
                    }
                    const std::string id = req.matches[1];
                    const std::uint64_t rev = store.submit(id, std::move(boxes), base);
                    send_json(res, {{"id", id}, {"revision", rev}});
                  });
                });

    server.Post("/merge", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        const MergeOutcome m = store.merge();
        send_json(res, {{"version", m.version},
                        {"changed", m.changed},
                        {"tiles", m.tiles},
                        {"class_deltas", m.class_deltas},
                        {"class_counts", named_class_counts(m.class_counts)}});
      });
    });
  }
};

ReviewServer::ReviewServer(ReviewStore& store) : impl_(std::make_unique<Impl>(store)) {
  impl_->install();
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ReviewServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    fail(ErrorCode::kIoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void ReviewServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace marrow
