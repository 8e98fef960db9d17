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

#include "marrow/wire.hpp"

#include <charconv>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "marrow/error.hpp"

namespace marrow {
namespace {

using Json = nlohmann::json;

httplib::Client make_client(const Endpoint& ep, const HttpOptions& opt) {
  httplib::Client cli(ep.host, ep.port);
  cli.set_connection_timeout(opt.connect_timeout);
  cli.set_read_timeout(opt.read_timeout);
  cli.set_write_timeout(opt.read_timeout);
  cli.set_keep_alive(false);
  return cli;
}

BackendInfo fetch_health(const Endpoint& ep, const HttpOptions& opt) {
  auto cli = make_client(ep, opt);
  auto res = cli.Get(ep.base_path + "/health");
  if (!res) {
    fail(ErrorCode::kBackendUnavailable,
         "backend " + ep.str() + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    fail(ErrorCode::kBackendUnavailable,
         "backend " + ep.str() + " unhealthy (HTTP " + std::to_string(res->status) + ")");
  }
  try {
    const Json j = Json::parse(res->body);
    return {j.at("name").get<std::string>(), j.at("version").get<std::string>(),
            j.value("max_concurrency", std::size_t{0})};
  } catch (const Json::exception& e) {
    fail(ErrorCode::kBackendUnavailable, "backend " + ep.str() + " sent bad health JSON");
  }
}

Json post_tile(const Endpoint& ep, const HttpOptions& opt, const std::string& route,
               const Tile& tile) {
  const auto png = encode_png(tile.pixels);
  httplib::Headers headers{{"X-Slide-Id", tile.slide_id},
                           {"X-Tile-Row", std::to_string(tile.coord.row)},
                           {"X-Tile-Col", std::to_string(tile.coord.col)}};
  auto cli = make_client(ep, opt);
  auto res = cli.Post(ep.base_path + route, headers,
                      std::string(reinterpret_cast<const char*>(png.data()), png.size()),
                      "image/png");
  if (!res) {
    fail(ErrorCode::kBackendUnavailable,
         "backend " + ep.str() + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status == 503) fail(ErrorCode::kBackendUnavailable, "backend " + ep.str() + " unavailable");
  if (res->status != 200) {
    fail(ErrorCode::kInferenceFailure,
         "backend " + ep.str() + route + " failed (HTTP " + std::to_string(res->status) + "): " +
             res->body);
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInferenceFailure, "backend " + ep.str() + " sent malformed JSON");
  }
}

int header_int(const httplib::Request& req, const char* name) {
  const std::string v = req.get_header_value(name);
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    fail(ErrorCode::kParseError, std::string("missing or bad header ") + name);
  }
  return out;
}

Tile tile_from_request(const httplib::Request& req) {
  Tile tile;
  tile.slide_id = req.get_header_value("X-Slide-Id");
  tile.coord = {header_int(req, "X-Tile-Row"), header_int(req, "X-Tile-Col")};
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(req.body.data());
  tile.pixels = decode_png(std::span<const std::uint8_t>(bytes, req.body.size()));
  return tile;
}

void send_error(httplib::Response& res, int status, const Error& e) {
  res.status = status;
  res.set_content(Json{{"error", to_string(e.code())}, {"message", e.what()}}.dump(),
                  "application/json");
}

}  // namespace

std::string Endpoint::str() const {
  return scheme + "://" + host + ":" + std::to_string(port) + base_path;
}

Endpoint parse_endpoint(const std::string& url) {
  Endpoint ep;
  std::string rest = url;
  const auto scheme_end = rest.find("://");
  if (scheme_end != std::string::npos) {
    ep.scheme = rest.substr(0, scheme_end);
    rest = rest.substr(scheme_end + 3);
  }
  if (ep.scheme != "http") fail(ErrorCode::kInvalidConfig, "only http:// endpoints are supported: " + url);
  const auto slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  if (slash != std::string::npos) ep.base_path = rest.substr(slash);
  while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  const auto colon = authority.rfind(':');
  if (colon != std::string::npos) {
    const std::string port = authority.substr(colon + 1);
    const auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), ep.port);
    if (ec != std::errc() || p != port.data() + port.size() || ep.port <= 0 || ep.port > 65535) {
      fail(ErrorCode::kInvalidConfig, "bad port in endpoint: " + url);
    }
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) fail(ErrorCode::kInvalidConfig, "endpoint has no host: " + url);
  ep.host = authority;
  return ep;
}

HttpRoiBackend::HttpRoiBackend(Endpoint endpoint, HttpOptions options)
    : endpoint_(std::move(endpoint)),
      options_(options),
      info_{"http-roi", "unknown", 0},
      limiter_(std::make_unique<CapacityLimiter>(0)) {}

BackendInfo HttpRoiBackend::info() const { return info_; }

void HttpRoiBackend::check_available() const {
  info_ = fetch_health(endpoint_, options_);
  limiter_ = std::make_unique<CapacityLimiter>(info_.max_concurrency);
}

double HttpRoiBackend::score(const Tile& tile) {
  auto slot = limiter_->slot();
  const Json j = post_tile(endpoint_, options_, "/score", tile);
  if (!j.contains("p") || !j.at("p").is_number()) {
    fail(ErrorCode::kInferenceFailure, "score response lacks numeric 'p'");
  }
  return j.at("p").get<double>();
}

HttpDetectorBackend::HttpDetectorBackend(Endpoint endpoint, HttpOptions options)
    : endpoint_(std::move(endpoint)),
      options_(options),
      info_{"http-detector", "unknown", 0},
      limiter_(std::make_unique<CapacityLimiter>(0)) {}

BackendInfo HttpDetectorBackend::info() const { return info_; }

void HttpDetectorBackend::check_available() const {
  info_ = fetch_health(endpoint_, options_);
  limiter_ = std::make_unique<CapacityLimiter>(info_.max_concurrency);
}

std::vector<RawBox> HttpDetectorBackend::detect(const Tile& tile) {
  auto slot = limiter_->slot();
  const Json j = post_tile(endpoint_, options_, "/detect", tile);
  std::vector<RawBox> out;
  try {
    for (const auto& b : j.at("boxes")) {
      out.push_back({{b.at("cx").get<double>(), b.at("cy").get<double>(), b.at("w").get<double>(),
                      b.at("h").get<double>()},
                     b.at("class_id").get<std::int64_t>(),
                     b.at("confidence").get<double>()});
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInferenceFailure, std::string("malformed detect response: ") + e.what());
  }
  return out;
}

struct BackendServer::Impl {
  TileClassifierBackend* roi = nullptr;
  DetectorBackend* detector = nullptr;
  std::mutex backend_mu;
  httplib::Server server;
  std::thread thread;

  void install() {
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      BackendInfo info = roi ? roi->info() : detector ? detector->info() : BackendInfo{"none", "0", 0};
      try {
        if (roi) roi->check_available();
        if (detector) detector->check_available();
      } catch (const Error& e) {
        send_error(res, 503, e);
        return;
      }
      res.set_content(Json{{"name", info.name},
                           {"version", info.version},
                           {"max_concurrency", info.max_concurrency}}
                          .dump(),
                      "application/json");
    });
    server.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      if (!roi) {
        res.status = 404;
        return;
      }
      handle(res, [&] {
        const Tile tile = tile_from_request(req);
        std::lock_guard lock(backend_mu);
        roi->check_available();
        return Json{{"p", roi->score(tile)}};
      });
    });
    server.Post("/detect", [this](const httplib::Request& req, httplib::Response& res) {
      if (!detector) {
        res.status = 404;
        return;
      }
      handle(res, [&] {
        const Tile tile = tile_from_request(req);
        std::lock_guard lock(backend_mu);
        detector->check_available();
        Json boxes = Json::array();
        for (const RawBox& b : detector->detect(tile)) {
          boxes.push_back({{"class_id", b.class_id},
                           {"cx", b.bbox.cx},
                           {"cy", b.bbox.cy},
                           {"w", b.bbox.w},
                           {"h", b.bbox.h},
                           {"confidence", b.confidence}});
        }
        return Json{{"boxes", std::move(boxes)}};
      });
    });
  }

  template <typename F>
  static void handle(httplib::Response& res, F&& body) {
    try {
      res.set_content(body().dump(), "application/json");
    } catch (const Error& e) {
      const int status = e.code() == ErrorCode::kBackendUnavailable ? 503
                         : e.code() == ErrorCode::kParseError        ? 400
                                                                     : 422;
      send_error(res, status, e);
    }
  }
};

BackendServer::BackendServer(TileClassifierBackend* roi, DetectorBackend* detector)
    : impl_(std::make_unique<Impl>()) {
  impl_->roi = roi;
  impl_->detector = detector;
  impl_->install();
}

BackendServer::~BackendServer() { stop(); }

int BackendServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void BackendServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    fail(ErrorCode::kIoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void BackendServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace marrow
