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

#ifndef MARROW_WIRE_HPP_
#define MARROW_WIRE_HPP_

// HTTP transport for inference backends.
//
//   GET  <base>/health  -> {"name", "version", "max_concurrency"}
//   POST <base>/score   body: tile PNG; headers X-Slide-Id, X-Tile-Row,
//                       X-Tile-Col -> {"p": <double>}
//   POST <base>/detect  same request -> {"boxes": [{"class_id", "cx", "cy",
//                       "w", "h", "confidence"}]}
//
// Errors from a server are {"error": <code>, "message": <text>} with a
// non-2xx status.

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "marrow/backend.hpp"
#include "marrow/detection.hpp"
#include "marrow/roi_gate.hpp"

namespace marrow {

struct Endpoint {
  std::string scheme = "http";
  std::string host;
  int port = 80;
  std::string base_path;  // no trailing slash

  std::string str() const;
};

/// Parses "http://host[:port][/base]". Throws kInvalidConfig.
Endpoint parse_endpoint(const std::string& url);

struct HttpOptions {
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds read_timeout{30000};
};

class HttpRoiBackend final : public TileClassifierBackend {
 public:
  explicit HttpRoiBackend(Endpoint endpoint, HttpOptions options = {});

  /// Cached from the last successful health check; a placeholder before.
  BackendInfo info() const override;
  /// GET /health; throws kBackendUnavailable when unreachable or unhealthy.
  /// Adopts the advertised capacity, so call it before concurrent use.
  void check_available() const override;
  double score(const Tile& tile) override;

 private:
  Endpoint endpoint_;
  HttpOptions options_;
  mutable BackendInfo info_;
  mutable std::unique_ptr<CapacityLimiter> limiter_;
};

class HttpDetectorBackend final : public DetectorBackend {
 public:
  explicit HttpDetectorBackend(Endpoint endpoint, HttpOptions options = {});

  BackendInfo info() const override;
  void check_available() const override;
  std::vector<RawBox> detect(const Tile& tile) override;

 private:
  Endpoint endpoint_;
  HttpOptions options_;
  mutable BackendInfo info_;
  mutable std::unique_ptr<CapacityLimiter> limiter_;
};

/// Serves local backends over the protocol above. Either backend may be
/// null, in which case its route answers 404.
class BackendServer {
 public:
  BackendServer(TileClassifierBackend* roi, DetectorBackend* detector);
  ~BackendServer();
  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace marrow

#endif  // MARROW_WIRE_HPP_
