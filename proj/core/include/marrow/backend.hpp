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

#ifndef MARROW_BACKEND_HPP_
#define MARROW_BACKEND_HPP_

#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <string>

namespace marrow {

/// Identity and capacity of an inference backend.
struct BackendInfo {
  std::string name;
  std::string version;
  /// Concurrent requests the backend accepts; 0 means unbounded.
  std::size_t max_concurrency = 0;

  std::string id() const { return name + "@" + version; }
};

/// Blocks callers beyond a backend's declared capacity.
class CapacityLimiter {
 public:
  explicit CapacityLimiter(std::size_t capacity) : capacity_(capacity) {}

  class Slot {
   public:
    explicit Slot(CapacityLimiter& owner) : owner_(owner) { owner_.acquire(); }
    ~Slot() { owner_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    CapacityLimiter& owner_;
  };

  Slot slot() { return Slot(*this); }

 private:
  void acquire() {
    if (capacity_ == 0) return;
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_use_ < capacity_; });
    ++in_use_;
  }
  void release() {
    if (capacity_ == 0) return;
    {
      std::lock_guard lock(mu_);
      --in_use_;
    }
    cv_.notify_one();
  }

  std::size_t capacity_;
  std::size_t in_use_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

}  // namespace marrow

#endif  // MARROW_BACKEND_HPP_
