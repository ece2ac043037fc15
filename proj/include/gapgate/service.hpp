#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "gapgate/runner.hpp"

namespace gapgate {

inline constexpr int kApiSchemaVersion = 1;

// HTTP API over in-memory sessions. One run at a time per session; other
// sessions proceed concurrently.
class Service {
 public:
  explicit Service(Workspace workspace);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port; the
  // bound port is returned. Throws Io when binding fails.
  int start(const std::string& host, int port);
  // Blocks until stop() is called from another thread or a signal handler.
  void listen(const std::string& host, int port);
  void stop();

  static nlohmann::json openapi();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gapgate
