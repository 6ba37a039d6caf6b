#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "fb/fb_model.hpp"

namespace fb::service {

/// Response of a route handler: HTTP status plus JSON body.
struct Response {
  int status = 200;
  std::string body;
};

/// Stateless request handlers over one immutable model. Transport-free so
/// they can be exercised directly in tests; Server binds them to HTTP.
class Api {
 public:
  explicit Api(std::shared_ptr<const FBModel> model);

  [[nodiscard]] Response env_info() const;
  [[nodiscard]] Response reward_spec(const std::string& body) const;
  [[nodiscard]] Response rollout(const std::string& body) const;
  [[nodiscard]] Response heatmap(const std::string& spec_json, int resolution) const;
  [[nodiscard]] Response embedding(const std::string& kind) const;

  [[nodiscard]] const FBModel& model() const { return *model_; }

 private:
  std::shared_ptr<const FBModel> model_;
};

/// Blocking HTTP server. Routes:
///   GET  /api/env
///   POST /api/reward-spec
///   POST /api/rollout
///   GET  /api/heatmap?spec=<json>[&resolution=n]
///   GET  /api/embedding?kind=B|F
class Server {
 public:
  explicit Server(std::shared_ptr<const FBModel> model);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and serves until stop(). Port 0 picks a free port. Returns false if binding fails.
  bool listen(const std::string& host, int port);
  /// Binds to a free port without serving yet; returns the port or -1.
  int bind_any(const std::string& host);
  /// Serves on a socket bound by bind_any().
  bool serve();
  void stop();
  [[nodiscard]] bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fb::service
