#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "exattn/study/service.hpp"

namespace exattn::study {

struct HttpConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir;  // served at / when set
};

/// HTTP+JSON front end of a StudyService.
///   POST /api/session              {"phase", "seed"?, "session_id"?} -> {"session_id", ...}
///   GET  /api/session/:id/next     -> trial (highlights only in the follow-up phase)
///   POST /api/session/:id/response {"trial_id", "choice"} -> {"correct"}
///   GET  /api/session/:id/report   -> score report
class HttpServer {
 public:
  HttpServer(StudyService& service, HttpConfig config);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds the listening socket; throws std::runtime_error when the port is taken.
  int bind();
  // Serves on the calling thread until stop().
  void listen();
  // Binds if needed and serves on a background thread.
  void start();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  HttpConfig config_;
  int port_ = -1;
  std::thread thread_;
};

}  // namespace exattn::study
