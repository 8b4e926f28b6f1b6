#include "exattn/study/http_server.hpp"

#include <sys/socket.h>

#include <stdexcept>

#include "exattn/analysis/highlights.hpp"
#include "exattn/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace exattn::study {

using nlohmann::json;

namespace {

json highlights_json(const analysis::HighlightSpec& h) {
  json regions = json::array();
  for (const auto& r : h.regions) regions.push_back({{"rank", r.rank}, {"rect", r.rect}});
  return {{"id", h.id}, {"k", h.k}, {"regions", regions}};
}

json next_json(const std::string& session_id, const NextTrial& next) {
  json j{{"session_id", session_id},
         {"phase", std::string(to_string(next.phase))},
         {"position", next.position},
         {"total", next.total},
         {"done", !next.trial.has_value()}};
  if (next.trial) {
    j["trial_id"] = next.trial->id;
    j["query"] = next.trial->query;
    j["gallery"] = next.trial->gallery;
    if (next.phase == Phase::followup && next.trial->highlights) j["highlights"] = highlights_json(*next.trial->highlights);
  }
  return j;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json report_json(const SessionReport& r) {
  json levels = json::object();
  for (Difficulty d : {Difficulty::easy, Difficulty::medium, Difficulty::hard}) {
    const auto& l = r.score.level(d);
    levels[std::string(to_string(d))] = {
        {"total", l.total}, {"answered", l.answered}, {"correct", l.correct}, {"points", l.points}};
  }
  return {{"session_id", r.session_id},
          {"phase", std::string(to_string(r.phase))},
          {"points", r.score.points},
          {"full_mark", r.score.full_mark},
          {"complete", r.score.complete},
          {"levels", levels},
          {"cp", optional_number(r.score.cp)},
          {"wcp", optional_number(r.score.wcp)},
          {"followup", {{"total", r.followup_total}, {"answered", r.followup_answered}, {"complete", r.followup_complete}}}};
}

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Maps service exceptions onto HTTP statuses.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const json::exception& e) {
    send(res, 400, {{"error", std::string("malformed request: ") + e.what()}});
  } catch (const NotFoundError& e) {
    send(res, 404, {{"error", e.what()}});
  } catch (const ConflictError& e) {
    send(res, 409, {{"error", e.what()}});
  } catch (const IncompleteError& e) {
    send(res, 409, {{"error", e.what()}, {"missing", e.missing()}});
  } catch (const std::invalid_argument& e) {
    send(res, 400, {{"error", e.what()}});
  } catch (const std::exception& e) {
    send(res, 500, {{"error", e.what()}});
  }
}

}  // namespace

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(StudyService& service, HttpConfig config) : impl_(std::make_unique<Impl>()), config_(std::move(config)) {
  auto& srv = impl_->server;
  // Plain SO_REUSEADDR so a port held by another process is reported as busy.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  srv.Post("/api/session", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = req.body.empty() ? json::object() : json::parse(req.body);
      if (!body.is_object()) throw std::invalid_argument("request body must be a JSON object");
      const Phase phase = phase_from_string(body.value("phase", std::string("setup")));
      std::optional<std::uint64_t> seed;
      if (body.contains("seed") && !body.at("seed").is_null()) seed = body.at("seed").get<std::uint64_t>();
      std::optional<std::string> id;
      if (body.contains("session_id") && !body.at("session_id").is_null()) id = body.at("session_id").get<std::string>();
      const auto info = service.open_session(phase, seed, id);
      send(res, 200, {{"session_id", info.session_id},
                      {"phase", std::string(to_string(info.phase))},
                      {"seed", info.seed},
                      {"trials", info.trials}});
    });
  });

  srv.Get("/api/session/:id/next", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto& id = req.path_params.at("id");
      send(res, 200, next_json(id, service.next_trial(id)));
    });
  });

  srv.Post("/api/session/:id/response", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto& id = req.path_params.at("id");
      const json body = json::parse(req.body);
      const auto trial = body.at("trial_id").get<std::string>();
      const auto& c = body.at("choice");
      if (!c.is_number_integer() || c.get<long long>() < 0) throw std::invalid_argument("choice must be a non-negative integer");
      const bool correct = service.submit(id, trial, c.get<std::size_t>());
      send(res, 200, {{"correct", correct}});
    });
  });

  srv.Get("/api/session/:id/report", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, report_json(service.report(req.path_params.at("id")))); });
  });

  srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) { send(res, 200, {{"status", "ok"}}); });

  if (!config_.static_dir.empty()) {
    if (!std::filesystem::is_directory(config_.static_dir))
      throw std::runtime_error("static directory " + config_.static_dir.string() + " is not readable");
    srv.set_mount_point("/", config_.static_dir.string());
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (port_ >= 0) return port_;
  auto& srv = impl_->server;
  if (config_.port == 0) {
    port_ = srv.bind_to_any_port(config_.host);
    if (port_ < 0) throw std::runtime_error("cannot bind " + config_.host);
  } else {
    if (!srv.bind_to_port(config_.host, config_.port))
      throw std::runtime_error("cannot bind " + config_.host + ":" + std::to_string(config_.port) + " (port busy?)");
    port_ = config_.port;
  }
  return port_;
}

void HttpServer::listen() {
  bind();
  impl_->server.listen_after_bind();
}

void HttpServer::start() {
  bind();
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace exattn::study
