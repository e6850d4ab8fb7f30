#include "bargewatch/server.hpp"

#include <httplib.h>

#include "bargewatch/errors.hpp"

namespace bargewatch {

using nlohmann::json;
namespace chr = std::chrono;

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, {{"error", {{"code", code}, {"message", message}}}}, status);
}

struct BadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Timestamp query_time(const httplib::Request& req, const std::string& name, bool end_of_day) {
  const std::string text = req.get_param_value(name);
  try {
    Timestamp t = parse_timestamp(text);
    if (end_of_day && text.size() == 10) t += chr::days(1) - chr::milliseconds(1);
    return t;
  } catch (const ParseError& e) {
    throw BadRequest(name + ": " + e.what());
  }
}

}  // namespace

ApiServer::ApiServer(const MonitorConfig& config, const EventLog& log, const StatusBoard& board)
    : config_(config), log_(log), board_(board), server_(std::make_unique<httplib::Server>()) {
  routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::routes() {
  httplib::Server& s = *server_;

  // httplib's default also sets SO_REUSEPORT, which lets a second server
  // share a busy port instead of failing.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });

  s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    const std::string& token = config_.server.bearer_token;
    if (token.empty() || req.path == "/health") return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") == "Bearer " + token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    res.set_header("WWW-Authenticate", "Bearer");
    send_error(res, 401, "unauthorized", "missing or invalid bearer token");
    return httplib::Server::HandlerResponse::Handled;
  });

  s.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    const Timestamp now = system_now();
    json cams = json::array();
    bool degraded = false;
    for (const CameraConfig& c : config_.cameras) {
      auto st = board_.get(c.id);
      json entry = {{"id", c.id}};
      if (st) {
        entry["state"] = to_string(st->state);
        entry["seconds_since_last_frame"] =
            st->last_frame_wall ? json(chr::duration<double>(now - *st->last_frame_wall).count()) : json();
        degraded = degraded || st->state == CameraState::degraded || st->state == CameraState::failed;
      } else {
        entry["state"] = to_string(CameraState::offline);
        entry["seconds_since_last_frame"] = nullptr;
      }
      cams.push_back(entry);
    }
    send_json(res, {{"status", degraded ? "degraded" : "ok"},
                    {"time", format_timestamp(now)},
                    {"cameras", cams}});
  });

  s.Get("/cameras", [this](const httplib::Request&, httplib::Response& res) {
    json cams = json::array();
    for (const CameraConfig& c : config_.cameras) {
      auto st = board_.get(c.id);
      cams.push_back({{"id", c.id},
                      {"type", to_string(c.kind)},
                      {"enabled", c.enabled},
                      {"poll_interval_seconds", c.poll_interval_seconds},
                      {"state", to_string(st ? st->state : CameraState::offline)}});
    }
    send_json(res, {{"cameras", cams}});
  });

  s.Get(R"(/cameras/([^/]+)/(status|events|daily))",
        [this](const httplib::Request& req, httplib::Response& res) {
          const std::string id = req.matches[1];
          const std::string what = req.matches[2];
          if (!config_.find_camera(id)) {
            send_error(res, 404, "unknown_camera", "no camera with id '" + id + "'");
            return;
          }
          try {
            if (what == "status") {
              auto st = board_.get(id);
              CameraStatus offline;
              offline.id = id;
              offline.state = CameraState::offline;
              send_json(res, status_to_json(st ? *st : offline, system_now()));
            } else if (what == "events") {
              std::vector<PassageEvent> events;
              std::optional<Timestamp> from, to;
              if (req.has_param("from")) from = query_time(req, "from", false);
              if (req.has_param("to")) to = query_time(req, "to", true);
              if (from && to && *to < *from) throw BadRequest("from must not be after to");
              LogReadStats stats;
              if (from && to) {
                events = log_.read(id, date_of(*from), date_of(*to), &stats);
              } else {
                events = log_.read_all(id, &stats);
              }
              json list = json::array();
              for (const PassageEvent& e : events) {
                if (from && e.start < *from) continue;
                if (to && e.start > *to) continue;
                list.push_back(event_to_json(e));
              }
              send_json(res, {{"camera_id", id}, {"count", list.size()}, {"events", list}});
            } else {
              if (!req.has_param("date")) throw BadRequest("date: required");
              Date day;
              try {
                day = parse_date(req.get_param_value("date"));
              } catch (const ParseError& e) {
                throw BadRequest(std::string("date: ") + e.what());
              }
              // Events are filed by start day; one that began the day before
              // can still run into this date.
              const auto events = log_.read(id, day - chr::days(1), day);
              send_json(res, aggregate_to_json(aggregate_daily(events, day, id)));
            }
          } catch (const BadRequest& e) {
            send_error(res, 400, "bad_request", e.what());
          }
        });

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send_error(res, 404, "not_found", "no route for " + req.path);
    } else if (res.status >= 400) {
      send_error(res, res.status, "error", httplib::status_message(res.status));
    }
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    send_error(res, 500, "internal", message);
  });
}

int ApiServer::bind() {
  const ServerConfig& sc = config_.server;
  int port = sc.port;
  if (port == 0) {
    port = server_->bind_to_any_port(sc.bind);
    if (port < 0) throw IoError("cannot bind " + sc.bind);
  } else if (!server_->bind_to_port(sc.bind, port)) {
    throw IoError("cannot bind " + sc.bind + ":" + std::to_string(port) + " (in use?)");
  }
  return port;
}

void ApiServer::listen() { server_->listen_after_bind(); }

int ApiServer::start() {
  const int port = bind();
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return port;
}

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace bargewatch
