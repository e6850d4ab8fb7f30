#pragma once

// Read-only JSON API over the event log and the live status board.
//
//   GET /health                        overall status and per-camera freshness
//   GET /cameras                       configured cameras with their state
//   GET /cameras/{id}/status           latest observation and counters
//   GET /cameras/{id}/events?from&to   events whose start lies in [from, to]
//   GET /cameras/{id}/daily?date       DailyAggregate for one UTC date
//
// from/to accept "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM:SS[.fff]Z"; a bare `to`
// date covers that whole day. Errors are {"error": {"code", "message"}} with
// status 400, 401 or 404. With a bearer token configured every endpoint
// except /health requires "Authorization: Bearer <token>".

#include <memory>
#include <string>
#include <thread>

#include "bargewatch/eventlog.hpp"
#include "bargewatch/monitor.hpp"

namespace httplib {
class Server;
}

namespace bargewatch {

class ApiServer {
 public:
  ApiServer(const MonitorConfig& config, const EventLog& log, const StatusBoard& board);
  ~ApiServer();

  /// Binds config.server (port 0 picks a free port) and returns the port.
  /// Throws IoError when the address cannot be bound.
  int bind();
  /// Serves on the calling thread until stop().
  void listen();
  /// bind() + listen() on a background thread.
  int start();
  void stop();

 private:
  void routes();

  const MonitorConfig& config_;
  const EventLog& log_;
  const StatusBoard& board_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace bargewatch
