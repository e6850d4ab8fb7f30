#pragma once

// Live monitoring: per-camera pipelines (sample -> detect -> classify ->
// debounce -> append) and the read model the HTTP layer serves.
//
// Config file (JSON):
//   {
//     "cameras": [{"id": "cam1", "source": "frames/", "type": "directory",
//                  "poll_interval_seconds": 5, "enabled": true,
//                  "detector": {...optional per-camera overrides...}}],
//     "detector": {...DetectorConfig...},
//     "monitor": {"min_consecutive": 2, "gap_tolerance": 1, "max_retries": 3,
//                 "initial_backoff_seconds": 1, "replay_start": "2024-06-01T08:00:00Z",
//                 "fsync": false},
//     "server": {"bind": "127.0.0.1", "port": 8080, "bearer_token": ""},
//     "log_dir": "events"
//   }
// "type" is directory, video or snapshot; when omitted it is snapshot for
// http:// sources, directory for directories and video otherwise. Relative
// paths resolve against the config file's directory. BARGEWATCH_BIND
// ("host" or "host:port") and BARGEWATCH_LOG_DIR override the file.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bargewatch/detector.hpp"
#include "bargewatch/eventlog.hpp"
#include "bargewatch/events.hpp"
#include "bargewatch/sources.hpp"

namespace bargewatch {

enum class SourceKind { directory, video, snapshot };

std::string to_string(SourceKind kind);

struct CameraConfig {
  std::string id;
  SourceKind kind = SourceKind::directory;
  std::string source;  // directory, video path or http:// URL
  double poll_interval_seconds = 5.0;
  bool enabled = true;
  DetectorConfig detector;  // global settings merged with per-camera overrides
};

struct ServerConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string bearer_token;  // empty: no authentication
};

struct MonitorConfig {
  std::vector<CameraConfig> cameras;
  DebounceConfig debounce;
  RetryPolicy retry;
  std::optional<Timestamp> replay_start;  // unset: wall clock at startup
  bool fsync = false;
  ServerConfig server;
  std::filesystem::path log_dir = "events";

  /// Throws ValidationError naming the offending field.
  void validate() const;
  const CameraConfig* find_camera(const std::string& id) const;
};

/// Throws ValidationError on unknown, mistyped or out-of-range fields.
MonitorConfig monitor_config_from_json(const nlohmann::json& j,
                                       const std::filesystem::path& base_dir = {});
MonitorConfig load_monitor_config(const std::filesystem::path& path);

/// Applies BARGEWATCH_BIND and BARGEWATCH_LOG_DIR through `getenv`.
void apply_env_overrides(MonitorConfig& config,
                         const std::function<const char*(const char*)>& getenv);

/// "host" or "host:port".
void apply_bind(ServerConfig& server, const std::string& bind);

std::unique_ptr<FrameSource> make_source(const CameraConfig& camera, const MonitorConfig& config,
                                         SnapshotSource::Sleeper sleeper = {});

enum class CameraState { starting, running, degraded, finished, failed, offline };

std::string to_string(CameraState state);

struct CameraStatus {
  std::string id;
  std::string source;
  CameraState state = CameraState::starting;
  std::size_t frames_processed = 0;
  std::size_t frame_errors = 0;
  std::size_t events_written = 0;
  std::size_t log_failures = 0;
  std::optional<FrameObservation> last_observation;
  std::optional<Timestamp> last_frame_wall;  // wall-clock time of the last processed frame
  std::string last_error;
};

nlohmann::json status_to_json(const CameraStatus& status, Timestamp now);

/// Latest status per camera. Writers publish whole snapshots; readers get an
/// immutable copy.
class StatusBoard {
 public:
  void publish(CameraStatus status);
  std::shared_ptr<const CameraStatus> get(const std::string& id) const;
  std::vector<std::shared_ptr<const CameraStatus>> all() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const CameraStatus>> statuses_;
};

using Logger = std::function<void(const std::string&)>;

void log_to_stderr(const std::string& line);

/// Cooperative stop flag with interruptible sleeps.
class StopSignal {
 public:
  void request();
  bool requested() const { return flag_.load(); }
  /// Sleeps up to `d`; returns false when woken by a stop request.
  bool sleep_for(std::chrono::milliseconds d);

 private:
  std::atomic<bool> flag_{false};
  std::mutex mutex_;
  std::condition_variable cv_;
};

class CameraPipeline {
 public:
  CameraPipeline(CameraConfig camera, std::unique_ptr<FrameSource> source,
                 std::unique_ptr<DetectorBackend> backend, DebounceConfig debounce, EventLog& log,
                 StatusBoard& board, Logger logger = log_to_stderr);

  /// Samples and processes one frame. False once the source is exhausted (the
  /// open run has been flushed by then).
  bool step();
  /// Steps until the source is exhausted or a stop is requested. Live
  /// sources wait poll_interval between samples; replay runs unpaced.
  void run(StopSignal& stop);
  /// Flushes the debouncer and writes any closing event.
  void finish();

  const CameraStatus& status() const { return status_; }

 private:
  void process(const SampledFrame& sample);
  void write(const std::vector<PassageEvent>& events);
  void publish();

  CameraConfig camera_;
  std::unique_ptr<FrameSource> source_;
  std::unique_ptr<DetectorBackend> backend_;
  Debouncer debouncer_;
  EventLog& log_;
  StatusBoard& board_;
  Logger logger_;
  CameraStatus status_;
  bool finished_ = false;
};

/// Owns the pipelines of every enabled camera, one thread each.
class Monitor {
 public:
  explicit Monitor(MonitorConfig config, Logger logger = log_to_stderr);
  ~Monitor();

  void start();
  /// Blocks until every pipeline has stopped (finite sources end on their own).
  void wait();
  void stop();

  const MonitorConfig& config() const { return config_; }
  EventLog& log() { return log_; }
  StatusBoard& board() { return board_; }

 private:
  MonitorConfig config_;
  Logger logger_;
  EventLog log_;
  StatusBoard board_;
  StopSignal stop_;
  std::vector<std::unique_ptr<CameraPipeline>> pipelines_;
  std::vector<std::thread> threads_;
};

}  // namespace bargewatch
