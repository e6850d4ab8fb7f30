#include "bargewatch/monitor.hpp"

#include <cmath>
#include <iostream>
#include <set>

#include "bargewatch/dataset.hpp"
#include "bargewatch/errors.hpp"

namespace bargewatch {

using nlohmann::json;
namespace fs = std::filesystem;
namespace chr = std::chrono;

std::string to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::directory: return "directory";
    case SourceKind::video: return "video";
    case SourceKind::snapshot: return "snapshot";
  }
  return "?";
}

std::string to_string(CameraState state) {
  switch (state) {
    case CameraState::starting: return "starting";
    case CameraState::running: return "running";
    case CameraState::degraded: return "degraded";
    case CameraState::finished: return "finished";
    case CameraState::failed: return "failed";
    case CameraState::offline: return "offline";
  }
  return "?";
}

// ---- config --------------------------------------------------------------------------

void MonitorConfig::validate() const {
  debounce.validate();
  if (retry.max_retries < 0) throw ValidationError("monitor.max_retries: must be >= 0");
  if (retry.initial_backoff.count() < 0) {
    throw ValidationError("monitor.initial_backoff_seconds: must be >= 0");
  }
  if (server.port < 0 || server.port > 65535) throw ValidationError("server.port: out of range");
  if (server.bind.empty()) throw ValidationError("server.bind: must not be empty");
  std::set<std::string> ids;
  for (const CameraConfig& c : cameras) {
    if (c.id.empty()) throw ValidationError("cameras.id: must not be empty");
    if (c.id.find_first_of("/\\") != std::string::npos || c.id == "." || c.id == "..") {
      throw ValidationError("cameras.id: '" + c.id + "' is not a valid path component");
    }
    if (!ids.insert(c.id).second) throw ValidationError("cameras.id: duplicate '" + c.id + "'");
    if (!(c.poll_interval_seconds > 0) || !std::isfinite(c.poll_interval_seconds)) {
      throw ValidationError("cameras[" + c.id + "].poll_interval_seconds: must be > 0");
    }
    if (c.source.empty()) throw ValidationError("cameras[" + c.id + "].source: must not be empty");
    c.detector.validate();
  }
}

const CameraConfig* MonitorConfig::find_camera(const std::string& id) const {
  for (const CameraConfig& c : cameras) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

SourceKind infer_kind(const std::string& source) {
  if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) return SourceKind::snapshot;
  std::error_code ec;
  if (fs::is_directory(source, ec) || source.ends_with('/')) return SourceKind::directory;
  return SourceKind::video;
}

void parse_monitor_section(const json& m, MonitorConfig& c) {
  if (!m.is_object()) throw ValidationError("monitor: must be an object");
  for (const auto& [key, value] : m.items()) {
    if (key == "min_consecutive") {
      c.debounce.min_consecutive = value.get<int>();
    } else if (key == "gap_tolerance") {
      c.debounce.gap_tolerance = value.get<int>();
    } else if (key == "max_retries") {
      c.retry.max_retries = value.get<int>();
    } else if (key == "initial_backoff_seconds") {
      c.retry.initial_backoff = chr::milliseconds(std::llround(value.get<double>() * 1000.0));
    } else if (key == "replay_start") {
      try {
        c.replay_start = parse_timestamp(value.get<std::string>());
      } catch (const ParseError& e) {
        throw ValidationError(std::string("monitor.replay_start: ") + e.what());
      }
    } else if (key == "fsync") {
      c.fsync = value.get<bool>();
    } else {
      throw ValidationError("monitor: unknown field '" + key + "'");
    }
  }
}

void parse_server_section(const json& s, ServerConfig& c) {
  if (!s.is_object()) throw ValidationError("server: must be an object");
  for (const auto& [key, value] : s.items()) {
    if (key == "bind") {
      c.bind = value.get<std::string>();
    } else if (key == "port") {
      c.port = value.get<int>();
    } else if (key == "bearer_token") {
      c.bearer_token = value.get<std::string>();
    } else {
      throw ValidationError("server: unknown field '" + key + "'");
    }
  }
}

CameraConfig parse_camera(const json& j, const json& detector_defaults, const fs::path& base) {
  if (!j.is_object()) throw ValidationError("cameras: entries must be objects");
  CameraConfig c;
  std::optional<SourceKind> kind;
  json detector = detector_defaults;
  for (const auto& [key, value] : j.items()) {
    if (key == "id") {
      c.id = value.get<std::string>();
    } else if (key == "source") {
      c.source = value.get<std::string>();
    } else if (key == "type") {
      const std::string t = value.get<std::string>();
      if (t == "directory") kind = SourceKind::directory;
      else if (t == "video") kind = SourceKind::video;
      else if (t == "snapshot") kind = SourceKind::snapshot;
      else throw ValidationError("cameras.type: unknown source type '" + t + "'");
    } else if (key == "poll_interval_seconds") {
      c.poll_interval_seconds = value.get<double>();
    } else if (key == "enabled") {
      c.enabled = value.get<bool>();
    } else if (key == "detector") {
      if (!value.is_object()) throw ValidationError("cameras.detector: must be an object");
      detector.merge_patch(value);
    } else {
      throw ValidationError("cameras: unknown field '" + key + "'");
    }
  }
  if (!kind || *kind != SourceKind::snapshot) {
    if (c.source.rfind("http://", 0) != 0) c.source = resolve(c.source, base).string();
  }
  c.kind = kind ? *kind : infer_kind(c.source);
  try {
    c.detector = detector_config_from_json(detector);
  } catch (const ValidationError& e) {
    throw ValidationError("cameras[" + c.id + "]." + e.what());
  }
  c.detector.model_path = resolve(c.detector.model_path, base);
  c.detector.fixture_path = resolve(c.detector.fixture_path, base);
  return c;
}

}  // namespace

MonitorConfig monitor_config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ValidationError("monitor config must be an object");
  MonitorConfig c;
  try {
    json detector = json::object();
    if (j.contains("detector")) {
      detector = j.at("detector");
      if (!detector.is_object()) throw ValidationError("detector: must be an object");
    }
    for (const auto& [key, value] : j.items()) {
      if (key == "cameras") {
        if (!value.is_array()) throw ValidationError("cameras: must be an array");
        for (const json& cam : value) c.cameras.push_back(parse_camera(cam, detector, base_dir));
      } else if (key == "detector") {
        continue;
      } else if (key == "monitor") {
        parse_monitor_section(value, c);
      } else if (key == "server") {
        parse_server_section(value, c.server);
      } else if (key == "log_dir") {
        c.log_dir = resolve(value.get<std::string>(), base_dir);
      } else {
        throw ValidationError("monitor config: unknown field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("monitor config: ") + e.what());
  }
  if (!j.contains("log_dir")) c.log_dir = resolve(c.log_dir, base_dir);
  c.validate();
  return c;
}

MonitorConfig load_monitor_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return monitor_config_from_json(j, path.parent_path());
}

void apply_bind(ServerConfig& server, const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) {
    server.bind = bind;
    return;
  }
  const std::string port = bind.substr(colon + 1);
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::out_of_range(port);
    server.port = p;
  } catch (const std::exception&) {
    throw ValidationError("bind: bad port in '" + bind + "'");
  }
  server.bind = bind.substr(0, colon);
  if (server.bind.empty()) throw ValidationError("bind: missing host in '" + bind + "'");
}

void apply_env_overrides(MonitorConfig& config,
                         const std::function<const char*(const char*)>& getenv) {
  if (const char* bind = getenv("BARGEWATCH_BIND"); bind && *bind) apply_bind(config.server, bind);
  if (const char* dir = getenv("BARGEWATCH_LOG_DIR"); dir && *dir) config.log_dir = dir;
}

std::unique_ptr<FrameSource> make_source(const CameraConfig& camera, const MonitorConfig& config,
                                         SnapshotSource::Sleeper sleeper) {
  const auto interval = chr::milliseconds(std::llround(camera.poll_interval_seconds * 1000.0));
  const Timestamp start = config.replay_start ? *config.replay_start : system_now();
  switch (camera.kind) {
    case SourceKind::directory:
      return std::make_unique<DirectorySource>(camera.source, start, interval);
    case SourceKind::video:
      return std::make_unique<VideoSource>(camera.source, start, interval);
    case SourceKind::snapshot:
      return std::make_unique<SnapshotSource>(camera.source, camera.id, config.retry, SnapshotSource::Clock{},
                                              std::move(sleeper));
  }
  throw ValidationError("unknown source kind");
}

// ---- status --------------------------------------------------------------------------

json status_to_json(const CameraStatus& s, Timestamp now) {
  json j = {{"id", s.id},
            {"source", s.source},
            {"state", to_string(s.state)},
            {"frames_processed", s.frames_processed},
            {"frame_errors", s.frame_errors},
            {"events_written", s.events_written},
            {"log_failures", s.log_failures},
            {"last_error", s.last_error}};
  if (s.last_observation) {
    const FrameObservation& o = *s.last_observation;
    j["last_observation"] = {{"timestamp", format_timestamp(o.timestamp)},
                             {"scene", std::string(1, to_char(o.scene))},
                             {"detections", o.detections.size()},
                             {"peak_confidence", o.peak_confidence()},
                             {"frame", o.frame_ref}};
  } else {
    j["last_observation"] = nullptr;
  }
  if (s.last_frame_wall) {
    j["seconds_since_last_frame"] =
        chr::duration<double>(now - *s.last_frame_wall).count();
  } else {
    j["seconds_since_last_frame"] = nullptr;
  }
  return j;
}

void StatusBoard::publish(CameraStatus status) {
  auto snapshot = std::make_shared<const CameraStatus>(std::move(status));
  std::lock_guard lock(mutex_);
  statuses_[snapshot->id] = std::move(snapshot);
}

std::shared_ptr<const CameraStatus> StatusBoard::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = statuses_.find(id);
  return it == statuses_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<const CameraStatus>> StatusBoard::all() const {
  std::lock_guard lock(mutex_);
  std::vector<std::shared_ptr<const CameraStatus>> out;
  for (const auto& [id, s] : statuses_) out.push_back(s);
  return out;
}

void log_to_stderr(const std::string& line) {
  static std::mutex m;
  std::lock_guard lock(m);
  std::cerr << line << '\n';
}

void StopSignal::request() {
  {
    std::lock_guard lock(mutex_);
    flag_ = true;
  }
  cv_.notify_all();
}

bool StopSignal::sleep_for(chr::milliseconds d) {
  std::unique_lock lock(mutex_);
  return !cv_.wait_for(lock, d, [this] { return flag_.load(); });
}

// ---- pipeline ------------------------------------------------------------------------

CameraPipeline::CameraPipeline(CameraConfig camera, std::unique_ptr<FrameSource> source,
                               std::unique_ptr<DetectorBackend> backend, DebounceConfig debounce,
                               EventLog& log, StatusBoard& board, Logger logger)
    : camera_(std::move(camera)),
      source_(std::move(source)),
      backend_(std::move(backend)),
      debouncer_(debounce),
      log_(log),
      board_(board),
      logger_(std::move(logger)) {
  status_.id = camera_.id;
  status_.source = source_->describe();
  publish();
}

void CameraPipeline::publish() {
  status_.log_failures = log_.failures();
  board_.publish(status_);
}

void CameraPipeline::write(const std::vector<PassageEvent>& events) {
  for (const PassageEvent& e : events) {
    if (log_.append(e)) {
      ++status_.events_written;
    } else {
      logger_("[" + camera_.id + "] event log write failed; " + std::to_string(log_.pending()) +
              " event(s) buffered for retry");
    }
  }
}

void CameraPipeline::process(const SampledFrame& sample) {
  std::vector<Detection> detections;
  try {
    detections = backend_->detect(sample.frame);
  } catch (const std::exception& e) {
    ++status_.frame_errors;
    status_.last_error = e.what();
    logger_("[" + camera_.id + "] frame " + sample.frame.id + " skipped: " + e.what());
    return;
  }
  FrameObservation o = observe(camera_.id, sample.timestamp, std::move(detections), sample.frame.id);
  status_.last_observation = o;
  status_.last_frame_wall = system_now();
  ++status_.frames_processed;
  try {
    write(debouncer_.push(std::move(o)));
  } catch (const std::invalid_argument& e) {
    // Clock went backwards on a live source; drop the frame rather than the run.
    ++status_.frame_errors;
    status_.last_error = e.what();
    logger_("[" + camera_.id + "] frame " + sample.frame.id + " dropped: " + e.what());
  }
}

bool CameraPipeline::step() {
  if (finished_) return false;
  std::optional<SampledFrame> sample;
  try {
    sample = source_->next();
  } catch (const std::exception& e) {
    ++status_.frame_errors;
    status_.last_error = e.what();
    logger_("[" + camera_.id + "] sample failed: " + std::string(e.what()));
    if (source_->finished()) {
      finish();
      return false;
    }
    publish();
    return true;
  }
  if (sample) {
    status_.state = CameraState::running;
    process(*sample);
  } else if (source_->finished()) {
    finish();
    return false;
  } else if (source_->degraded()) {
    status_.state = CameraState::degraded;
    if (auto* snap = dynamic_cast<SnapshotSource*>(source_.get())) status_.last_error = snap->last_error();
    logger_("[" + camera_.id + "] source degraded: " + status_.last_error);
  }
  publish();
  return true;
}

void CameraPipeline::finish() {
  if (finished_) return;
  finished_ = true;
  write(debouncer_.flush());
  log_.retry_pending();
  status_.state = CameraState::finished;
  publish();
}

void CameraPipeline::run(StopSignal& stop) {
  const bool live = camera_.kind == SourceKind::snapshot;
  const auto interval = chr::milliseconds(std::llround(camera_.poll_interval_seconds * 1000.0));
  while (!stop.requested()) {
    if (!step()) return;
    if (live && !stop.sleep_for(interval)) break;
  }
  finish();
}

// ---- monitor -------------------------------------------------------------------------

Monitor::Monitor(MonitorConfig config, Logger logger)
    : config_(std::move(config)), logger_(std::move(logger)), log_(config_.log_dir, config_.fsync) {
  config_.validate();
  if (!config_.replay_start) config_.replay_start = system_now();
  for (const CameraConfig& cam : config_.cameras) {
    if (!cam.enabled) {
      CameraStatus s;
      s.id = cam.id;
      s.source = cam.source;
      s.state = CameraState::offline;
      board_.publish(std::move(s));
      continue;
    }
    auto source = make_source(cam, config_, [this](chr::milliseconds d) { stop_.sleep_for(d); });
    auto backend = make_backend(cam.detector);
    pipelines_.push_back(std::make_unique<CameraPipeline>(cam, std::move(source), std::move(backend),
                                                          config_.debounce, log_, board_, logger_));
  }
}

Monitor::~Monitor() {
  stop();
  wait();
}

void Monitor::start() {
  if (!threads_.empty()) return;
  for (auto& p : pipelines_) {
    CameraPipeline* pipeline = p.get();
    threads_.emplace_back([this, pipeline] {
      try {
        pipeline->run(stop_);
      } catch (const std::exception& e) {
        logger_(std::string("pipeline stopped: ") + e.what());
      }
    });
  }
}

void Monitor::wait() {
  for (std::thread& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
}

void Monitor::stop() { stop_.request(); }

}  // namespace bargewatch
