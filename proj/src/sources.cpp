#include "bargewatch/sources.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>

#include "bargewatch/errors.hpp"

namespace bargewatch {

namespace fs = std::filesystem;
namespace chr = std::chrono;

Timestamp system_now() { return chr::floor<chr::milliseconds>(chr::system_clock::now()); }

// ---- directory -----------------------------------------------------------------------

DirectorySource::DirectorySource(fs::path directory, Timestamp start, chr::milliseconds interval)
    : directory_(std::move(directory)), start_(start), interval_(interval) {
  if (interval.count() <= 0) throw ValidationError("poll_interval_seconds: must be positive");
  std::error_code ec;
  if (!fs::is_directory(directory_, ec)) throw IoError("not a directory: " + directory_.string());
  for (const auto& entry : fs::directory_iterator(directory_, ec)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp") files_.push_back(entry.path());
  }
  std::sort(files_.begin(), files_.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
}

std::optional<SampledFrame> DirectorySource::next() {
  if (index_ >= files_.size()) return std::nullopt;
  const std::size_t i = index_++;
  SampledFrame s;
  s.timestamp = start_ + interval_ * static_cast<long long>(i);
  s.frame = load_frame(files_[i]);
  return s;
}

std::string DirectorySource::describe() const {
  return "directory " + directory_.string() + " (" + std::to_string(files_.size()) + " images)";
}

// ---- video ---------------------------------------------------------------------------

struct VideoSource::Capture {
  cv::VideoCapture cap;
};

VideoSource::VideoSource(fs::path path, Timestamp start, chr::milliseconds interval)
    : path_(std::move(path)), capture_(std::make_unique<Capture>()), start_(start), interval_(interval) {
  if (interval.count() <= 0) throw ValidationError("poll_interval_seconds: must be positive");
  if (!capture_->cap.open(path_.string())) throw IoError("cannot open video " + path_.string());
  fps_ = capture_->cap.get(cv::CAP_PROP_FPS);
  const double frames = capture_->cap.get(cv::CAP_PROP_FRAME_COUNT);
  if (!(fps_ > 0) || !(frames > 0)) throw IoError("video " + path_.string() + " reports no fps or frames");
  duration_ = frames / fps_;
}

VideoSource::~VideoSource() = default;

std::optional<SampledFrame> VideoSource::next() {
  if (done_) return std::nullopt;
  const double t = static_cast<double>(k_) * static_cast<double>(interval_.count()) / 1000.0;
  if (t >= duration_) {
    done_ = true;
    return std::nullopt;
  }
  // First frame index whose presentation time i / fps is >= t.
  const auto target = static_cast<long long>(std::ceil(t * fps_ - 1e-9));
  cv::Mat img;
  while (next_index_ <= target) {
    if (!capture_->cap.read(img)) {
      done_ = true;
      return std::nullopt;
    }
    ++next_index_;
  }
  SampledFrame s;
  s.timestamp = start_ + interval_ * static_cast<long long>(k_);
  s.frame = make_frame(path_.stem().string() + "_" + std::to_string(k_), img.clone());
  ++k_;
  return s;
}

std::string VideoSource::describe() const { return "video " + path_.string(); }

// ---- snapshot ------------------------------------------------------------------------

SnapshotSource::SnapshotSource(std::string url, std::string camera_id, RetryPolicy policy,
                               Clock clock, Sleeper sleeper)
    : url_(std::move(url)),
      camera_id_(std::move(camera_id)),
      policy_(policy),
      clock_(clock ? std::move(clock) : Clock(system_now)),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](chr::milliseconds d) { std::this_thread::sleep_for(d); })) {
  if (url_.rfind("http://", 0) != 0) throw ValidationError("snapshot url must start with http://");
  if (policy_.max_retries < 0) throw ValidationError("max_retries: must be >= 0");
}

std::optional<cv::Mat> SnapshotSource::fetch_once() {
  const auto scheme_end = url_.find("://") + 3;
  const auto path_start = url_.find('/', scheme_end);
  const std::string host = url_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url_.substr(path_start);
  httplib::Client client(host);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(10, 0);
  auto res = client.Get(path);
  if (!res) {
    last_error_ = "request failed: " + httplib::to_string(res.error());
    return std::nullopt;
  }
  if (res->status != 200) {
    last_error_ = "HTTP " + std::to_string(res->status);
    return std::nullopt;
  }
  std::vector<unsigned char> bytes(res->body.begin(), res->body.end());
  cv::Mat img = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (img.empty()) {
    last_error_ = "response is not a decodable image";
    return std::nullopt;
  }
  return img;
}

std::optional<SampledFrame> SnapshotSource::next() {
  chr::milliseconds backoff = policy_.initial_backoff;
  for (int attempt = 0; attempt <= policy_.max_retries; ++attempt) {
    if (attempt > 0) {
      ++retries_;
      sleeper_(backoff);
      backoff *= 2;
    }
    if (auto img = fetch_once()) {
      degraded_ = false;
      SampledFrame s;
      s.timestamp = clock_();
      s.frame = make_frame(camera_id_ + "_" + std::to_string(polls_++), std::move(*img));
      return s;
    }
  }
  degraded_ = true;
  ++failed_polls_;
  return std::nullopt;
}

}  // namespace bargewatch
