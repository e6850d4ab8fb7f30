#pragma once

// Frame sources for the monitor: image-directory replay, video files and
// polled HTTP snapshot URLs.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bargewatch/detector.hpp"
#include "bargewatch/events.hpp"

namespace bargewatch {

struct SampledFrame {
  Timestamp timestamp;
  Frame frame;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Next frame; nullopt when the source is exhausted (replay, video) or the
  /// current poll failed after all retries (snapshot, see degraded()).
  virtual std::optional<SampledFrame> next() = 0;
  /// True once a finite source has delivered everything.
  virtual bool finished() const = 0;
  virtual bool degraded() const { return false; }
  virtual std::string describe() const = 0;
};

/// Image files (jpg, jpeg, png, bmp) in lexicographic order. Timestamps are
/// start + i * interval; frame ids are file stems.
class DirectorySource final : public FrameSource {
 public:
  DirectorySource(std::filesystem::path directory, Timestamp start,
                  std::chrono::milliseconds interval);

  std::optional<SampledFrame> next() override;
  bool finished() const override { return index_ >= files_.size(); }
  std::string describe() const override;
  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  std::filesystem::path directory_;
  std::vector<std::filesystem::path> files_;
  Timestamp start_;
  std::chrono::milliseconds interval_;
  std::size_t index_ = 0;
};

/// Samples a video at t = k * interval for every t strictly before the clip
/// duration (frame_count / fps); each sample is the first frame whose
/// presentation time is >= t. A 60 s clip at a 5 s interval gives 12 frames.
/// Timestamps are start + t; frame ids are "<stem>_<k>".
class VideoSource final : public FrameSource {
 public:
  VideoSource(std::filesystem::path path, Timestamp start, std::chrono::milliseconds interval);
  ~VideoSource() override;

  std::optional<SampledFrame> next() override;
  bool finished() const override { return done_; }
  std::string describe() const override;

  double fps() const { return fps_; }
  double duration_seconds() const { return duration_; }

 private:
  struct Capture;
  std::filesystem::path path_;
  std::unique_ptr<Capture> capture_;
  Timestamp start_;
  std::chrono::milliseconds interval_;
  double fps_ = 0;
  double duration_ = 0;
  long long next_index_ = 0;  // next frame index to be decoded
  std::size_t k_ = 0;
  bool done_ = false;
};

struct RetryPolicy {
  int max_retries = 3;                                // attempts after the first
  std::chrono::milliseconds initial_backoff{1000};    // doubled each retry
};

/// GETs an image from an http:// URL once per next() call.
class SnapshotSource final : public FrameSource {
 public:
  using Clock = std::function<Timestamp()>;
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  SnapshotSource(std::string url, std::string camera_id, RetryPolicy policy = {},
                 Clock clock = {}, Sleeper sleeper = {});

  std::optional<SampledFrame> next() override;
  bool finished() const override { return false; }
  bool degraded() const override { return degraded_; }
  std::string describe() const override { return "snapshot " + url_; }

  std::size_t retries() const { return retries_; }
  std::size_t failed_polls() const { return failed_polls_; }
  const std::string& last_error() const { return last_error_; }

 private:
  std::optional<cv::Mat> fetch_once();

  std::string url_;
  std::string camera_id_;
  RetryPolicy policy_;
  Clock clock_;
  Sleeper sleeper_;
  bool degraded_ = false;
  std::size_t retries_ = 0;
  std::size_t failed_polls_ = 0;
  std::size_t polls_ = 0;
  std::string last_error_;
};

Timestamp system_now();

}  // namespace bargewatch
