#pragma once

// Running-average background model, foreground masks and
// background-suppressed ("normalized") frames.

#include <cstddef>

#include <opencv2/core.hpp>

namespace bargewatch {

struct BackgroundConfig {
  double alpha = 0.02;  // learning rate in (0, 1]
  double tau = 25.0;    // foreground threshold on the 8-bit scale, > 0

  void validate() const;  // throws ValidationError
};

class BackgroundModel {
 public:
  explicit BackgroundModel(BackgroundConfig config = {});

  /// mean = (1 - alpha) mean + alpha frame; the first frame initializes the
  /// mean. Frames are 8-bit or floating point, 1 or 3 channels. Throws
  /// std::invalid_argument when size or channels differ from the model.
  void update(const cv::Mat& frame);

  /// Starts from an explicit mean instead of the first frame.
  void reset(const cv::Mat& mean);

  /// 255 where the largest per-channel |frame - mean| exceeds tau, else 0
  /// (CV_8UC1).
  cv::Mat foreground_mask(const cv::Mat& frame) const;
  cv::Mat foreground_mask(const cv::Mat& frame, double tau) const;

  /// |frame - mean| per channel, stretched so the largest difference maps to
  /// 255 (CV_8U, same channels). An all-zero difference gives a zero image.
  cv::Mat normalize(const cv::Mat& frame) const;

  bool initialized() const { return frames_seen_ > 0 || !mean_.empty(); }
  std::size_t frames_seen() const { return frames_seen_; }
  const cv::Mat& mean() const { return mean_; }  // CV_64F
  const BackgroundConfig& config() const { return config_; }

 private:
  cv::Mat as_double(const cv::Mat& frame) const;
  cv::Mat abs_diff(const cv::Mat& frame) const;

  BackgroundConfig config_;
  cv::Mat mean_;
  std::size_t frames_seen_ = 0;
};

}  // namespace bargewatch
