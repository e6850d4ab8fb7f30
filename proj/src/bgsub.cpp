#include "bargewatch/bgsub.hpp"

#include <stdexcept>

#include "bargewatch/errors.hpp"

namespace bargewatch {

void BackgroundConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("alpha: must be in (0, 1]");
  if (!(tau > 0.0)) throw ValidationError("tau: must be positive");
}

BackgroundModel::BackgroundModel(BackgroundConfig config) : config_(config) { config_.validate(); }

cv::Mat BackgroundModel::as_double(const cv::Mat& frame) const {
  if (frame.empty()) throw std::invalid_argument("empty frame");
  if (frame.channels() != 1 && frame.channels() != 3) {
    throw std::invalid_argument("frames must have 1 or 3 channels");
  }
  if (!mean_.empty() && (frame.size() != mean_.size() || frame.channels() != mean_.channels())) {
    throw std::invalid_argument("frame dimensions do not match the background model");
  }
  cv::Mat d;
  frame.convertTo(d, CV_MAKETYPE(CV_64F, frame.channels()));
  return d;
}

void BackgroundModel::update(const cv::Mat& frame) {
  cv::Mat d = as_double(frame);
  if (mean_.empty()) {
    mean_ = d;
  } else {
    cv::addWeighted(mean_, 1.0 - config_.alpha, d, config_.alpha, 0.0, mean_);
  }
  ++frames_seen_;
}

void BackgroundModel::reset(const cv::Mat& mean) {
  mean_.release();
  mean_ = as_double(mean);
  frames_seen_ = 0;
}

cv::Mat BackgroundModel::abs_diff(const cv::Mat& frame) const {
  if (mean_.empty()) throw std::logic_error("background model has not seen a frame");
  cv::Mat d = as_double(frame);
  cv::Mat diff;
  cv::absdiff(d, mean_, diff);
  return diff;
}

cv::Mat BackgroundModel::foreground_mask(const cv::Mat& frame) const {
  return foreground_mask(frame, config_.tau);
}

cv::Mat BackgroundModel::foreground_mask(const cv::Mat& frame, double tau) const {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  cv::Mat diff = abs_diff(frame);
  cv::Mat max_channel = diff.reshape(1, static_cast<int>(diff.total()));
  cv::reduce(max_channel, max_channel, 1, cv::REDUCE_MAX);
  max_channel = max_channel.reshape(1, diff.rows);
  cv::Mat mask = max_channel > tau;
  return mask;
}

cv::Mat BackgroundModel::normalize(const cv::Mat& frame) const {
  cv::Mat diff = abs_diff(frame);
  double max_value = 0.0;
  cv::minMaxLoc(diff.reshape(1), nullptr, &max_value);
  cv::Mat out;
  if (max_value <= 0.0) {
    out = cv::Mat::zeros(diff.size(), CV_MAKETYPE(CV_8U, diff.channels()));
  } else {
    diff.convertTo(out, CV_MAKETYPE(CV_8U, diff.channels()), 255.0 / max_value);
  }
  return out;
}

}  // namespace bargewatch
