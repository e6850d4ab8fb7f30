#include "bargewatch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bargewatch {
namespace {

// Slack for values that went through float text round-trips (label files).
constexpr double kFrameSlack = 1e-9;

[[noreturn]] void invalid_box(double x_min, double y_min, double x_max, double y_max,
                              const char* why) {
  std::ostringstream os;
  os << "invalid box (" << x_min << ", " << y_min << ", " << x_max << ", " << y_max
     << "): " << why;
  throw std::invalid_argument(os.str());
}

}  // namespace

CoordSpace CoordSpace::pixel(double width, double height) {
  if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) || !std::isfinite(height)) {
    throw std::invalid_argument("pixel space needs positive dimensions");
  }
  CoordSpace space;
  space.width_ = width;
  space.height_ = height;
  return space;
}

Box::Box(double x_min, double y_min, double x_max, double y_max, CoordSpace space)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max), space_(space) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max)) {
    invalid_box(x_min, y_min, x_max, y_max, "non-finite coordinate");
  }
  if (!(x_min < x_max) || !(y_min < y_max)) {
    invalid_box(x_min, y_min, x_max, y_max, "empty or inverted extent");
  }
  const double w = space.width();
  const double h = space.height();
  const double sx = kFrameSlack * w;
  const double sy = kFrameSlack * h;
  if (x_min < -sx || y_min < -sy || x_max > w + sx || y_max > h + sy) {
    invalid_box(x_min, y_min, x_max, y_max, "outside the coordinate frame");
  }
  x_min_ = std::clamp(x_min_, 0.0, w);
  y_min_ = std::clamp(y_min_, 0.0, h);
  x_max_ = std::clamp(x_max_, 0.0, w);
  y_max_ = std::clamp(y_max_, 0.0, h);
}

Box Box::from_center(double x_center, double y_center, double width, double height,
                     CoordSpace space) {
  return Box(x_center - 0.5 * width, y_center - 0.5 * height, x_center + 0.5 * width,
             y_center + 0.5 * height, space);
}

Detection::Detection(Box b, ObjectLabel l, double c) : box(b), label(l), confidence(c) {
  if (!(c >= 0.0 && c <= 1.0)) {
    throw std::invalid_argument("detection confidence outside [0, 1]");
  }
}

double intersection_area(const Box& a, const Box& b) {
  if (!(a.space() == b.space())) {
    throw std::invalid_argument("iou: boxes are in different coordinate spaces");
  }
  const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool detection_priority_less(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.label != b.label) return a.label < b.label;
  if (a.box.x_min() != b.box.x_min()) return a.box.x_min() < b.box.x_min();
  return a.box.y_min() < b.box.y_min();
}

std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold) {
  std::vector<Detection> order(detections.begin(), detections.end());
  std::stable_sort(order.begin(), order.end(), detection_priority_less);

  std::vector<Detection> kept;
  kept.reserve(order.size());
  for (const Detection& candidate : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.label == candidate.label && iou(k.box, candidate.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(candidate);
  }
  return kept;
}

Box convert(const Box& box, const CoordSpace& target) {
  const CoordSpace& source = box.space();
  if (source == target) return box;
  const double sx = target.width() / source.width();
  const double sy = target.height() / source.height();
  return Box(box.x_min() * sx, box.y_min() * sy, box.x_max() * sx, box.y_max() * sy, target);
}

std::optional<Box> clip_to_frame(double x_min, double y_min, double x_max, double y_max,
                                 const CoordSpace& space) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max)) {
    return std::nullopt;
  }
  const double x0 = std::clamp(x_min, 0.0, space.width());
  const double y0 = std::clamp(y_min, 0.0, space.height());
  const double x1 = std::clamp(x_max, 0.0, space.width());
  const double y1 = std::clamp(y_max, 0.0, space.height());
  if (!(x0 < x1) || !(y0 < y1)) return std::nullopt;
  return Box(x0, y0, x1, y1, space);
}

}  // namespace bargewatch
