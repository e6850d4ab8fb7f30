#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bargewatch/labels.hpp"

namespace bargewatch {

/// Coordinate frame of a box: unit square, or pixels of a width x height frame.
class CoordSpace {
 public:
  static CoordSpace normalized() { return CoordSpace{}; }
  static CoordSpace pixel(double width, double height);

  bool is_normalized() const { return width_ == 0.0; }
  double width() const { return is_normalized() ? 1.0 : width_; }
  double height() const { return is_normalized() ? 1.0 : height_; }

  friend bool operator==(const CoordSpace&, const CoordSpace&) = default;

 private:
  CoordSpace() = default;
  double width_ = 0.0;
  double height_ = 0.0;
};

/// Axis-aligned box in corner form. Construction enforces
/// x_min < x_max, y_min < y_max and containment in the coordinate frame.
class Box {
 public:
  Box(double x_min, double y_min, double x_max, double y_max,
      CoordSpace space = CoordSpace::normalized());

  static Box normalized(double x_min, double y_min, double x_max, double y_max) {
    return Box(x_min, y_min, x_max, y_max, CoordSpace::normalized());
  }
  static Box pixel(double x_min, double y_min, double x_max, double y_max,
                   double width, double height) {
    return Box(x_min, y_min, x_max, y_max, CoordSpace::pixel(width, height));
  }
  static Box from_center(double x_center, double y_center, double width,
                         double height, CoordSpace space = CoordSpace::normalized());

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }
  const CoordSpace& space() const { return space_; }

  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  double area() const { return width() * height(); }
  double x_center() const { return 0.5 * (x_min_ + x_max_); }
  double y_center() const { return 0.5 * (y_min_ + y_max_); }

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x_min_, y_min_, x_max_, y_max_;
  CoordSpace space_;
};

struct Detection {
  Detection(Box box, ObjectLabel label, double confidence);

  Box box;
  ObjectLabel label;
  double confidence;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Intersection over union. Throws std::invalid_argument when the boxes live
/// in different coordinate spaces.
double iou(const Box& a, const Box& b);

/// Area of the overlap of two boxes in the same space (0 when disjoint).
double intersection_area(const Box& a, const Box& b);

/// Greedy per-label hard NMS. Output is sorted by confidence descending with
/// ties broken by (label, x_min, y_min); a detection survives iff its IoU with
/// every already-kept same-label detection is <= iou_threshold.
std::vector<Detection> nms(std::span<const Detection> detections, double iou_threshold);

/// Total order used by NMS and decoding: higher confidence first.
bool detection_priority_less(const Detection& a, const Detection& b);

/// Re-express a box in another coordinate space.
Box convert(const Box& box, const CoordSpace& target);

/// Clip raw corner coordinates to the frame of `space`; nullopt when nothing
/// of positive area remains.
std::optional<Box> clip_to_frame(double x_min, double y_min, double x_max,
                                 double y_max, const CoordSpace& space);

}  // namespace bargewatch
