#pragma once

#include <bitset>
#include <initializer_list>
#include <span>

#include "bargewatch/dataset.hpp"
#include "bargewatch/geometry.hpp"
#include "bargewatch/labels.hpp"

namespace bargewatch {

/// Presence flags for the three object labels; counts are irrelevant.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::initializer_list<ObjectLabel> labels) {
    for (ObjectLabel l : labels) insert(l);
  }

  void insert(ObjectLabel label) { bits_.set(index_of(label)); }
  bool contains(ObjectLabel label) const { return bits_.test(index_of(label)); }
  bool empty() const { return bits_.none(); }

 private:
  std::bitset<kNumObjectLabels> bits_;
};

/// Scene precedence D > F > C > B > E > A over the presence flags.
SceneClass classify_scene(const LabelSet& labels);

SceneClass classify_detections(std::span<const Detection> detections);
SceneClass classify_annotations(std::span<const GroundTruthBox> annotations);

/// Observed scene of a record; background images are A.
SceneClass ground_truth_scene(const ImageRecord& record);

}  // namespace bargewatch
