#include "bargewatch/scene.hpp"

namespace bargewatch {

SceneClass classify_scene(const LabelSet& labels) {
  const bool towing = labels.contains(ObjectLabel::kVesselWithBarge);
  const bool free_vessel = labels.contains(ObjectLabel::kVesselWithoutBarge);
  const bool barge = labels.contains(ObjectLabel::kBarge);

  if (towing && barge) return SceneClass::D;
  if (towing) return SceneClass::F;
  if (free_vessel && barge) return SceneClass::C;
  if (free_vessel) return SceneClass::B;
  if (barge) return SceneClass::E;
  return SceneClass::A;
}

SceneClass classify_detections(std::span<const Detection> detections) {
  LabelSet labels;
  for (const Detection& d : detections) labels.insert(d.label);
  return classify_scene(labels);
}

SceneClass classify_annotations(std::span<const GroundTruthBox> annotations) {
  LabelSet labels;
  for (const GroundTruthBox& gt : annotations) labels.insert(gt.label);
  return classify_scene(labels);
}

SceneClass ground_truth_scene(const ImageRecord& record) {
  return classify_annotations(record.annotations);
}

}  // namespace bargewatch
