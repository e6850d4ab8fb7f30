#include "bargewatch/labels.hpp"

namespace bargewatch {

std::string_view to_string(ObjectLabel label) {
  switch (label) {
    case ObjectLabel::kVesselWithBarge:
      return "vessel_with_barge";
    case ObjectLabel::kVesselWithoutBarge:
      return "vessel_without_barge";
    case ObjectLabel::kBarge:
      return "barge";
  }
  return "unknown";
}

std::optional<ObjectLabel> parse_object_label(std::string_view text) {
  for (ObjectLabel label : kAllObjectLabels) {
    if (to_string(label) == text) return label;
  }
  return std::nullopt;
}

char to_char(SceneClass scene) { return static_cast<char>('A' + index_of(scene)); }

std::string_view describe(SceneClass scene) {
  switch (scene) {
    case SceneClass::A:
      return "No Detection (no vessel, no barge)";
    case SceneClass::B:
      return "Vessel without Barge, No Barge";
    case SceneClass::C:
      return "Vessel without Barge, Barge";
    case SceneClass::D:
      return "Vessel with Barge, Barge";
    case SceneClass::E:
      return "Barge only";
    case SceneClass::F:
      return "Vessel with Barge, No Barge";
  }
  return "unknown";
}

std::optional<SceneClass> parse_scene_class(std::string_view text) {
  if (text.size() != 1) return std::nullopt;
  char c = text.front();
  if (c >= 'a' && c <= 'f') c = static_cast<char>(c - 'a' + 'A');
  if (c < 'A' || c > 'F') return std::nullopt;
  return static_cast<SceneClass>(c - 'A');
}

}  // namespace bargewatch
