#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace bargewatch {

/// Object kinds a detector emits. Declaration order is the label-map index
/// order and also the NMS tie-break order.
enum class ObjectLabel : std::uint8_t {
  kVesselWithBarge = 0,
  kVesselWithoutBarge = 1,
  kBarge = 2,
};

inline constexpr std::size_t kNumObjectLabels = 3;
inline constexpr std::array<ObjectLabel, kNumObjectLabels> kAllObjectLabels{
    ObjectLabel::kVesselWithBarge, ObjectLabel::kVesselWithoutBarge,
    ObjectLabel::kBarge};

/// Per-image scene class. A through E are the observed classes; F is the
/// prediction-only "towing vessel seen, no barge seen" anomaly.
enum class SceneClass : std::uint8_t { A = 0, B, C, D, E, F };

inline constexpr std::size_t kNumSceneClasses = 6;
inline constexpr std::array<SceneClass, kNumSceneClasses> kAllSceneClasses{
    SceneClass::A, SceneClass::B, SceneClass::C,
    SceneClass::D, SceneClass::E, SceneClass::F};

std::string_view to_string(ObjectLabel label);
std::optional<ObjectLabel> parse_object_label(std::string_view text);

char to_char(SceneClass scene);
std::string_view describe(SceneClass scene);
std::optional<SceneClass> parse_scene_class(std::string_view text);

constexpr std::size_t index_of(ObjectLabel label) {
  return static_cast<std::size_t>(label);
}
constexpr std::size_t index_of(SceneClass scene) {
  return static_cast<std::size_t>(scene);
}

}  // namespace bargewatch
