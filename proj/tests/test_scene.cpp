#include <doctest.h>

#include "bargewatch/scene.hpp"

using namespace bargewatch;

namespace {
constexpr auto kVwb = ObjectLabel::kVesselWithBarge;
constexpr auto kVwo = ObjectLabel::kVesselWithoutBarge;
constexpr auto kBarge = ObjectLabel::kBarge;
}  // namespace

TEST_CASE("scene examples") {
  CHECK(classify_scene({}) == SceneClass::A);
  CHECK(classify_scene({kVwb, kBarge}) == SceneClass::D);
  CHECK(classify_scene({kVwb}) == SceneClass::F);
  CHECK(classify_scene({kVwb, kVwo, kBarge}) == SceneClass::D);
}

TEST_CASE("scene truth table over all presence combinations") {
  // bit order (vwb, vwo, barge)
  const SceneClass expected[8] = {SceneClass::A, SceneClass::E, SceneClass::B, SceneClass::C,
                                  SceneClass::F, SceneClass::D, SceneClass::F, SceneClass::D};
  for (unsigned bits = 0; bits < 8; ++bits) {
    LabelSet s;
    if (bits & 4u) s.insert(kVwb);
    if (bits & 2u) s.insert(kVwo);
    if (bits & 1u) s.insert(kBarge);
    CHECK(classify_scene(s) == expected[bits]);

    LabelSet with_barge = s;
    with_barge.insert(kBarge);
    CHECK(classify_scene(with_barge) != SceneClass::F);
  }
}

TEST_CASE("ground truth scene of records") {
  ImageRecord background;
  background.id = "bg";
  CHECK(ground_truth_scene(background) == SceneClass::A);

  ImageRecord barge_only;
  barge_only.annotations = {{kBarge, Box::normalized(0.1, 0.1, 0.3, 0.2)}};
  CHECK(ground_truth_scene(barge_only) == SceneClass::E);

  ImageRecord free_vessel_and_barge;
  free_vessel_and_barge.annotations = {{kVwo, Box::normalized(0.1, 0.1, 0.3, 0.2)},
                                       {kBarge, Box::normalized(0.5, 0.5, 0.6, 0.6)},
                                       {kBarge, Box::normalized(0.6, 0.5, 0.7, 0.6)}};
  CHECK(ground_truth_scene(free_vessel_and_barge) == SceneClass::C);
}

TEST_CASE("detections ignore counts") {
  const Box b = Box::normalized(0.1, 0.1, 0.2, 0.2);
  std::vector<Detection> one{Detection(b, kBarge, 0.9)};
  std::vector<Detection> two{Detection(b, kBarge, 0.9), Detection(b, kBarge, 0.4)};
  CHECK(classify_detections(one) == classify_detections(two));
}

TEST_CASE("label and scene text round-trips") {
  for (ObjectLabel l : kAllObjectLabels) CHECK(parse_object_label(to_string(l)) == l);
  for (SceneClass s : kAllSceneClasses) {
    CHECK(parse_scene_class(std::string(1, to_char(s))) == s);
  }
  CHECK_FALSE(parse_scene_class("G").has_value());
  CHECK_FALSE(parse_object_label("tug").has_value());
}
