#pragma once

// Synthetic manifests shaped like the published dataset tables.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "bargewatch/dataset.hpp"

namespace fixtures {

using namespace bargewatch;

inline std::vector<GroundTruthBox> annotations_for(SceneClass scene) {
  const Box left = Box::normalized(0.10, 0.40, 0.30, 0.55);
  const Box mid = Box::normalized(0.35, 0.40, 0.60, 0.55);
  const Box right = Box::normalized(0.65, 0.40, 0.90, 0.55);
  switch (scene) {
    case SceneClass::A:
      return {};
    case SceneClass::B:
      return {{ObjectLabel::kVesselWithoutBarge, left}};
    case SceneClass::C:
      return {{ObjectLabel::kVesselWithoutBarge, left}, {ObjectLabel::kBarge, right}};
    case SceneClass::D:
      return {{ObjectLabel::kVesselWithBarge, left},
              {ObjectLabel::kBarge, mid},
              {ObjectLabel::kBarge, right}};
    case SceneClass::E:
      return {{ObjectLabel::kBarge, mid}};
    case SceneClass::F:
      return {{ObjectLabel::kVesselWithBarge, left}};
  }
  return {};
}

inline ImageRecord make_record(std::string id, std::string location, SceneClass scene,
                               Weather weather = Weather::kClear,
                               TimeOfDay time = TimeOfDay::kDay) {
  ImageRecord r;
  r.path = "images/" + id + ".jpg";
  r.id = std::move(id);
  r.location = std::move(location);
  r.weather = weather;
  r.time_of_day = time;
  r.annotations = annotations_for(scene);
  return r;
}

inline ImageRecord make_child(const ImageRecord& parent, int k) {
  ImageRecord c = parent;
  c.id = parent.id + "_aug" + std::to_string(k);
  c.path = "images/" + c.id + ".jpg";
  c.parent_id = parent.id;
  return c;
}

struct LocationCount {
  const char* code;
  int images;
};

// Per-location image counts from the dataset table (331 originals).
inline constexpr LocationCount kTable1[] = {
    {"ERB", 48}, {"LRB", 55}, {"SLA", 60}, {"MRB", 142}, {"CCB", 26}};

// 331 originals at the table's per-location counts, about 12% background,
// plus `augmented` children spread over a subset of originals (up to three
// per parent), the way an export tool augments only the training pool.
inline DatasetManifest make_table1_manifest(int augmented, unsigned seed = 1) {
  DatasetManifest m;
  std::mt19937 gen(seed);
  // Roughly the test-set class mix, with A at 12% (background images).
  const SceneClass cycle[] = {SceneClass::D, SceneClass::E, SceneClass::D, SceneClass::A,
                              SceneClass::D, SceneClass::B, SceneClass::D, SceneClass::E,
                              SceneClass::D, SceneClass::D, SceneClass::B, SceneClass::D,
                              SceneClass::E, SceneClass::D, SceneClass::A, SceneClass::D,
                              SceneClass::C};
  int n = 0;
  for (const auto& loc : kTable1) {
    for (int i = 0; i < loc.images; ++i, ++n) {
      const SceneClass s = cycle[n % std::size(cycle)];
      const Weather w = n % 5 == 0 ? Weather::kRain : (n % 17 == 0 ? Weather::kFog : Weather::kClear);
      m.records.push_back(make_record(std::string(loc.code) + "_" + std::to_string(i),
                                      loc.code, s, w,
                                      n % 4 == 0 ? TimeOfDay::kNight : TimeOfDay::kDay));
    }
  }
  std::vector<std::size_t> parents(m.records.size());
  for (std::size_t i = 0; i < parents.size(); ++i) parents[i] = i;
  std::shuffle(parents.begin(), parents.end(), gen);
  // Augment the first 55% of the shuffled originals round-robin.
  const std::size_t eligible = m.records.size() * 55 / 100;
  std::vector<int> kid_count(m.records.size(), 0);
  for (int made = 0; made < augmented; ++made) {
    const std::size_t p = parents[static_cast<std::size_t>(made) % eligible];
    m.records.push_back(make_child(m.records[p], kid_count[p]++));
  }
  return m;
}

// The 116-image test set: class mix A13 B12 C1 D70 E20, with 74 rain and 19
// fog images.
inline DatasetManifest make_paper_test_manifest() {
  DatasetManifest m;
  const std::pair<SceneClass, int> mix[] = {
      {SceneClass::A, 13}, {SceneClass::B, 12}, {SceneClass::C, 1},
      {SceneClass::D, 70}, {SceneClass::E, 20}};
  int n = 0;
  for (auto [scene, count] : mix) {
    for (int i = 0; i < count; ++i, ++n) {
      const Weather w = n < 74 ? Weather::kRain : (n < 93 ? Weather::kFog : Weather::kClear);
      const char* loc = kTable1[n % 5].code;
      m.records.push_back(make_record("test_" + std::to_string(n), loc, scene, w));
    }
  }
  return m;
}

// Random manifest for split property tests.
inline DatasetManifest make_random_manifest(std::mt19937& gen) {
  static const char* kLocations[] = {"ERB", "LRB", "SLA", "MRB", "CCB"};
  std::uniform_int_distribution<int> n_orig(1, 60);
  std::uniform_int_distribution<int> loc(0, 4);
  std::uniform_int_distribution<int> scene(0, 4);
  std::uniform_int_distribution<int> kids(0, 3);
  std::bernoulli_distribution augmented(0.5);
  DatasetManifest m;
  const int n = n_orig(gen);
  for (int i = 0; i < n; ++i) {
    m.records.push_back(make_record("r" + std::to_string(i), kLocations[loc(gen)],
                                    static_cast<SceneClass>(scene(gen))));
  }
  const std::size_t originals = m.records.size();
  for (std::size_t i = 0; i < originals; ++i) {
    if (!augmented(gen)) continue;
    const int k = kids(gen);
    for (int j = 0; j < k; ++j) m.records.push_back(make_child(m.records[i], j));
  }
  std::shuffle(m.records.begin(), m.records.end(), gen);
  return m;
}

}  // namespace fixtures
