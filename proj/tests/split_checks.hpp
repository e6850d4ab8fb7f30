#pragma once

// Property checks for SplitAssignment shared by unit and acceptance suites.
// Returns an empty string when every property holds.

#include <map>
#include <set>
#include <string>

#include "bargewatch/dataset.hpp"
#include "bargewatch/scene.hpp"

namespace checks {

using namespace bargewatch;

inline std::string split_violations(const DatasetManifest& m, const SplitAssignment& s,
                                    const SplitRatios& ratios) {
  std::map<std::string, int> where;  // 0 train 1 val 2 test 3 withheld
  const std::vector<std::string>* buckets[] = {&s.train, &s.validation, &s.test, &s.withheld};
  for (int b = 0; b < 4; ++b) {
    for (const std::string& id : *buckets[b]) {
      if (!where.emplace(id, b).second) return "id " + id + " appears twice";
    }
  }
  if (where.size() != m.records.size()) return "partitions are not exhaustive";
  for (const ImageRecord& r : m.records) {
    if (!where.count(r.id)) return "id " + r.id + " missing";
  }

  std::map<std::string, std::size_t> parent_bucket_count;
  for (const ImageRecord& r : m.records) {
    const int b = where.at(r.id);
    if (b == 2 && r.is_augmented()) return "augmented " + r.id + " in test";
    if (r.is_augmented()) {
      const int pb = where.at(*r.parent_id);
      if (pb == 2 && b != 3) return "child " + r.id + " of test parent not withheld";
      if (pb != 2 && pb != b) return "child " + r.id + " straddles its parent's partition";
      if (b == 3 && pb != 2) return "withheld " + r.id + " has a non-test parent";
    }
  }

  // Per-stratum sizes against largest-remainder targets.
  struct Acc {
    std::size_t records = 0, originals = 0;
    std::size_t n[4] = {0, 0, 0, 0};
    std::vector<std::size_t> train_family_sizes;
  };
  std::map<std::string, Acc> strata;
  std::map<std::string, std::string> key_of;
  std::map<std::string, std::size_t> family_size;
  for (const ImageRecord& r : m.records) {
    if (r.is_original()) {
      key_of[r.id] = r.location + "/" + to_char(ground_truth_scene(r));
      family_size[r.id] += 1;
    } else {
      family_size[*r.parent_id] += 1;
    }
  }
  for (const ImageRecord& r : m.records) {
    const std::string& key = key_of.at(r.is_original() ? r.id : *r.parent_id);
    Acc& a = strata[key];
    a.records += 1;
    a.originals += r.is_original();
    a.n[where.at(r.id)] += 1;
    if (r.is_original() && where.at(r.id) == 0) a.train_family_sizes.push_back(family_size.at(r.id));
  }
  const bool moved_one = !s.warnings.empty() &&
                         std::any_of(s.warnings.begin(), s.warnings.end(), [](const std::string& w) {
                           return w.find("moved one original") != std::string::npos;
                         });
  for (const auto& [key, a] : strata) {
    const auto target = largest_remainder(a.records, ratios);
    const std::size_t want_test = std::min(target[2], a.originals);
    const std::size_t diff = a.n[2] > want_test ? a.n[2] - want_test : want_test - a.n[2];
    if (diff > (moved_one ? 1u : 0u)) return "stratum " + key + " test size off target";
    const std::size_t val = a.n[1];
    if (val > target[1] + 1) return "stratum " + key + " validation over target";
    if (val + 1 < target[1]) {
      const std::size_t gap = target[1] - val;
      for (std::size_t size : a.train_family_sizes) {
        if (size <= gap) return "stratum " + key + " validation short although a family fits";
      }
    }
  }

  std::size_t originals = 0;
  for (const ImageRecord& r : m.records) originals += r.is_original();
  if (ratios.test > 0 && originals > 0 && s.test.empty()) return "empty test set";
  return {};
}

}  // namespace checks
