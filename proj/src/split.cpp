#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "bargewatch/dataset.hpp"
#include "bargewatch/errors.hpp"
#include "bargewatch/rng.hpp"
#include "bargewatch/scene.hpp"

namespace bargewatch {
namespace {

struct Family {
  const ImageRecord* original = nullptr;
  std::vector<const ImageRecord*> children;

  std::size_t size() const { return 1 + children.size(); }
};

struct Stratum {
  std::vector<Family*> families;
  std::size_t records = 0;
};

void validate_ratios(const SplitRatios& r) {
  constexpr double kTol = 1e-9;
  for (double v : {r.train, r.validation, r.test}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("split ratios must be >= 0");
  }
  if (!(r.train > 0.0)) throw ValidationError("train ratio must be positive");
  if (std::abs(r.train + r.validation + r.test - 1.0) > kTol) {
    throw ValidationError("split ratios must sum to 1");
  }
}

void add_family(std::vector<std::string>& ids, const Family& f) {
  ids.push_back(f.original->id);
  for (const ImageRecord* c : f.children) ids.push_back(c->id);
}

}  // namespace

SplitAssignment stratified_group_split(const DatasetManifest& manifest, const SplitRatios& ratios,
                                       std::uint64_t seed) {
  validate_ratios(ratios);
  SplitAssignment out;
  for (std::string& w : manifest.validate()) out.warnings.push_back(std::move(w));

  std::vector<Family> families;
  std::unordered_map<std::string, std::size_t> family_of;
  for (const ImageRecord& r : manifest.records) {
    if (r.is_original()) {
      family_of.emplace(r.id, families.size());
      families.push_back(Family{&r, {}});
    }
  }
  for (const ImageRecord& r : manifest.records) {
    if (r.is_augmented()) families[family_of.at(*r.parent_id)].children.push_back(&r);
  }

  // Keyed by location and the original's observed scene; std::map keeps the
  // iteration order independent of manifest order.
  std::map<std::string, Stratum> strata;
  for (Family& f : families) {
    const std::string key =
        f.original->location + "/" + to_char(ground_truth_scene(*f.original));
    Stratum& s = strata[key];
    s.families.push_back(&f);
    s.records += f.size();
  }

  const std::size_t positive_parts = (ratios.train > 0) + (ratios.validation > 0) + (ratios.test > 0);

  struct Placement {
    std::vector<Family*> train, validation, test;
  };
  std::map<std::string, Placement> placements;

  for (auto& [key, stratum] : strata) {
    StratumReport report;
    report.key = key;
    report.records = stratum.records;
    report.originals = stratum.families.size();
    report.target = largest_remainder(stratum.records, ratios);
    if (stratum.records < positive_parts) {
      out.warnings.push_back("stratum " + key + " has " + std::to_string(stratum.records) +
                             " record(s), fewer than the partitions; best-effort assignment");
    }

    Rng rng(mix_seed(seed, stable_hash(key)));
    std::vector<Family*> pool = stratum.families;
    rng.shuffle(std::span<Family*>(pool));
    // Fewest children first so test picks withhold as few augmented copies
    // as possible.
    std::stable_sort(pool.begin(), pool.end(), [](const Family* a, const Family* b) {
      return a->children.size() < b->children.size();
    });

    Placement& place = placements[key];
    const std::size_t n_test = std::min(report.target[2], pool.size());
    place.test.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<Family*> rest(pool.begin() + static_cast<std::ptrdiff_t>(n_test), pool.end());
    if (n_test < report.target[2]) {
      out.warnings.push_back("stratum " + key + " has too few originals for its test target");
    }

    // Fill validation with the largest families that still fit, so the
    // singletons left over can close the gap exactly.
    std::stable_sort(rest.begin(), rest.end(),
                     [](const Family* a, const Family* b) { return a->size() > b->size(); });
    std::size_t val_records = 0;
    for (Family* f : rest) {
      if (val_records + f->size() <= report.target[1]) {
        place.validation.push_back(f);
        val_records += f->size();
      } else {
        place.train.push_back(f);
      }
    }
  }

  // Never leave test empty when it was requested and originals exist.
  const bool test_empty = std::all_of(placements.begin(), placements.end(),
                                      [](const auto& kv) { return kv.second.test.empty(); });
  if (ratios.test > 0.0 && test_empty && !families.empty()) {
    std::vector<std::string> keys;
    for (const auto& [key, s] : strata) keys.push_back(key);
    std::stable_sort(keys.begin(), keys.end(), [&](const std::string& a, const std::string& b) {
      return strata.at(a).families.size() > strata.at(b).families.size();
    });
    bool moved = false;
    for (bool childless_only : {true, false}) {
      for (const std::string& key : keys) {
        Placement& p = placements.at(key);
        for (auto* bucket : {&p.train, &p.validation}) {
          auto it = std::find_if(bucket->begin(), bucket->end(), [&](const Family* f) {
            return !childless_only || f->children.empty();
          });
          if (it != bucket->end()) {
            p.test.push_back(*it);
            bucket->erase(it);
            moved = true;
            break;
          }
        }
        if (moved) break;
      }
      if (moved) break;
    }
    out.warnings.push_back("no stratum reached a test quota; moved one original to test");
  }

  for (auto& [key, stratum] : strata) {
    const Placement& p = placements.at(key);
    StratumReport report;
    report.key = key;
    report.records = stratum.records;
    report.originals = stratum.families.size();
    report.target = largest_remainder(stratum.records, ratios);
    for (const Family* f : p.train) {
      add_family(out.train, *f);
      report.assigned[0] += f->size();
    }
    for (const Family* f : p.validation) {
      add_family(out.validation, *f);
      report.assigned[1] += f->size();
    }
    for (const Family* f : p.test) {
      out.test.push_back(f->original->id);
      report.assigned[2] += 1;
      for (const ImageRecord* c : f->children) out.withheld.push_back(c->id);
      report.withheld += f->children.size();
    }
    if (report.withheld > 0) {
      out.warnings.push_back("stratum " + key + ": withheld " + std::to_string(report.withheld) +
                             " augmented record(s) whose parent is in test");
    }
    out.strata.push_back(std::move(report));
  }

  for (auto* ids : {&out.train, &out.validation, &out.test, &out.withheld}) {
    std::sort(ids->begin(), ids->end());
  }
  return out;
}

void write_split(const SplitAssignment& split, const std::filesystem::path& directory) {
  auto join = [](const std::vector<std::string>& ids) {
    std::string s;
    for (const std::string& id : ids) s += id + "\n";
    return s;
  };
  write_text_file(directory / "train.txt", join(split.train));
  write_text_file(directory / "val.txt", join(split.validation));
  write_text_file(directory / "test.txt", join(split.test));
  if (!split.withheld.empty()) write_text_file(directory / "withheld.txt", join(split.withheld));
}

}  // namespace bargewatch
