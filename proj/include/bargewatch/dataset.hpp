#pragma once

// Annotation parsing, manifests, filtering and the leakage-safe split.
//
// Manifest format: newline-delimited JSON, one object per image:
//
//   {"id": "mrb_0001", "path": "images/mrb_0001.jpg", "location": "MRB",
//    "weather": "clear", "time_of_day": "day", "origin": "original",
//    "parent_id": null, "label_path": "labels/mrb_0001.txt"}
//
// `label_path` defaults to `path` with its extension replaced by ".txt".
// Instead of a label file a record may carry inline annotations:
//   "annotations": [{"label": "barge", "box": [x_min, y_min, x_max, y_max]}]
// with normalized corner coordinates. A line holding only
//   {"label_map": ["vessel_with_barge", "vessel_without_barge", "barge"]}
// sets the index -> label mapping used by the label files. Relative paths
// resolve against the manifest's directory.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "bargewatch/geometry.hpp"
#include "bargewatch/labels.hpp"

namespace bargewatch {

enum class Weather : std::uint8_t { kClear, kRain, kFog };
enum class TimeOfDay : std::uint8_t { kDay, kNight };

std::string_view to_string(Weather weather);
std::string_view to_string(TimeOfDay time);
std::optional<Weather> parse_weather(std::string_view text);
std::optional<TimeOfDay> parse_time_of_day(std::string_view text);

struct GroundTruthBox {
  ObjectLabel label;
  Box box;  // normalized

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

/// Index <-> label mapping for label files. Defaults to the declaration order
/// of ObjectLabel.
class LabelMap {
 public:
  LabelMap();
  explicit LabelMap(std::vector<ObjectLabel> by_index);

  std::optional<ObjectLabel> label(int index) const;
  int index(ObjectLabel label) const;
  std::size_t size() const { return by_index_.size(); }
  const std::vector<ObjectLabel>& labels() const { return by_index_; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::vector<ObjectLabel> by_index_;
};

struct ImageRecord {
  std::string id;
  std::filesystem::path path;
  std::string location;
  Weather weather = Weather::kClear;
  TimeOfDay time_of_day = TimeOfDay::kDay;
  std::optional<std::string> parent_id;  // set iff augmented
  std::optional<std::filesystem::path> label_path;
  std::vector<GroundTruthBox> annotations;

  bool is_original() const { return !parent_id.has_value(); }
  bool is_augmented() const { return parent_id.has_value(); }
  bool is_background() const { return annotations.empty(); }
};

struct DatasetManifest {
  std::vector<ImageRecord> records;
  LabelMap label_map;

  const ImageRecord* find(std::string_view id) const;

  /// Checks unique ids and that every augmented record names an original
  /// parent present in the manifest. Throws SchemaError. Returns warnings.
  std::vector<std::string> validate() const;
};

// ---- label files ----------------------------------------------------------

/// Parses "class x_center y_center width height" lines (normalized). Blank
/// lines are skipped. Throws ParseError (with line number), SchemaError for an
/// unknown class index and ValidationError for out-of-range geometry.
std::vector<GroundTruthBox> parse_label_file(std::string_view text, const LabelMap& label_map);

/// Inverse of parse_label_file, six decimals per value.
std::string format_label_file(const std::vector<GroundTruthBox>& boxes, const LabelMap& label_map);

// ---- manifest I/O ---------------------------------------------------------

struct ManifestLoadOptions {
  bool load_annotations = true;  // read label files for records without inline annotations
  bool require_label_files = false;  // missing label file => IoError instead of background
};

DatasetManifest load_manifest(const std::filesystem::path& path,
                              const ManifestLoadOptions& options = {});
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                               const ManifestLoadOptions& options = {});

/// Writes the manifest as NDJSON. With `inline_annotations` the boxes go into
/// the record; otherwise records reference label files next to each image.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path,
                   bool inline_annotations = true);

nlohmann::json record_to_json(const ImageRecord& record, bool inline_annotations);

// ---- filtering ------------------------------------------------------------

using RecordPredicate = std::function<bool(const ImageRecord&)>;

DatasetManifest filter(const DatasetManifest& manifest, const RecordPredicate& predicate);

/// Conjunctive predicate over location/weather/time/origin. Unset fields match
/// everything.
struct RecordFilter {
  std::optional<std::string> location;
  std::optional<Weather> weather;
  std::optional<TimeOfDay> time_of_day;
  std::optional<bool> original;  // true: originals only, false: augmented only

  bool operator()(const ImageRecord& record) const;
  std::string describe() const;

  /// Parses "key=value[,key=value...]" with keys location, weather,
  /// time_of_day and origin. Empty text yields the match-all filter.
  static RecordFilter parse(std::string_view text);
};

// ---- splitting ------------------------------------------------------------

enum class Partition : std::uint8_t { kTrain = 0, kValidation = 1, kTest = 2 };

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

/// Largest-remainder apportionment of `total` units over three ratios. Equal
/// remainders go to the lower partition index.
std::array<std::size_t, 3> largest_remainder(std::size_t total, const SplitRatios& ratios);

struct StratumReport {
  std::string key;  // "<location>/<scene>"
  std::size_t records = 0;
  std::size_t originals = 0;
  std::array<std::size_t, 3> target{};
  std::array<std::size_t, 3> assigned{};
  std::size_t withheld = 0;
};

struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  // Augmented children of test originals. Kept out of every partition so no
  // test image has a sibling in training.
  std::vector<std::string> withheld;
  std::vector<StratumReport> strata;
  std::vector<std::string> warnings;

  const std::vector<std::string>& ids(Partition partition) const;
};

/// Stratified (location x ground-truth scene) split at the family level: an
/// original and its augmented children move together. Test receives originals
/// only, childless ones first. Deterministic for a fixed seed.
SplitAssignment stratified_group_split(const DatasetManifest& manifest,
                                       const SplitRatios& ratios, std::uint64_t seed);

/// Writes train.txt, val.txt, test.txt (and withheld.txt when non-empty),
/// one id per line.
void write_split(const SplitAssignment& split, const std::filesystem::path& directory);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace bargewatch
