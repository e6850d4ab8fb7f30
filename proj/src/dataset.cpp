#include "bargewatch/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "bargewatch/errors.hpp"

namespace bargewatch {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Weather weather) {
  switch (weather) {
    case Weather::kClear:
      return "clear";
    case Weather::kRain:
      return "rain";
    case Weather::kFog:
      return "fog";
  }
  return "clear";
}

std::string_view to_string(TimeOfDay time) {
  return time == TimeOfDay::kDay ? "day" : "night";
}

std::optional<Weather> parse_weather(std::string_view text) {
  if (text == "clear") return Weather::kClear;
  if (text == "rain") return Weather::kRain;
  if (text == "fog") return Weather::kFog;
  return std::nullopt;
}

std::optional<TimeOfDay> parse_time_of_day(std::string_view text) {
  if (text == "day") return TimeOfDay::kDay;
  if (text == "night") return TimeOfDay::kNight;
  return std::nullopt;
}

// ---- LabelMap ---------------------------------------------------------------

LabelMap::LabelMap() : by_index_(kAllObjectLabels.begin(), kAllObjectLabels.end()) {}

LabelMap::LabelMap(std::vector<ObjectLabel> by_index) : by_index_(std::move(by_index)) {
  std::set<ObjectLabel> seen(by_index_.begin(), by_index_.end());
  if (seen.size() != by_index_.size()) {
    throw SchemaError("label map lists a label more than once");
  }
}

std::optional<ObjectLabel> LabelMap::label(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= by_index_.size()) return std::nullopt;
  return by_index_[static_cast<std::size_t>(index)];
}

int LabelMap::index(ObjectLabel label) const {
  auto it = std::find(by_index_.begin(), by_index_.end(), label);
  if (it == by_index_.end()) {
    throw SchemaError("label '" + std::string(to_string(label)) + "' is not in the label map");
  }
  return static_cast<int>(it - by_index_.begin());
}

const ImageRecord* DatasetManifest::find(std::string_view id) const {
  for (const ImageRecord& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::vector<std::string> DatasetManifest::validate() const {
  std::unordered_map<std::string, const ImageRecord*> by_id;
  for (const ImageRecord& r : records) {
    if (r.id.empty()) throw SchemaError("record with empty id");
    if (!by_id.emplace(r.id, &r).second) throw SchemaError("duplicate record id '" + r.id + "'");
  }
  std::vector<std::string> warnings;
  for (const ImageRecord& r : records) {
    if (!r.parent_id) continue;
    auto it = by_id.find(*r.parent_id);
    if (it == by_id.end()) {
      throw SchemaError("augmented record '" + r.id + "' references missing parent '" +
                        *r.parent_id + "'");
    }
    if (!it->second->is_original()) {
      throw SchemaError("augmented record '" + r.id + "' has augmented parent '" +
                        *r.parent_id + "'");
    }
  }
  for (const ImageRecord& r : records) {
    bool towing = false, barge = false;
    for (const GroundTruthBox& gt : r.annotations) {
      towing |= gt.label == ObjectLabel::kVesselWithBarge;
      barge |= gt.label == ObjectLabel::kBarge;
    }
    if (towing && !barge) {
      warnings.push_back("record '" + r.id +
                         "' has a towing vessel without barge annotations (scene F ground truth)");
    }
  }
  return warnings;
}

// ---- label files --------------------------------------------------------------

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

std::string format6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<GroundTruthBox> parse_label_file(std::string_view text, const LabelMap& label_map) {
  std::vector<GroundTruthBox> boxes;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != 5) {
      throw ParseError("expected 5 fields, found " + std::to_string(fields.size()), line_no);
    }
    int cls = 0;
    if (!parse_number(fields[0], cls)) {
      throw ParseError("class index '" + std::string(fields[0]) + "' is not an integer", line_no);
    }
    std::array<double, 4> v{};
    for (std::size_t k = 0; k < 4; ++k) {
      if (!parse_number(fields[k + 1], v[k]) || !std::isfinite(v[k])) {
        throw ParseError("'" + std::string(fields[k + 1]) + "' is not a number", line_no);
      }
    }
    auto label = label_map.label(cls);
    if (!label) {
      throw SchemaError("line " + std::to_string(line_no) + ": unknown class index " +
                        std::to_string(cls));
    }
    const auto [xc, yc, w, h] = v;
    for (double c : v) {
      if (c < 0.0 || c > 1.0) {
        throw ValidationError("line " + std::to_string(line_no) + ": coordinate " +
                              std::to_string(c) + " outside [0, 1]");
      }
    }
    if (!(w > 0.0) || !(h > 0.0)) {
      throw ValidationError("line " + std::to_string(line_no) + ": box has zero extent");
    }
    try {
      boxes.push_back({*label, Box::from_center(xc, yc, w, h)});
    } catch (const std::invalid_argument& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return boxes;
}

std::string format_label_file(const std::vector<GroundTruthBox>& boxes, const LabelMap& label_map) {
  std::string out;
  for (const GroundTruthBox& gt : boxes) {
    out += std::to_string(label_map.index(gt.label));
    for (double v : {gt.box.x_center(), gt.box.y_center(), gt.box.width(), gt.box.height()}) {
      out += ' ';
      out += format6(v);
    }
    out += '\n';
  }
  return out;
}

// ---- file helpers ---------------------------------------------------------------

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---- manifest I/O ---------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

fs::path default_label_path(const fs::path& image_path) {
  fs::path p = image_path;
  p.replace_extension(".txt");
  return p;
}

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ParseError(std::string("missing string field '") + key + "'", line_no);
  }
  return it->get<std::string>();
}

std::vector<GroundTruthBox> parse_inline_annotations(const json& arr, std::size_t line_no) {
  if (!arr.is_array()) throw ParseError("'annotations' must be an array", line_no);
  std::vector<GroundTruthBox> out;
  for (const json& a : arr) {
    if (!a.is_object() || !a.contains("label") || !a.contains("box")) {
      throw ParseError("annotation needs 'label' and 'box'", line_no);
    }
    auto label = parse_object_label(a["label"].get<std::string>());
    if (!label) {
      throw SchemaError("line " + std::to_string(line_no) + ": unknown label '" +
                        a["label"].get<std::string>() + "'");
    }
    const json& b = a["box"];
    if (!b.is_array() || b.size() != 4) throw ParseError("'box' must have 4 numbers", line_no);
    try {
      out.push_back({*label, Box::normalized(b[0].get<double>(), b[1].get<double>(),
                                             b[2].get<double>(), b[3].get<double>())});
    } catch (const std::invalid_argument& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text, const fs::path& base_dir,
                               const ManifestLoadOptions& options) {
  DatasetManifest manifest;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pending_labels;  // record index, line

  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (split_ws(line).empty()) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!obj.is_object()) throw ParseError("record is not a JSON object", line_no);

    if (obj.contains("label_map") && !obj.contains("id")) {
      std::vector<ObjectLabel> labels;
      for (const json& name : obj["label_map"]) {
        auto label = name.is_string() ? parse_object_label(name.get<std::string>()) : std::nullopt;
        if (!label) throw SchemaError("line " + std::to_string(line_no) + ": bad label_map entry");
        labels.push_back(*label);
      }
      manifest.label_map = LabelMap(std::move(labels));
      continue;
    }

    ImageRecord r;
    r.id = require_string(obj, "id", line_no);
    r.path = resolve(base_dir, require_string(obj, "path", line_no));
    r.location = require_string(obj, "location", line_no);

    auto weather = parse_weather(obj.value("weather", std::string("clear")));
    if (!weather) throw ParseError("unknown weather '" + obj.value("weather", std::string()) + "'", line_no);
    r.weather = *weather;
    auto tod = parse_time_of_day(obj.value("time_of_day", std::string("day")));
    if (!tod) throw ParseError("unknown time_of_day", line_no);
    r.time_of_day = *tod;

    const std::string origin = obj.value("origin", std::string("original"));
    const json parent = obj.value("parent_id", json());
    if (origin == "augmented") {
      if (!parent.is_string()) throw ParseError("augmented record needs parent_id", line_no);
      r.parent_id = parent.get<std::string>();
    } else if (origin != "original") {
      throw ParseError("origin must be 'original' or 'augmented'", line_no);
    } else if (parent.is_string()) {
      throw ParseError("original record must not set parent_id", line_no);
    }

    if (obj.contains("label_path") && obj["label_path"].is_string()) {
      r.label_path = resolve(base_dir, obj["label_path"].get<std::string>());
    }
    if (obj.contains("annotations")) {
      r.annotations = parse_inline_annotations(obj["annotations"], line_no);
    } else if (options.load_annotations) {
      pending_labels.emplace_back(manifest.records.size(), line_no);
    }
    manifest.records.push_back(std::move(r));
  }

  for (auto [index, line] : pending_labels) {
    ImageRecord& r = manifest.records[index];
    const fs::path label_file = r.label_path.value_or(default_label_path(r.path));
    if (!fs::exists(label_file)) {
      if (options.require_label_files) {
        throw IoError("label file '" + label_file.string() + "' for record '" + r.id +
                      "' does not exist");
      }
      continue;  // background image
    }
    r.annotations = parse_label_file(read_text_file(label_file), manifest.label_map);
  }
  return manifest;
}

DatasetManifest load_manifest(const fs::path& path, const ManifestLoadOptions& options) {
  return parse_manifest(read_text_file(path), path.parent_path(), options);
}

json record_to_json(const ImageRecord& r, bool inline_annotations) {
  json obj = {
      {"id", r.id},
      {"path", r.path.generic_string()},
      {"location", r.location},
      {"weather", to_string(r.weather)},
      {"time_of_day", to_string(r.time_of_day)},
      {"origin", r.is_original() ? "original" : "augmented"},
      {"parent_id", r.parent_id ? json(*r.parent_id) : json()},
  };
  if (inline_annotations) {
    json arr = json::array();
    for (const GroundTruthBox& gt : r.annotations) {
      arr.push_back({{"label", to_string(gt.label)},
                     {"box", {gt.box.x_min(), gt.box.y_min(), gt.box.x_max(), gt.box.y_max()}}});
    }
    obj["annotations"] = std::move(arr);
  }
  if (r.label_path) obj["label_path"] = r.label_path->generic_string();
  return obj;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path, bool inline_annotations) {
  std::string out;
  if (!(manifest.label_map == LabelMap())) {
    json names = json::array();
    for (ObjectLabel l : manifest.label_map.labels()) names.push_back(to_string(l));
    out += json{{"label_map", names}}.dump() + "\n";
  }
  for (const ImageRecord& r : manifest.records) {
    out += record_to_json(r, inline_annotations).dump() + "\n";
  }
  write_text_file(path, out);
}

// ---- filtering --------------------------------------------------------------------

DatasetManifest filter(const DatasetManifest& manifest, const RecordPredicate& predicate) {
  DatasetManifest out;
  out.label_map = manifest.label_map;
  std::copy_if(manifest.records.begin(), manifest.records.end(), std::back_inserter(out.records),
               predicate);
  return out;
}

bool RecordFilter::operator()(const ImageRecord& r) const {
  if (location && r.location != *location) return false;
  if (weather && r.weather != *weather) return false;
  if (time_of_day && r.time_of_day != *time_of_day) return false;
  if (original && r.is_original() != *original) return false;
  return true;
}

std::string RecordFilter::describe() const {
  std::vector<std::string> parts;
  if (location) parts.push_back("location=" + *location);
  if (weather) parts.push_back("weather=" + std::string(to_string(*weather)));
  if (time_of_day) parts.push_back("time_of_day=" + std::string(to_string(*time_of_day)));
  if (original) parts.push_back(std::string("origin=") + (*original ? "original" : "augmented"));
  if (parts.empty()) return "all";
  std::string s = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) s += "," + parts[i];
  return s;
}

RecordFilter RecordFilter::parse(std::string_view text) {
  RecordFilter f;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view term = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (term.empty()) continue;
    const std::size_t eq = term.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("filter term '" + std::string(term) + "' is not key=value");
    }
    const std::string_view key = term.substr(0, eq);
    const std::string_view value = term.substr(eq + 1);
    if (key == "location") {
      f.location = std::string(value);
    } else if (key == "weather") {
      f.weather = parse_weather(value);
      if (!f.weather) throw ValidationError("unknown weather '" + std::string(value) + "'");
    } else if (key == "time_of_day" || key == "time") {
      f.time_of_day = parse_time_of_day(value);
      if (!f.time_of_day) throw ValidationError("unknown time_of_day '" + std::string(value) + "'");
    } else if (key == "origin") {
      if (value == "original") {
        f.original = true;
      } else if (value == "augmented") {
        f.original = false;
      } else {
        throw ValidationError("unknown origin '" + std::string(value) + "'");
      }
    } else {
      throw ValidationError("unknown filter key '" + std::string(key) + "'");
    }
  }
  return f;
}

// ---- splitting --------------------------------------------------------------------

std::array<std::size_t, 3> largest_remainder(std::size_t total, const SplitRatios& ratios) {
  constexpr double kEps = 1e-9;
  const std::array<double, 3> r{ratios.train, ratios.validation, ratios.test};
  std::array<std::size_t, 3> out{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double quota = r[k] * static_cast<double>(total);
    const double fl = std::floor(quota + kEps);
    out[k] = static_cast<std::size_t>(fl);
    rem[k] = std::max(0.0, quota - fl);
    assigned += out[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rem[a] > rem[b] + kEps;
  });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % 3) {
    if (r[order[i]] <= 0.0) continue;
    ++out[order[i]];
    ++assigned;
  }
  return out;
}

const std::vector<std::string>& SplitAssignment::ids(Partition partition) const {
  switch (partition) {
    case Partition::kTrain:
      return train;
    case Partition::kValidation:
      return validation;
    case Partition::kTest:
      return test;
  }
  return train;
}

}  // namespace bargewatch
