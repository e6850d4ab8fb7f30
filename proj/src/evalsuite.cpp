#include "bargewatch/evalsuite.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bargewatch/errors.hpp"
#include "bargewatch/scene.hpp"

namespace bargewatch {

using nlohmann::json;

PrecisionRecallF1 precision_recall_f1(const ClassCounts& c) {
  PrecisionRecallF1 out;
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) {
    out.vacuous = true;
    return out;
  }
  const double tp = static_cast<double>(c.tp);
  out.precision = c.tp + c.fp == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fp);
  out.recall = c.tp + c.fn == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fn);
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

LabelCounts match_detections(std::span<const GroundTruthBox> ground_truth,
                             std::span<const Detection> predictions, double iou_threshold) {
  LabelCounts counts{};
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].confidence > predictions[b].confidence;
  });

  std::vector<bool> matched(ground_truth.size(), false);
  for (std::size_t p : order) {
    const Detection& pred = predictions[p];
    std::size_t best = ground_truth.size();
    double best_iou = -1.0;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (matched[g] || ground_truth[g].label != pred.label) continue;
      const double v = iou(ground_truth[g].box, pred.box);
      if (v >= iou_threshold && v > best_iou) {
        best = g;
        best_iou = v;
      }
    }
    ClassCounts& c = counts[index_of(pred.label)];
    if (best < ground_truth.size()) {
      matched[best] = true;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    if (!matched[g]) ++counts[index_of(ground_truth[g].label)].fn;
  }
  return counts;
}

std::size_t ConfusionMatrix::row_sum(SceneClass observed) const {
  const auto& row = cells_[index_of(observed)];
  return std::accumulate(row.begin(), row.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::column_sum(SceneClass predicted) const {
  std::size_t s = 0;
  for (const auto& row : cells_) s += row[index_of(predicted)];
  return s;
}

std::size_t ConfusionMatrix::diagonal_sum() const {
  std::size_t s = 0;
  for (std::size_t k = 0; k < kNumSceneClasses; ++k) s += cells_[k][k];
  return s;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (const auto& row : cells_) s += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return s;
}

ConfusionMatrix scene_confusion(std::span<const ScenePair> pairs) {
  ConfusionMatrix m;
  for (const auto& [observed, predicted] : pairs) m.add(observed, predicted);
  return m;
}

std::optional<double> macro_average(std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& m) {
  MetricsReport report;
  report.confusion = m;
  report.samples = m.total();
  std::vector<double> included;
  for (SceneClass k : kAllSceneClasses) {
    ClassMetrics& cm = report.per_class[index_of(k)];
    cm.scene = k;
    cm.observed = m.row_sum(k);
    cm.predicted = m.column_sum(k);
    cm.counts.tp = m.at(k, k);
    cm.counts.fp = cm.predicted - cm.counts.tp;
    cm.counts.fn = cm.observed - cm.counts.tp;
    cm.prf = precision_recall_f1(cm.counts);
    if (cm.observed > 0) {
      cm.accuracy = static_cast<double>(cm.counts.tp) / static_cast<double>(cm.observed);
      cm.in_macro = true;
      included.push_back(cm.prf.f1);
    }
  }
  report.macro_f1 = macro_average(included);
  if (report.samples > 0) {
    report.overall_accuracy =
        static_cast<double>(m.diagonal_sum()) / static_cast<double>(report.samples);
  }
  return report;
}

// ---- predictions and slicing --------------------------------------------------------

MetricsReport slice_eval(const DatasetManifest& manifest, const PredictionSet& predictions,
                         const RecordPredicate& slicer, const std::string& slice_name,
                         std::optional<double> match_iou) {
  std::vector<ScenePair> pairs;
  std::vector<std::string> missing;
  LabelCounts objects{};
  for (const ImageRecord& r : manifest.records) {
    if (!slicer(r)) continue;
    auto it = predictions.find(r.id);
    if (it == predictions.end()) {
      missing.push_back(r.id);
      continue;
    }
    pairs.emplace_back(ground_truth_scene(r), classify_detections(it->second));
    if (match_iou) {
      const LabelCounts c = match_detections(r.annotations, it->second, *match_iou);
      for (std::size_t k = 0; k < kNumObjectLabels; ++k) objects[k] += c[k];
    }
  }
  if (!missing.empty()) {
    std::string msg = "no prediction for " + std::to_string(missing.size()) + " record(s):";
    for (const std::string& id : missing) msg += " " + id;
    throw EvaluationError(msg);
  }
  MetricsReport report = metrics_from_confusion(scene_confusion(pairs));
  report.slice = slice_name;
  if (match_iou) report.object_counts = objects;
  return report;
}

std::vector<ScenePair> pair_scenes(const SceneLabels& observed, const SceneLabels& predicted) {
  std::vector<ScenePair> pairs;
  std::vector<std::string> missing;
  for (const auto& [id, scene] : observed) {
    auto it = predicted.find(id);
    if (it == predicted.end()) {
      missing.push_back(id);
    } else {
      pairs.emplace_back(scene, it->second);
    }
  }
  if (!missing.empty()) {
    std::string msg = "no prediction for " + std::to_string(missing.size()) + " record(s):";
    for (const std::string& id : missing) msg += " " + id;
    throw EvaluationError(msg);
  }
  return pairs;
}

SceneLabels parse_scene_labels(std::string_view text, int column) {
  if (column != 1 && column != 2) throw std::invalid_argument("scene column must be 1 or 2");
  SceneLabels out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string id, first, second, extra;
    if (!(fields >> id)) continue;
    if (!(fields >> first)) throw ParseError("expected 'image_id observed [predicted]'", line_no);
    fields >> second;
    if (fields >> extra) throw ParseError("too many fields", line_no);
    const std::string& chosen = column == 2 && !second.empty() ? second : first;
    auto scene = parse_scene_class(chosen);
    if (!scene) throw ParseError("'" + chosen + "' is not a scene class A-F", line_no);
    if (!out.emplace(id, *scene).second) throw ParseError("duplicate image id '" + id + "'", line_no);
  }
  return out;
}

// ---- protocols ------------------------------------------------------------------------

TransferSplit transferability_protocol(const DatasetManifest& manifest,
                                       const std::string& holdout_location) {
  std::set<std::string> holdout_originals;
  for (const ImageRecord& r : manifest.records) {
    if (r.location == holdout_location && r.is_original()) holdout_originals.insert(r.id);
  }
  const bool any = std::any_of(manifest.records.begin(), manifest.records.end(),
                               [&](const ImageRecord& r) { return r.location == holdout_location; });
  if (!any) throw std::invalid_argument("location '" + holdout_location + "' has no records");

  TransferSplit out;
  out.train.label_map = manifest.label_map;
  out.test.label_map = manifest.label_map;
  for (const ImageRecord& r : manifest.records) {
    const bool derived = r.is_augmented() && (holdout_originals.count(*r.parent_id) > 0 ||
                                              r.location == holdout_location);
    if (r.is_original() && r.location == holdout_location) {
      out.test.records.push_back(r);
    } else if (derived) {
      ++out.dropped;
    } else {
      out.train.records.push_back(r);
    }
  }
  return out;
}

double throughput(std::size_t frames, double elapsed_seconds) {
  if (!(elapsed_seconds > 0.0)) throw std::invalid_argument("elapsed time must be positive");
  return static_cast<double>(frames) / elapsed_seconds;
}

// ---- reporting ------------------------------------------------------------------------

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(); }

std::string pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
  return buf;
}

}  // namespace

json report_to_json(const MetricsReport& r) {
  json classes = json::object();
  for (const ClassMetrics& cm : r.per_class) {
    classes[std::string(1, to_char(cm.scene))] = {
        {"tp", cm.counts.tp},
        {"fp", cm.counts.fp},
        {"fn", cm.counts.fn},
        {"observed", cm.observed},
        {"predicted", cm.predicted},
        {"precision", cm.prf.precision},
        {"recall", cm.prf.recall},
        {"f1", cm.prf.f1},
        {"vacuous", cm.prf.vacuous},
        {"accuracy", optional_number(cm.accuracy)},
        {"in_macro", cm.in_macro},
    };
  }
  json matrix = json::array();
  for (SceneClass o : kAllSceneClasses) {
    json row = json::array();
    for (SceneClass p : kAllSceneClasses) row.push_back(r.confusion.at(o, p));
    matrix.push_back(row);
  }
  json out = {
      {"slice", r.slice},
      {"samples", r.samples},
      {"classes", classes},
      {"macro_f1", optional_number(r.macro_f1)},
      {"overall_accuracy", optional_number(r.overall_accuracy)},
      {"fps", optional_number(r.fps)},
      {"confusion", {{"order", "ABCDEF"}, {"rows_observed", matrix}}},
  };
  if (r.object_counts) {
    json objects = json::object();
    for (ObjectLabel l : kAllObjectLabels) {
      const ClassCounts& c = (*r.object_counts)[index_of(l)];
      const PrecisionRecallF1 prf = precision_recall_f1(c);
      objects[std::string(to_string(l))] = {{"tp", c.tp},         {"fp", c.fp},
                                            {"fn", c.fn},         {"precision", prf.precision},
                                            {"recall", prf.recall}, {"f1", prf.f1}};
    }
    out["objects"] = objects;
  }
  return out;
}

std::string format_report_table(const MetricsReport& r) {
  std::ostringstream os;
  char line[256];
  os << "slice: " << r.slice << "   samples: " << r.samples << "\n\n";
  std::snprintf(line, sizeof line, "%-6s %9s %9s %9s %9s %6s %6s %6s %6s\n", "class", "P(%)",
                "R(%)", "F1(%)", "Acc(%)", "obs", "pred", "tp", "macro");
  os << line;
  for (const ClassMetrics& cm : r.per_class) {
    const bool undefined = cm.prf.vacuous;
    std::snprintf(line, sizeof line, "%-6c %9s %9s %9s %9s %6zu %6zu %6zu %6s\n", to_char(cm.scene),
                  undefined ? "-" : pct(cm.prf.precision).c_str(),
                  undefined ? "-" : pct(cm.prf.recall).c_str(),
                  undefined ? "-" : pct(cm.prf.f1).c_str(), pct(cm.accuracy).c_str(), cm.observed,
                  cm.predicted, cm.counts.tp, cm.in_macro ? "yes" : "no");
    os << line;
  }
  os << "\nmacro F1 (%):         " << pct(r.macro_f1) << "\n";
  os << "overall accuracy (%): " << pct(r.overall_accuracy) << "\n";
  if (r.fps) {
    std::snprintf(line, sizeof line, "speed (fps):          %.1f\n", *r.fps);
    os << line;
  }

  os << "\nconfusion (rows observed, columns predicted)\n      ";
  for (SceneClass p : kAllSceneClasses) os << "     " << to_char(p);
  os << "  total\n";
  for (SceneClass o : kAllSceneClasses) {
    os << "  " << to_char(o) << "   ";
    for (SceneClass p : kAllSceneClasses) {
      std::snprintf(line, sizeof line, "%6zu", r.confusion.at(o, p));
      os << line;
    }
    std::snprintf(line, sizeof line, "%7zu\n", r.confusion.row_sum(o));
    os << line;
  }
  os << "total ";
  for (SceneClass p : kAllSceneClasses) {
    std::snprintf(line, sizeof line, "%6zu", r.confusion.column_sum(p));
    os << line;
  }
  std::snprintf(line, sizeof line, "%7zu\n", r.confusion.total());
  os << line;

  if (r.object_counts) {
    os << "\nobject-level matching\n";
    for (ObjectLabel l : kAllObjectLabels) {
      const ClassCounts& c = (*r.object_counts)[index_of(l)];
      const PrecisionRecallF1 prf = precision_recall_f1(c);
      std::snprintf(line, sizeof line, "  %-22s tp %4zu fp %4zu fn %4zu  F1 %s\n",
                    std::string(to_string(l)).c_str(), c.tp, c.fp, c.fn,
                    prf.vacuous ? "-" : pct(prf.f1).c_str());
      os << line;
    }
  }
  return os.str();
}

}  // namespace bargewatch
