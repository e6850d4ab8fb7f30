#pragma once

// Detection matching, precision/recall/F1, scene confusion matrices, slicing,
// the leave-one-location-out protocol and throughput.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bargewatch/dataset.hpp"
#include "bargewatch/geometry.hpp"
#include "bargewatch/labels.hpp"

namespace bargewatch {

struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  ClassCounts& operator+=(const ClassCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct PrecisionRecallF1 {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  // tp = fp = fn = 0: values are placeholders and the class is left out of
  // macro averages.
  bool vacuous = false;
};

/// p = tp/(tp+fp), r = tp/(tp+fn), f1 = 2pr/(p+r). A zero denominator with
/// other counts present yields 0 for that quantity; all-zero counts are
/// reported as 1.0 and flagged vacuous.
PrecisionRecallF1 precision_recall_f1(const ClassCounts& counts);

using LabelCounts = std::array<ClassCounts, kNumObjectLabels>;

/// Greedy one-to-one matching per label. Predictions are visited by
/// descending confidence and take the unmatched same-label ground truth with
/// the highest IoU >= iou_threshold (ties go to the lower ground-truth index).
LabelCounts match_detections(std::span<const GroundTruthBox> ground_truth,
                             std::span<const Detection> predictions, double iou_threshold);

class ConfusionMatrix {
 public:
  void add(SceneClass observed, SceneClass predicted, std::size_t count = 1) {
    cells_[index_of(observed)][index_of(predicted)] += count;
  }
  std::size_t at(SceneClass observed, SceneClass predicted) const {
    return cells_[index_of(observed)][index_of(predicted)];
  }
  std::size_t row_sum(SceneClass observed) const;
  std::size_t column_sum(SceneClass predicted) const;
  std::size_t diagonal_sum() const;
  std::size_t total() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::array<std::array<std::size_t, kNumSceneClasses>, kNumSceneClasses> cells_{};
};

using ScenePair = std::pair<SceneClass, SceneClass>;  // (observed, predicted)

ConfusionMatrix scene_confusion(std::span<const ScenePair> pairs);

struct ClassMetrics {
  SceneClass scene = SceneClass::A;
  ClassCounts counts;
  std::size_t observed = 0;   // row sum
  std::size_t predicted = 0;  // column sum
  PrecisionRecallF1 prf;
  std::optional<double> accuracy;  // tp / observed, undefined when observed == 0
  bool in_macro = false;
};

struct MetricsReport {
  std::string slice = "all";
  std::size_t samples = 0;
  ConfusionMatrix confusion;
  std::array<ClassMetrics, kNumSceneClasses> per_class{};
  std::optional<double> macro_f1;  // over classes with >= 1 observed sample
  std::optional<double> overall_accuracy;
  std::optional<double> fps;
  std::optional<LabelCounts> object_counts;  // set when box-level matching ran
};

MetricsReport metrics_from_confusion(const ConfusionMatrix& matrix);

/// Unweighted mean; nullopt for an empty span.
std::optional<double> macro_average(std::span<const double> values);

// ---- predictions and slicing -------------------------------------------------------

/// Per-image detections in normalized coordinates, keyed by image id. This is
/// also the stub detector's fixture format (see detector.hpp).
using PredictionSet = std::map<std::string, std::vector<Detection>>;

/// Scene-level pairs evaluated on records selected by `slicer`. Throws
/// EvaluationError naming every selected record without a prediction.
MetricsReport slice_eval(const DatasetManifest& manifest, const PredictionSet& predictions,
                         const RecordPredicate& slicer, const std::string& slice_name = "all",
                         std::optional<double> match_iou = std::nullopt);

/// Scene labels keyed by image id, e.g. from a pairs file.
using SceneLabels = std::map<std::string, SceneClass>;

/// Pairs observed/predicted scenes by id. Throws EvaluationError listing ids
/// present in `observed` but missing from `predicted`.
std::vector<ScenePair> pair_scenes(const SceneLabels& observed, const SceneLabels& predicted);

/// Reads "image_id observed [predicted]" lines ('#' starts a comment).
/// `column` 1 selects the observed scene, 2 the predicted one (falling back
/// to column 1 when a line has only one scene).
SceneLabels parse_scene_labels(std::string_view text, int column);

// ---- protocols -----------------------------------------------------------------------

struct TransferSplit {
  DatasetManifest train;
  DatasetManifest test;
  std::size_t dropped = 0;  // augmented records derived from holdout originals
};

/// Test = original records at `holdout_location`; train = every other record
/// except augmented copies of holdout originals. Throws std::invalid_argument
/// when the location has no records.
TransferSplit transferability_protocol(const DatasetManifest& manifest,
                                       const std::string& holdout_location);

/// Frames per second. Throws std::invalid_argument unless elapsed > 0.
double throughput(std::size_t frames, double elapsed_seconds);

// ---- reporting -----------------------------------------------------------------------

nlohmann::json report_to_json(const MetricsReport& report);

/// Fixed-width table: one row per scene class with P/R/F1/accuracy and
/// counts, followed by macro F1, overall accuracy and the confusion matrix.
std::string format_report_table(const MetricsReport& report);

}  // namespace bargewatch
