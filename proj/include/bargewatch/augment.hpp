#pragma once

// Label-preserving augmentations: pixels and boxes transform together.
//
// Parameter of each kind (sampled uniformly from the spec's range):
//   crop           side fraction of the kept window, (0, 1]; resized back
//   gaussian_blur  sigma in pixels, > 0
//   hflip          none
//   scale          zoom factor about the centre, (0, 4]
//   rotate         degrees, counter-clockwise as displayed, [-180, 180]
//   shear          horizontal shear angle in degrees, (-60, 60)
//   saturation     HSV saturation factor, [0, 4]
//   brightness     additive offset on the 8-bit scale, [-255, 255]
//   exposure       exposure change in stops (gain 2^ev), [-4, 4]
//   cutout         square side as a fraction of the shorter image side, (0, 1)
//   noise          gaussian sigma on the 8-bit scale, [0, 128]
//   fog            strength, [0, 1]: blur + brightness lift + contrast drop
//   rain           strength, [0, 1]: streak overlay + exposure drop
//
// Config file (JSON):
//   {"seed": 7, "per_image_count": 2, "max_outputs": 440, "min_visibility": 0.3,
//    "specs": [{"kind": "hflip", "probability": 0.5},
//              {"kind": "rotate", "range": [-15, 15]},
//              {"kind": "fog", "range": [0.4, 0.8], "probability": 0.1}]}
// A spec without "range" uses the kind's default range. fog and rain set the
// output record's weather unless the spec gives "weather" explicitly.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "bargewatch/dataset.hpp"

namespace bargewatch {

enum class AugmentKind : std::uint8_t {
  kCrop,
  kGaussianBlur,
  kHflip,
  kScale,
  kRotate,
  kShear,
  kSaturation,
  kBrightness,
  kExposure,
  kCutout,
  kNoise,
  kFog,
  kRain,
};

std::string_view to_string(AugmentKind kind);
std::optional<AugmentKind> parse_augment_kind(std::string_view text);
bool is_geometric(AugmentKind kind);

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Default sampling range for a kind.
ParamRange default_range(AugmentKind kind);

struct AugmentSpec {
  AugmentKind kind = AugmentKind::kHflip;
  ParamRange range;
  double probability = 1.0;
  std::optional<Weather> weather;  // set on the output record when applied

  static AugmentSpec make(AugmentKind kind);  // default range and weather
  void validate() const;                      // throws ValidationError
};

struct AugmentOptions {
  double min_visibility = 0.3;  // fraction of a transformed box that must stay in frame
};

struct AugmentOutput {
  cv::Mat image;
  std::vector<GroundTruthBox> boxes;
  std::size_t dropped_boxes = 0;
  bool skipped = false;  // cutout found no placement that keeps every box
};

/// Applies one transform with an explicit parameter. `seed` drives the
/// random placement of crop windows, cutouts, noise and rain streaks.
AugmentOutput apply_transform(AugmentKind kind, double value, const cv::Mat& image,
                              const std::vector<GroundTruthBox>& boxes, std::uint64_t seed,
                              const AugmentOptions& options = {});

/// Samples the parameter from the spec's range and applies it (ignores the
/// spec's probability).
AugmentOutput apply(const AugmentSpec& spec, const cv::Mat& image,
                    const std::vector<GroundTruthBox>& boxes, std::uint64_t seed,
                    const AugmentOptions& options = {});

/// Box mapping of an affine map given in continuous pixel coordinates (pixel
/// i covers [i, i + 1)): envelope of the four transformed corners, clipped to
/// the output frame, dropped below min_visibility.
std::optional<Box> transform_box(const Box& normalized_box, const cv::Matx23d& affine,
                                 int src_width, int src_height, int dst_width, int dst_height,
                                 double min_visibility);

struct AugmentConfig {
  std::uint64_t seed = 0;
  int per_image_count = 1;
  std::optional<std::size_t> max_outputs;
  AugmentOptions options;
  std::vector<AugmentSpec> specs;

  void validate() const;
};

AugmentConfig augment_config_from_json(const nlohmann::json& j);
AugmentConfig load_augment_config(const std::filesystem::path& path);

struct AugmentedImage {
  ImageRecord record;
  cv::Mat image;
  std::vector<std::string> applied;  // "kind=value" per applied spec
  std::size_t dropped_boxes = 0;
};

/// Copy `k` of one original. Each spec fires with its probability, in order,
/// under the seed mix(config.seed, image id, k, spec index).
AugmentedImage augment_one(const AugmentConfig& config, const ImageRecord& parent,
                           const cv::Mat& image, int k);

struct AugmentRunReport {
  DatasetManifest manifest;  // originals followed by the new records
  std::size_t generated = 0;
  std::size_t dropped_boxes = 0;
};

/// Augments every original in `manifest` (sorted by id; copy k for all
/// originals before copy k + 1, stopping at max_outputs). Writes
/// images/<id>.png, labels/<id>.txt and manifest.jsonl under `out_dir`.
/// Throws IoError when images cannot be read or outputs written.
AugmentRunReport run_augmentation(const DatasetManifest& manifest, const AugmentConfig& config,
                                  const std::filesystem::path& out_dir);

}  // namespace bargewatch
