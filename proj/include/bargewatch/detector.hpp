#pragma once

// Detection backends (ONNX model and fixture stub), letterbox pre-processing
// and output decoding.
//
// ONNX model contract
//   input   one tensor, 1 x 3 x S x S, RGB, float32 in [0, 1], letterboxed
//           with gray (114) padding; S is DetectorConfig::input_size.
//   output  one tensor, 1 x (4 + K) x N: for each of N candidates the box
//           centre x, centre y, width, height in model-input pixels followed
//           by K per-label scores, K = label map size (label index order).
// The layout is checked at load by running one blank input through the
// network.
//
// Stub fixture (JSON object keyed by image id):
//   {"frame_0001": [{"label": "barge", "box": [x1, y1, x2, y2],
//                    "confidence": 0.9}], "frame_0002": []}
// Boxes are normalized corner coordinates.

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "bargewatch/dataset.hpp"
#include "bargewatch/evalsuite.hpp"
#include "bargewatch/geometry.hpp"

namespace bargewatch {

inline constexpr int kAllowedInputSizes[] = {320, 512, 640, 896, 1024, 1216};

struct DetectorConfig {
  std::string backend = "onnx";  // "onnx" or "stub"
  std::filesystem::path model_path;
  std::filesystem::path fixture_path;
  int input_size = 1216;
  double confidence_threshold = 0.25;
  double nms_iou_threshold = 0.7;
  LabelMap label_map;

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

DetectorConfig detector_config_from_json(const nlohmann::json& j);
nlohmann::json detector_config_to_json(const DetectorConfig& c);

class DetectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LetterboxMapping {
  double scale = 1.0;
  int pad_x = 0;  // leading pad; the trailing side gets any extra pixel
  int pad_y = 0;
  int source_width = 0;
  int source_height = 0;
  int scaled_width = 0;
  int scaled_height = 0;
  int target_size = 0;

  double to_source_x(double x) const { return (x - pad_x) / scale; }
  double to_source_y(double y) const { return (y - pad_y) / scale; }
  double to_model_x(double x) const { return x * scale + pad_x; }
  double to_model_y(double y) const { return y * scale + pad_y; }
};

/// Throws std::invalid_argument for non-positive dims or size.
LetterboxMapping letterbox(int width, int height, int target_size);

/// Resized and padded BGR image of size target x target.
cv::Mat letterbox_image(const cv::Mat& bgr, const LetterboxMapping& mapping);

struct RawPrediction {
  double cx = 0, cy = 0, w = 0, h = 0;  // model-input pixels
  std::vector<double> scores;           // label index order, in [0, 1]
};

struct DecodeStats {
  std::size_t candidates = 0;
  std::size_t below_threshold = 0;
  std::size_t outside_frame = 0;
  std::size_t suppressed = 0;
};

std::vector<Detection> decode(std::span<const RawPrediction> raw, const LetterboxMapping& mapping,
                              const DetectorConfig& config, DecodeStats* stats = nullptr);

/// A frame handed to a backend. `id` keys stub fixtures (file stem for
/// images on disk); `image` is BGR and may be empty for the stub.
struct Frame {
  std::string id;
  cv::Mat image;
  int width = 0;
  int height = 0;
};

/// Reads an image; id = file stem. Throws IoError when undecodable.
Frame load_frame(const std::filesystem::path& path);
Frame make_frame(std::string id, cv::Mat image);

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  /// Detections in source pixel coordinates of `frame`.
  virtual std::vector<Detection> detect(const Frame& frame) = 0;
  virtual std::string describe() const = 0;
};

class StubBackend final : public DetectorBackend {
 public:
  /// With `strict`, frames missing from the fixture raise DetectionError;
  /// otherwise they yield no detections.
  explicit StubBackend(PredictionSet fixture, bool strict = true);
  static StubBackend load(const std::filesystem::path& path, bool strict = true);

  std::vector<Detection> detect(const Frame& frame) override;
  std::string describe() const override;
  const PredictionSet& fixture() const { return fixture_; }

 private:
  PredictionSet fixture_;
  bool strict_;
};

class OnnxBackend final : public DetectorBackend {
 public:
  /// Loads and checks the model. Throws DetectionError on failure.
  explicit OnnxBackend(DetectorConfig config);
  ~OnnxBackend() override;

  std::vector<Detection> detect(const Frame& frame) override;
  std::string describe() const override;

  /// Raw candidates for a letterboxed frame, before decoding.
  std::vector<RawPrediction> infer(const cv::Mat& letterboxed_bgr);
  const DecodeStats& last_stats() const { return stats_; }

 private:
  struct Net;
  DetectorConfig config_;
  std::unique_ptr<Net> net_;
  DecodeStats stats_;
};

std::unique_ptr<DetectorBackend> make_backend(const DetectorConfig& config);

// ---- fixture files -------------------------------------------------------------------

PredictionSet parse_prediction_fixture(std::string_view text);
PredictionSet load_prediction_fixture(const std::filesystem::path& path);
std::string format_prediction_fixture(const PredictionSet& set);

/// Detections converted to normalized coordinates.
std::vector<Detection> normalized(std::span<const Detection> detections);

}  // namespace bargewatch
