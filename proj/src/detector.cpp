#include "bargewatch/detector.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/dnn.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bargewatch/errors.hpp"

namespace bargewatch {

using nlohmann::json;

void DetectorConfig::validate() const {
  if (backend != "onnx" && backend != "stub") {
    throw ValidationError("backend: expected 'onnx' or 'stub', got '" + backend + "'");
  }
  if (std::find(std::begin(kAllowedInputSizes), std::end(kAllowedInputSizes), input_size) ==
      std::end(kAllowedInputSizes)) {
    throw ValidationError("input_size: " + std::to_string(input_size) +
                          " is not one of 320, 512, 640, 896, 1024, 1216");
  }
  if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0)) {
    throw ValidationError("confidence_threshold: must be in (0, 1)");
  }
  if (!(nms_iou_threshold > 0.0 && nms_iou_threshold < 1.0)) {
    throw ValidationError("nms_iou_threshold: must be in (0, 1)");
  }
}

DetectorConfig detector_config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("detector config must be an object");
  DetectorConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "backend") {
        c.backend = value.get<std::string>();
      } else if (key == "model_path") {
        c.model_path = value.get<std::string>();
      } else if (key == "fixture_path") {
        c.fixture_path = value.get<std::string>();
      } else if (key == "input_size") {
        c.input_size = value.get<int>();
      } else if (key == "confidence_threshold") {
        c.confidence_threshold = value.get<double>();
      } else if (key == "nms_iou_threshold") {
        c.nms_iou_threshold = value.get<double>();
      } else if (key == "label_map") {
        std::vector<ObjectLabel> labels;
        for (const auto& name : value) {
          auto l = parse_object_label(name.get<std::string>());
          if (!l) throw ValidationError("label_map: unknown label " + name.dump());
          labels.push_back(*l);
        }
        c.label_map = LabelMap(std::move(labels));
      } else {
        throw ValidationError("detector config: unknown field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("detector config: ") + e.what());
  }
  c.validate();
  return c;
}

json detector_config_to_json(const DetectorConfig& c) {
  json labels = json::array();
  for (ObjectLabel l : c.label_map.labels()) labels.push_back(std::string(to_string(l)));
  return {{"backend", c.backend},
          {"model_path", c.model_path.string()},
          {"fixture_path", c.fixture_path.string()},
          {"input_size", c.input_size},
          {"confidence_threshold", c.confidence_threshold},
          {"nms_iou_threshold", c.nms_iou_threshold},
          {"label_map", labels}};
}

// ---- letterbox ---------------------------------------------------------------------

LetterboxMapping letterbox(int width, int height, int target_size) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
  if (target_size <= 0) throw std::invalid_argument("target size must be positive");
  LetterboxMapping m;
  m.source_width = width;
  m.source_height = height;
  m.target_size = target_size;
  m.scale = static_cast<double>(target_size) / std::max(width, height);
  m.scaled_width = std::clamp(static_cast<int>(std::lround(width * m.scale)), 1, target_size);
  m.scaled_height = std::clamp(static_cast<int>(std::lround(height * m.scale)), 1, target_size);
  m.pad_x = (target_size - m.scaled_width) / 2;
  m.pad_y = (target_size - m.scaled_height) / 2;
  return m;
}

cv::Mat letterbox_image(const cv::Mat& bgr, const LetterboxMapping& m) {
  if (bgr.cols != m.source_width || bgr.rows != m.source_height) {
    throw std::invalid_argument("image does not match the letterbox mapping");
  }
  cv::Mat resized;
  if (m.scaled_width == bgr.cols && m.scaled_height == bgr.rows) {
    resized = bgr;
  } else {
    cv::resize(bgr, resized, cv::Size(m.scaled_width, m.scaled_height), 0, 0, cv::INTER_LINEAR);
  }
  cv::Mat out;
  cv::copyMakeBorder(resized, out, m.pad_y, m.target_size - m.scaled_height - m.pad_y, m.pad_x,
                     m.target_size - m.scaled_width - m.pad_x, cv::BORDER_CONSTANT,
                     cv::Scalar(114, 114, 114));
  return out;
}

// ---- decode ------------------------------------------------------------------------

std::vector<Detection> decode(std::span<const RawPrediction> raw, const LetterboxMapping& mapping,
                              const DetectorConfig& config, DecodeStats* stats) {
  DecodeStats local;
  DecodeStats& s = stats ? *stats : local;
  s = DecodeStats{};
  const CoordSpace space = CoordSpace::pixel(mapping.source_width, mapping.source_height);
  std::vector<Detection> candidates;
  for (const RawPrediction& p : raw) {
    ++s.candidates;
    if (p.scores.size() != config.label_map.size()) {
      throw DetectionError("candidate has " + std::to_string(p.scores.size()) +
                           " scores, label map has " + std::to_string(config.label_map.size()));
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.scores.size(); ++k) {
      if (p.scores[k] > p.scores[best]) best = k;
    }
    const double score = std::clamp(p.scores.empty() ? 0.0 : p.scores[best], 0.0, 1.0);
    if (!std::isfinite(score) || score < config.confidence_threshold) {
      ++s.below_threshold;
      continue;
    }
    const double x0 = mapping.to_source_x(p.cx - p.w / 2);
    const double y0 = mapping.to_source_y(p.cy - p.h / 2);
    const double x1 = mapping.to_source_x(p.cx + p.w / 2);
    const double y1 = mapping.to_source_y(p.cy + p.h / 2);
    auto box = std::isfinite(x0 + y0 + x1 + y1) ? clip_to_frame(x0, y0, x1, y1, space) : std::nullopt;
    if (!box) {
      ++s.outside_frame;
      continue;
    }
    candidates.emplace_back(*box, *config.label_map.label(static_cast<int>(best)), score);
  }
  std::vector<Detection> kept = nms(candidates, config.nms_iou_threshold);
  s.suppressed = candidates.size() - kept.size();
  return kept;
}

// ---- frames ------------------------------------------------------------------------

Frame make_frame(std::string id, cv::Mat image) {
  Frame f;
  f.id = std::move(id);
  f.width = image.cols;
  f.height = image.rows;
  f.image = std::move(image);
  return f;
}

Frame load_frame(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw IoError("cannot decode image " + path.string());
  return make_frame(path.stem().string(), std::move(img));
}

// ---- stub backend ------------------------------------------------------------------

StubBackend::StubBackend(PredictionSet fixture, bool strict)
    : fixture_(std::move(fixture)), strict_(strict) {}

StubBackend StubBackend::load(const std::filesystem::path& path, bool strict) {
  return StubBackend(load_prediction_fixture(path), strict);
}

std::vector<Detection> StubBackend::detect(const Frame& frame) {
  auto it = fixture_.find(frame.id);
  if (it == fixture_.end()) {
    if (strict_) throw DetectionError("stub fixture has no entry for '" + frame.id + "'");
    return {};
  }
  if (frame.width <= 0 || frame.height <= 0) return it->second;
  const CoordSpace space = CoordSpace::pixel(frame.width, frame.height);
  std::vector<Detection> out;
  out.reserve(it->second.size());
  for (const Detection& d : it->second) out.emplace_back(convert(d.box, space), d.label, d.confidence);
  return out;
}

std::string StubBackend::describe() const {
  return "stub (" + std::to_string(fixture_.size()) + " fixture frames)";
}

// ---- onnx backend ------------------------------------------------------------------

struct OnnxBackend::Net {
  cv::dnn::Net net;
};

OnnxBackend::OnnxBackend(DetectorConfig config) : config_(std::move(config)) {
  config_.validate();
  net_ = std::make_unique<Net>();
  try {
    net_->net = cv::dnn::readNetFromONNX(config_.model_path.string());
  } catch (const cv::Exception& e) {
    throw DetectionError("cannot load model " + config_.model_path.string() + ": " + e.what());
  }
  if (net_->net.empty()) throw DetectionError("cannot load model " + config_.model_path.string());
  net_->net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
  net_->net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);

  // Layout check: one blank input must produce 1 x (4 + K) x N.
  const int s = config_.input_size;
  cv::Mat blank(s, s, CV_8UC3, cv::Scalar(114, 114, 114));
  try {
    infer(blank);
  } catch (const DetectionError& e) {
    throw DetectionError("model " + config_.model_path.string() + " fails the layout check: " +
                         e.what());
  }
}

OnnxBackend::~OnnxBackend() = default;

std::vector<RawPrediction> OnnxBackend::infer(const cv::Mat& letterboxed) {
  const int s = config_.input_size;
  if (letterboxed.cols != s || letterboxed.rows != s) {
    throw std::invalid_argument("input must be letterboxed to the model size");
  }
  cv::Mat out;
  try {
    cv::Mat blob = cv::dnn::blobFromImage(letterboxed, 1.0 / 255.0, cv::Size(s, s), cv::Scalar(),
                                          /*swapRB=*/true, /*crop=*/false, CV_32F);
    net_->net.setInput(blob);
    out = net_->net.forward();
  } catch (const cv::Exception& e) {
    throw DetectionError(std::string("inference failed: ") + e.what());
  }
  const int k = static_cast<int>(config_.label_map.size());
  if (out.dims != 3 || out.size[0] != 1 || out.size[1] != 4 + k) {
    std::string shape;
    for (int i = 0; i < out.dims; ++i) shape += (i ? "x" : "") + std::to_string(out.size[i]);
    throw DetectionError("expected output 1x" + std::to_string(4 + k) + "xN, got " + shape);
  }
  if (out.type() != CV_32F) out.convertTo(out, CV_32F);
  const int n = out.size[2];
  const float* data = out.ptr<float>();
  std::vector<RawPrediction> raw(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    RawPrediction& r = raw[static_cast<std::size_t>(i)];
    r.cx = data[0 * n + i];
    r.cy = data[1 * n + i];
    r.w = data[2 * n + i];
    r.h = data[3 * n + i];
    r.scores.resize(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
      r.scores[static_cast<std::size_t>(c)] = std::clamp<double>(data[(4 + c) * n + i], 0.0, 1.0);
    }
  }
  return raw;
}

std::vector<Detection> OnnxBackend::detect(const Frame& frame) {
  if (frame.image.empty()) throw DetectionError("frame '" + frame.id + "' has no image data");
  cv::Mat bgr = frame.image;
  if (bgr.channels() == 1) cv::cvtColor(bgr, bgr, cv::COLOR_GRAY2BGR);
  if (bgr.channels() == 4) cv::cvtColor(bgr, bgr, cv::COLOR_BGRA2BGR);
  if (bgr.depth() != CV_8U) throw DetectionError("frame '" + frame.id + "' is not 8-bit");
  const LetterboxMapping m = letterbox(bgr.cols, bgr.rows, config_.input_size);
  const auto raw = infer(letterbox_image(bgr, m));
  return decode(raw, m, config_, &stats_);
}

std::string OnnxBackend::describe() const {
  return "onnx " + config_.model_path.string() + " @" + std::to_string(config_.input_size);
}

std::unique_ptr<DetectorBackend> make_backend(const DetectorConfig& config) {
  config.validate();
  if (config.backend == "stub") {
    if (config.fixture_path.empty()) throw ValidationError("fixture_path: required for stub backend");
    return std::make_unique<StubBackend>(StubBackend::load(config.fixture_path));
  }
  if (config.model_path.empty()) throw ValidationError("model_path: required for onnx backend");
  return std::make_unique<OnnxBackend>(config);
}

// ---- fixture files -----------------------------------------------------------------

PredictionSet parse_prediction_fixture(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("prediction fixture: ") + e.what(), 0);
  }
  if (!j.is_object()) throw SchemaError("prediction fixture must be an object keyed by image id");
  PredictionSet out;
  for (const auto& [id, list] : j.items()) {
    if (!list.is_array()) throw SchemaError("fixture entry '" + id + "' must be an array");
    std::vector<Detection> dets;
    for (const auto& d : list) {
      try {
        auto label = parse_object_label(d.at("label").get<std::string>());
        if (!label) throw SchemaError("fixture entry '" + id + "': unknown label " + d.at("label").dump());
        const auto& b = d.at("box");
        if (!b.is_array() || b.size() != 4) {
          throw SchemaError("fixture entry '" + id + "': box needs 4 numbers");
        }
        dets.emplace_back(Box::normalized(b[0].get<double>(), b[1].get<double>(),
                                          b[2].get<double>(), b[3].get<double>()),
                          *label, d.at("confidence").get<double>());
      } catch (const json::exception& e) {
        throw SchemaError("fixture entry '" + id + "': " + e.what());
      } catch (const std::invalid_argument& e) {
        throw ValidationError("fixture entry '" + id + "': " + e.what());
      }
    }
    out.emplace(id, std::move(dets));
  }
  return out;
}

PredictionSet load_prediction_fixture(const std::filesystem::path& path) {
  return parse_prediction_fixture(read_text_file(path));
}

std::string format_prediction_fixture(const PredictionSet& set) {
  json j = json::object();
  for (const auto& [id, dets] : set) {
    json list = json::array();
    for (const Detection& d : dets) {
      const Box b = convert(d.box, CoordSpace::normalized());
      list.push_back({{"label", std::string(to_string(d.label))},
                      {"box", {b.x_min(), b.y_min(), b.x_max(), b.y_max()}},
                      {"confidence", d.confidence}});
    }
    j[id] = list;
  }
  return j.dump(2) + "\n";
}

std::vector<Detection> normalized(std::span<const Detection> detections) {
  std::vector<Detection> out;
  out.reserve(detections.size());
  for (const Detection& d : detections) {
    out.emplace_back(convert(d.box, CoordSpace::normalized()), d.label, d.confidence);
  }
  return out;
}

}  // namespace bargewatch
