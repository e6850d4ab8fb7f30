#include "bargewatch/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bargewatch/errors.hpp"
#include "bargewatch/rng.hpp"

namespace bargewatch {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct KindInfo {
  AugmentKind kind;
  std::string_view name;
  bool geometric;
  ParamRange allowed;
  bool lo_open;  // allowed.lo itself is excluded
  bool hi_open;
  ParamRange fallback;
};

constexpr double kPi = 3.14159265358979323846;

constexpr std::array<KindInfo, 13> kKinds{{
    {AugmentKind::kCrop, "crop", true, {0.0, 1.0}, true, false, {0.6, 0.9}},
    {AugmentKind::kGaussianBlur, "gaussian_blur", false, {0.0, 20.0}, true, false, {0.5, 2.0}},
    {AugmentKind::kHflip, "hflip", true, {0.0, 0.0}, false, false, {0.0, 0.0}},
    {AugmentKind::kScale, "scale", true, {0.0, 4.0}, true, false, {0.8, 1.2}},
    {AugmentKind::kRotate, "rotate", true, {-180.0, 180.0}, false, false, {-15.0, 15.0}},
    {AugmentKind::kShear, "shear", true, {-60.0, 60.0}, true, true, {-10.0, 10.0}},
    {AugmentKind::kSaturation, "saturation", false, {0.0, 4.0}, false, false, {0.6, 1.4}},
    {AugmentKind::kBrightness, "brightness", false, {-255.0, 255.0}, false, false, {-40.0, 40.0}},
    {AugmentKind::kExposure, "exposure", false, {-4.0, 4.0}, false, false, {-0.5, 0.5}},
    {AugmentKind::kCutout, "cutout", false, {0.0, 1.0}, true, true, {0.05, 0.2}},
    {AugmentKind::kNoise, "noise", false, {0.0, 128.0}, false, false, {2.0, 12.0}},
    {AugmentKind::kFog, "fog", false, {0.0, 1.0}, false, false, {0.4, 0.8}},
    {AugmentKind::kRain, "rain", false, {0.0, 1.0}, false, false, {0.3, 0.7}},
}};

const KindInfo& info(AugmentKind kind) { return kKinds[static_cast<std::size_t>(kind)]; }

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Converts a continuous-coordinate affine map to the pixel-index form that
// cv::warpAffine expects (pixel centres at index + 0.5).
cv::Matx23d to_index_coords(const cv::Matx23d& m) {
  cv::Matx23d out = m;
  out(0, 2) = m(0, 0) * 0.5 + m(0, 1) * 0.5 + m(0, 2) - 0.5;
  out(1, 2) = m(1, 0) * 0.5 + m(1, 1) * 0.5 + m(1, 2) - 0.5;
  return out;
}

AugmentOutput warp(const cv::Mat& image, const std::vector<GroundTruthBox>& boxes,
                   const cv::Matx23d& affine, const AugmentOptions& options) {
  AugmentOutput out;
  cv::warpAffine(image, out.image, to_index_coords(affine), image.size(), cv::INTER_LINEAR,
                 cv::BORDER_CONSTANT, cv::Scalar::all(114));
  for (const GroundTruthBox& gt : boxes) {
    auto b = transform_box(gt.box, affine, image.cols, image.rows, image.cols, image.rows,
                           options.min_visibility);
    if (b) {
      out.boxes.push_back({gt.label, *b});
    } else {
      ++out.dropped_boxes;
    }
  }
  return out;
}

// Fraction of `box` (normalized) covered by the pixel rectangle `r`.
double covered_fraction(const Box& box, const cv::Rect& r, int width, int height) {
  const double bx0 = box.x_min() * width, bx1 = box.x_max() * width;
  const double by0 = box.y_min() * height, by1 = box.y_max() * height;
  const double w = std::min(bx1, double(r.x + r.width)) - std::max(bx0, double(r.x));
  const double h = std::min(by1, double(r.y + r.height)) - std::max(by0, double(r.y));
  if (w <= 0 || h <= 0) return 0.0;
  return (w * h) / ((bx1 - bx0) * (by1 - by0));
}

cv::Mat gain(const cv::Mat& image, double factor, double offset = 0.0) {
  cv::Mat out;
  image.convertTo(out, -1, factor, offset);
  return out;
}

}  // namespace

std::string_view to_string(AugmentKind kind) { return info(kind).name; }

std::optional<AugmentKind> parse_augment_kind(std::string_view text) {
  for (const KindInfo& k : kKinds) {
    if (k.name == text) return k.kind;
  }
  return std::nullopt;
}

bool is_geometric(AugmentKind kind) { return info(kind).geometric; }

ParamRange default_range(AugmentKind kind) { return info(kind).fallback; }

AugmentSpec AugmentSpec::make(AugmentKind kind) {
  AugmentSpec s;
  s.kind = kind;
  s.range = default_range(kind);
  if (kind == AugmentKind::kFog) s.weather = Weather::kFog;
  if (kind == AugmentKind::kRain) s.weather = Weather::kRain;
  return s;
}

void AugmentSpec::validate() const {
  const KindInfo& k = info(kind);
  const std::string name(k.name);
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ValidationError(name + ": probability must be in [0, 1]");
  }
  if (kind == AugmentKind::kHflip) return;
  if (!std::isfinite(range.lo) || !std::isfinite(range.hi) || range.lo > range.hi) {
    throw ValidationError(name + ": range must be finite with lo <= hi");
  }
  for (double v : {range.lo, range.hi}) {
    const bool below = k.lo_open ? v <= k.allowed.lo : v < k.allowed.lo;
    const bool above = k.hi_open ? v >= k.allowed.hi : v > k.allowed.hi;
    if (below || above) {
      throw ValidationError(name + ": value " + format_value(v) + " outside " +
                            (k.lo_open ? "(" : "[") + format_value(k.allowed.lo) + ", " +
                            format_value(k.allowed.hi) + (k.hi_open ? ")" : "]"));
    }
  }
}

std::optional<Box> transform_box(const Box& nb, const cv::Matx23d& m, int src_width,
                                 int src_height, int dst_width, int dst_height,
                                 double min_visibility) {
  const double xs[2] = {nb.x_min() * src_width, nb.x_max() * src_width};
  const double ys[2] = {nb.y_min() * src_height, nb.y_max() * src_height};
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  for (double x : xs) {
    for (double y : ys) {
      const double tx = m(0, 0) * x + m(0, 1) * y + m(0, 2);
      const double ty = m(1, 0) * x + m(1, 1) * y + m(1, 2);
      x0 = std::min(x0, tx);
      x1 = std::max(x1, tx);
      y0 = std::min(y0, ty);
      y1 = std::max(y1, ty);
    }
  }
  const double full = (x1 - x0) * (y1 - y0);
  const double cx0 = std::max(x0, 0.0), cy0 = std::max(y0, 0.0);
  const double cx1 = std::min(x1, double(dst_width)), cy1 = std::min(y1, double(dst_height));
  if (!(cx1 > cx0 && cy1 > cy0) || !(full > 0)) return std::nullopt;
  if ((cx1 - cx0) * (cy1 - cy0) < min_visibility * full) return std::nullopt;
  return Box::normalized(cx0 / dst_width, cy0 / dst_height, cx1 / dst_width, cy1 / dst_height);
}

AugmentOutput apply_transform(AugmentKind kind, double v, const cv::Mat& image,
                              const std::vector<GroundTruthBox>& boxes, std::uint64_t seed,
                              const AugmentOptions& options) {
  if (image.empty() || image.type() != CV_8UC3) {
    throw std::invalid_argument("augmentations expect a non-empty 8-bit BGR image");
  }
  const int w = image.cols, h = image.rows;
  const double cx = w / 2.0, cy = h / 2.0;
  Rng rng(seed);
  AugmentOutput out;

  switch (kind) {
    case AugmentKind::kHflip: {
      cv::flip(image, out.image, 1);
      for (const GroundTruthBox& gt : boxes) {
        out.boxes.push_back({gt.label, Box::normalized(1.0 - gt.box.x_max(), gt.box.y_min(),
                                                       1.0 - gt.box.x_min(), gt.box.y_max())});
      }
      return out;
    }
    case AugmentKind::kCrop: {
      const int cw = std::clamp(static_cast<int>(std::lround(v * w)), 1, w);
      const int ch = std::clamp(static_cast<int>(std::lround(v * h)), 1, h);
      const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(w - cw + 1)));
      const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(h - ch + 1)));
      cv::resize(image(cv::Rect(ox, oy, cw, ch)), out.image, image.size(), 0, 0, cv::INTER_LINEAR);
      const double sx = double(w) / cw, sy = double(h) / ch;
      const cv::Matx23d m(sx, 0, -ox * sx, 0, sy, -oy * sy);
      for (const GroundTruthBox& gt : boxes) {
        auto b = transform_box(gt.box, m, w, h, w, h, options.min_visibility);
        if (b) {
          out.boxes.push_back({gt.label, *b});
        } else {
          ++out.dropped_boxes;
        }
      }
      return out;
    }
    case AugmentKind::kScale:
      return warp(image, boxes, cv::Matx23d(v, 0, cx - v * cx, 0, v, cy - v * cy), options);
    case AugmentKind::kRotate: {
      const double a = v * kPi / 180.0;
      const double c = std::cos(a), s = std::sin(a);
      // Same convention as cv::getRotationMatrix2D: positive turns
      // counter-clockwise on screen (y axis pointing down).
      return warp(image, boxes, cv::Matx23d(c, s, (1 - c) * cx - s * cy, -s, c, s * cx + (1 - c) * cy),
                  options);
    }
    case AugmentKind::kShear: {
      const double t = std::tan(v * kPi / 180.0);
      return warp(image, boxes, cv::Matx23d(1, t, -t * cy, 0, 1, 0), options);
    }
    case AugmentKind::kGaussianBlur:
      cv::GaussianBlur(image, out.image, cv::Size(0, 0), v);
      break;
    case AugmentKind::kSaturation: {
      cv::Mat hsv;
      cv::cvtColor(image, hsv, cv::COLOR_BGR2HSV);
      std::vector<cv::Mat> ch;
      cv::split(hsv, ch);
      ch[1].convertTo(ch[1], -1, v);
      cv::merge(ch, hsv);
      cv::cvtColor(hsv, out.image, cv::COLOR_HSV2BGR);
      break;
    }
    case AugmentKind::kBrightness:
      out.image = gain(image, 1.0, v);
      break;
    case AugmentKind::kExposure:
      out.image = gain(image, std::exp2(v));
      break;
    case AugmentKind::kCutout: {
      out.image = image.clone();
      const int side = std::clamp(static_cast<int>(std::lround(v * std::min(w, h))), 1, std::min(w, h));
      for (int attempt = 0; attempt < 50; ++attempt) {
        const cv::Rect r(static_cast<int>(rng.below(static_cast<std::uint64_t>(w - side + 1))),
                         static_cast<int>(rng.below(static_cast<std::uint64_t>(h - side + 1))), side,
                         side);
        const bool keeps_labels = std::all_of(boxes.begin(), boxes.end(), [&](const GroundTruthBox& gt) {
          return covered_fraction(gt.box, r, w, h) <= 0.5;
        });
        if (keeps_labels) {
          out.image(r).setTo(cv::Scalar::all(0));
          out.boxes = boxes;
          return out;
        }
      }
      out.skipped = true;
      break;
    }
    case AugmentKind::kNoise: {
      out.image.create(image.size(), image.type());
      const std::size_t n = image.total() * 3;
      cv::Mat src = image.isContinuous() ? image : image.clone();
      const unsigned char* in = src.ptr<unsigned char>();
      unsigned char* dst = out.image.ptr<unsigned char>();
      for (std::size_t i = 0; i < n; ++i) {
        const double x = in[i] + v * rng.normal();
        dst[i] = static_cast<unsigned char>(std::clamp(std::nearbyint(x), 0.0, 255.0));
      }
      break;
    }
    case AugmentKind::kFog: {
      cv::Mat blurred;
      cv::GaussianBlur(image, blurred, cv::Size(0, 0), 1.0 + 3.0 * v);
      // Pull toward a light haze: brightness lift plus contrast drop.
      out.image = gain(blurred, 1.0 - 0.5 * v, 0.5 * v * 230.0);
      break;
    }
    case AugmentKind::kRain: {
      out.image = image.clone();
      const auto streaks = static_cast<std::size_t>(std::lround(v * w * h / 500.0));
      for (std::size_t i = 0; i < streaks; ++i) {
        const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
        const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
        const int len = 8 + static_cast<int>(rng.below(12));
        cv::line(out.image, {x, y}, {x + len / 5, y + len}, cv::Scalar::all(200), 1, cv::LINE_8);
      }
      out.image = gain(out.image, 1.0 - 0.3 * v);
      break;
    }
  }
  if (!is_geometric(kind)) out.boxes = boxes;
  if (out.image.empty()) out.image = image.clone();
  return out;
}

AugmentOutput apply(const AugmentSpec& spec, const cv::Mat& image,
                    const std::vector<GroundTruthBox>& boxes, std::uint64_t seed,
                    const AugmentOptions& options) {
  spec.validate();
  Rng rng(seed);
  const double value = spec.kind == AugmentKind::kHflip ? 0.0 : rng.uniform(spec.range.lo, spec.range.hi);
  return apply_transform(spec.kind, value, image, boxes, mix_seed(seed, 1), options);
}

// ---- config -----------------------------------------------------------------------

void AugmentConfig::validate() const {
  if (per_image_count < 0) throw ValidationError("per_image_count: must be >= 0");
  if (!(options.min_visibility >= 0.0 && options.min_visibility <= 1.0)) {
    throw ValidationError("min_visibility: must be in [0, 1]");
  }
  for (const AugmentSpec& s : specs) s.validate();
}

AugmentConfig augment_config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("augment config must be an object");
  AugmentConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "per_image_count") {
        c.per_image_count = value.get<int>();
      } else if (key == "max_outputs") {
        if (!value.is_null()) c.max_outputs = value.get<std::size_t>();
      } else if (key == "min_visibility") {
        c.options.min_visibility = value.get<double>();
      } else if (key == "specs") {
        for (const json& s : value) {
          const std::string name = s.at("kind").get<std::string>();
          auto kind = parse_augment_kind(name);
          if (!kind) throw ValidationError("specs: unknown kind '" + name + "'");
          AugmentSpec spec = AugmentSpec::make(*kind);
          for (const auto& [skey, sval] : s.items()) {
            if (skey == "kind") continue;
            if (skey == "range") {
              if (!sval.is_array() || sval.size() != 2) {
                throw ValidationError(name + ": range must be [lo, hi]");
              }
              spec.range = {sval[0].get<double>(), sval[1].get<double>()};
            } else if (skey == "probability") {
              spec.probability = sval.get<double>();
            } else if (skey == "weather") {
              if (sval.is_null()) {
                spec.weather.reset();
              } else {
                auto w = parse_weather(sval.get<std::string>());
                if (!w) throw ValidationError(name + ": unknown weather " + sval.dump());
                spec.weather = w;
              }
            } else {
              throw ValidationError(name + ": unknown field '" + skey + "'");
            }
          }
          c.specs.push_back(spec);
        }
      } else {
        throw ValidationError("augment config: unknown field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("augment config: ") + e.what());
  }
  c.validate();
  return c;
}

AugmentConfig load_augment_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  return augment_config_from_json(j);
}

// ---- pipeline ---------------------------------------------------------------------

AugmentedImage augment_one(const AugmentConfig& config, const ImageRecord& parent,
                           const cv::Mat& image, int k) {
  AugmentedImage out;
  out.record = parent;
  out.record.id = parent.id + "_aug" + std::to_string(k);
  out.record.parent_id = parent.id;
  out.record.path = fs::path("images") / (out.record.id + ".png");
  out.record.label_path = fs::path("labels") / (out.record.id + ".txt");

  cv::Mat img = image;
  std::vector<GroundTruthBox> boxes = parent.annotations;
  const std::uint64_t base =
      mix_seed(mix_seed(config.seed, stable_hash(parent.id)), static_cast<std::uint64_t>(k));
  for (std::size_t i = 0; i < config.specs.size(); ++i) {
    const AugmentSpec& spec = config.specs[i];
    const std::uint64_t seed = mix_seed(base, i);
    Rng gate(seed);
    if (!gate.bernoulli(spec.probability)) continue;
    AugmentOutput r = apply(spec, img, boxes, mix_seed(seed, 2), config.options);
    if (r.skipped) continue;
    img = std::move(r.image);
    boxes = std::move(r.boxes);
    out.dropped_boxes += r.dropped_boxes;
    out.applied.emplace_back(to_string(spec.kind));
    if (spec.weather) out.record.weather = *spec.weather;
  }
  out.image = img.data == image.data ? image.clone() : img;
  out.record.annotations = std::move(boxes);
  return out;
}

AugmentRunReport run_augmentation(const DatasetManifest& manifest, const AugmentConfig& config,
                                  const fs::path& out_dir) {
  config.validate();
  manifest.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (!ec) fs::create_directories(out_dir / "labels", ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  std::vector<const ImageRecord*> originals;
  for (const ImageRecord& r : manifest.records) {
    if (r.is_original()) originals.push_back(&r);
  }
  std::sort(originals.begin(), originals.end(),
            [](const ImageRecord* a, const ImageRecord* b) { return a->id < b->id; });

  AugmentRunReport report;
  report.manifest.label_map = manifest.label_map;
  for (const ImageRecord& r : manifest.records) {
    ImageRecord copy = r;
    if (!copy.path.empty()) copy.path = fs::absolute(copy.path);
    if (copy.label_path) copy.label_path = fs::absolute(*copy.label_path);
    report.manifest.records.push_back(std::move(copy));
  }

  const std::size_t cap = config.max_outputs.value_or(SIZE_MAX);
  std::vector<cv::Mat> cache(originals.size());
  for (int k = 0; k < config.per_image_count && report.generated < cap; ++k) {
    for (std::size_t i = 0; i < originals.size() && report.generated < cap; ++i) {
      const ImageRecord& parent = *originals[i];
      std::string child_id = parent.id + "_aug" + std::to_string(k);
      if (manifest.find(child_id)) continue;  // already present from an earlier run
      if (cache[i].empty()) {
        cache[i] = cv::imread(parent.path.string(), cv::IMREAD_COLOR);
        if (cache[i].empty()) throw IoError("cannot read image " + parent.path.string());
      }
      AugmentedImage a = augment_one(config, parent, cache[i], k);
      const fs::path image_path = out_dir / a.record.path;
      if (!cv::imwrite(image_path.string(), a.image)) {
        throw IoError("cannot write " + image_path.string());
      }
      write_text_file(out_dir / *a.record.label_path,
                      format_label_file(a.record.annotations, manifest.label_map));
      report.dropped_boxes += a.dropped_boxes;
      ++report.generated;
      report.manifest.records.push_back(std::move(a.record));
    }
  }
  save_manifest(report.manifest, out_dir / "manifest.jsonl");
  return report;
}

}  // namespace bargewatch
