#include <doctest.h>

#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bargewatch/augment.hpp"
#include "bargewatch/errors.hpp"
#include "manifest_fixtures.hpp"
#include "temp_dir.hpp"

using namespace bargewatch;
namespace fs = std::filesystem;

namespace {

cv::Mat random_image(int w, int h, unsigned seed) {
  cv::Mat img(h, w, CV_8UC3);
  cv::RNG rng(seed);
  rng.fill(img, cv::RNG::UNIFORM, 0, 256);
  return img;
}

// Boxes on a 1/1024 grid, so 1 - x is exact in binary.
std::vector<GroundTruthBox> dyadic_boxes(std::mt19937& gen, int n) {
  std::uniform_int_distribution<int> c(0, 1024);
  std::uniform_int_distribution<int> l(0, 2);
  std::vector<GroundTruthBox> out;
  while (static_cast<int>(out.size()) < n) {
    int a = c(gen), b = c(gen), p = c(gen), q = c(gen);
    if (a == b || p == q) continue;
    out.push_back({static_cast<ObjectLabel>(l(gen)),
                   Box::normalized(std::min(a, b) / 1024.0, std::min(p, q) / 1024.0,
                                   std::max(a, b) / 1024.0, std::max(p, q) / 1024.0)});
  }
  return out;
}

std::vector<GroundTruthBox> random_boxes(std::mt19937& gen, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> l(0, 2);
  std::vector<GroundTruthBox> out;
  while (static_cast<int>(out.size()) < n) {
    double a = u(gen), b = u(gen), p = u(gen), q = u(gen);
    if (std::abs(a - b) < 1e-3 || std::abs(p - q) < 1e-3) continue;
    out.push_back({static_cast<ObjectLabel>(l(gen)),
                   Box::normalized(std::min(a, b), std::min(p, q), std::max(a, b), std::max(p, q))});
  }
  return out;
}

bool identical(const cv::Mat& a, const cv::Mat& b) {
  return a.size() == b.size() && a.type() == b.type() && cv::norm(a, b, cv::NORM_INF) == 0.0;
}

constexpr AugmentKind kPhotometric[] = {AugmentKind::kGaussianBlur, AugmentKind::kSaturation,
                                        AugmentKind::kBrightness,   AugmentKind::kExposure,
                                        AugmentKind::kCutout,       AugmentKind::kNoise,
                                        AugmentKind::kFog,          AugmentKind::kRain};
constexpr AugmentKind kGeometric[] = {AugmentKind::kCrop, AugmentKind::kHflip, AugmentKind::kScale,
                                      AugmentKind::kRotate, AugmentKind::kShear};

}  // namespace

TEST_CASE("hflip example") {
  const std::vector<GroundTruthBox> boxes{{ObjectLabel::kBarge, Box::normalized(0.2, 0.1, 0.4, 0.3)}};
  auto out = apply_transform(AugmentKind::kHflip, 0, random_image(40, 30, 1), boxes, 0);
  REQUIRE(out.boxes.size() == 1);
  CHECK(out.boxes[0].box.x_min() == doctest::Approx(0.6));
  CHECK(out.boxes[0].box.x_max() == doctest::Approx(0.8));
  CHECK(out.boxes[0].box.y_min() == 0.1);
  CHECK(out.boxes[0].box.y_max() == 0.3);
}

TEST_CASE("hflip is an involution") {
  std::mt19937 gen(8);
  for (int trial = 0; trial < 100; ++trial) {
    const cv::Mat img = random_image(17 + trial, 11 + trial % 13, trial);
    const auto boxes = dyadic_boxes(gen, 1 + trial % 5);
    auto once = apply_transform(AugmentKind::kHflip, 0, img, boxes, 0);
    auto twice = apply_transform(AugmentKind::kHflip, 0, once.image, once.boxes, 0);
    CHECK(identical(twice.image, img));
    CHECK(twice.boxes == boxes);

    // Off the dyadic grid 1 - (1 - x) can differ from x by rounding.
    const auto any = random_boxes(gen, 3);
    auto back = apply_transform(AugmentKind::kHflip, 0, once.image,
                                apply_transform(AugmentKind::kHflip, 0, img, any, 0).boxes, 0);
    for (std::size_t i = 0; i < any.size(); ++i) {
      CHECK(std::abs(back.boxes[i].box.x_min() - any[i].box.x_min()) <= 2e-16);
      CHECK(std::abs(back.boxes[i].box.x_max() - any[i].box.x_max()) <= 2e-16);
    }
  }
}

TEST_CASE("rotate 90 degrees") {
  const std::vector<GroundTruthBox> boxes{{ObjectLabel::kBarge, Box::normalized(0.2, 0.1, 0.4, 0.3)}};
  const cv::Mat img = random_image(100, 100, 3);
  auto out = apply_transform(AugmentKind::kRotate, 90, img, boxes, 0, {0.0});
  REQUIRE(out.boxes.size() == 1);
  const Box& b = out.boxes[0].box;
  CHECK(b.x_min() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(b.y_min() == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(b.x_max() == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(b.y_max() == doctest::Approx(0.8).epsilon(1e-12));

  // Pixels follow the same turn as cv::rotate.
  cv::Mat expected;
  cv::rotate(img, expected, cv::ROTATE_90_COUNTERCLOCKWISE);
  CHECK(cv::norm(out.image, expected, cv::NORM_INF) <= 1.0);
}

TEST_CASE("crop, scale and shear examples") {
  const std::vector<GroundTruthBox> boxes{{ObjectLabel::kBarge, Box::normalized(0.25, 0.25, 0.75, 0.75)}};
  const cv::Mat img = random_image(64, 64, 5);

  auto full = apply_transform(AugmentKind::kCrop, 1.0, img, boxes, 9);
  CHECK(identical(full.image, img));
  CHECK(full.boxes[0].box.x_min() == doctest::Approx(0.25));

  auto zoom = apply_transform(AugmentKind::kScale, 2.0, img, boxes, 0);
  REQUIRE(zoom.boxes.size() == 1);
  CHECK(zoom.boxes[0].box.x_min() == doctest::Approx(0.0));
  CHECK(zoom.boxes[0].box.x_max() == doctest::Approx(1.0));

  // A small box in a corner leaves the frame when zoomed in.
  const std::vector<GroundTruthBox> corner{{ObjectLabel::kBarge, Box::normalized(0.0, 0.0, 0.1, 0.1)}};
  auto lost = apply_transform(AugmentKind::kScale, 3.0, img, corner, 0);
  CHECK(lost.boxes.empty());
  CHECK(lost.dropped_boxes == 1);

  auto sheared = apply_transform(AugmentKind::kShear, 45.0, img, boxes, 0, {0.0});
  REQUIRE(sheared.boxes.size() == 1);
  // x' = x + (y - 32): corners at y 16 and 48 move by -16 and +16 px.
  CHECK(sheared.boxes[0].box.x_min() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(sheared.boxes[0].box.x_max() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("photometric transforms leave boxes untouched") {
  std::mt19937 gen(21);
  const cv::Mat img = random_image(80, 60, 7);
  for (AugmentKind kind : kPhotometric) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto boxes = random_boxes(gen, trial % 4);
      AugmentSpec spec = AugmentSpec::make(kind);
      auto out = apply(spec, img, boxes, static_cast<std::uint64_t>(trial));
      CHECK(out.boxes == boxes);
      CHECK(out.image.size() == img.size());
    }
  }
}

TEST_CASE("geometric outputs stay valid") {
  std::mt19937 gen(33);
  const cv::Mat img = random_image(96, 54, 9);
  const AugmentOptions opts{0.3};
  for (AugmentKind kind : kGeometric) {
    AugmentSpec spec = AugmentSpec::make(kind);
    if (kind == AugmentKind::kRotate) spec.range = {-180, 180};
    if (kind == AugmentKind::kScale) spec.range = {0.3, 3.0};
    if (kind == AugmentKind::kShear) spec.range = {-50, 50};
    if (kind == AugmentKind::kCrop) spec.range = {0.2, 1.0};
    for (int trial = 0; trial < 100; ++trial) {
      const auto boxes = random_boxes(gen, 5);
      auto out = apply(spec, img, boxes, static_cast<std::uint64_t>(trial), opts);
      CHECK(out.boxes.size() + out.dropped_boxes == boxes.size());
      for (const auto& b : out.boxes) {
        CHECK(b.box.space().is_normalized());
        CHECK(b.box.x_min() >= 0.0);
        CHECK(b.box.y_min() >= 0.0);
        CHECK(b.box.x_max() <= 1.0);
        CHECK(b.box.y_max() <= 1.0);
        CHECK(b.box.width() > 0.0);
        CHECK(b.box.height() > 0.0);
      }
    }
  }
}

TEST_CASE("transform_box visibility rule") {
  const Box b = Box::normalized(0.9, 0.4, 1.0, 0.6);
  // Shift right by 5 of 10 px of box width: half visible.
  const cv::Matx23d shift(1, 0, 5, 0, 1, 0);
  CHECK(transform_box(b, shift, 100, 100, 100, 100, 0.5).has_value());
  CHECK_FALSE(transform_box(b, shift, 100, 100, 100, 100, 0.51).has_value());
  CHECK_FALSE(transform_box(b, cv::Matx23d(1, 0, 20, 0, 1, 0), 100, 100, 100, 100, 0.0).has_value());
}

TEST_CASE("cutout never hides more than half of a box") {
  std::mt19937 gen(44);
  const cv::Mat white(60, 90, CV_8UC3, cv::Scalar::all(255));
  for (int trial = 0; trial < 200; ++trial) {
    const auto boxes = random_boxes(gen, 3);
    auto out = apply_transform(AugmentKind::kCutout, 0.3, white, boxes, static_cast<std::uint64_t>(trial));
    CHECK(out.boxes == boxes);
    cv::Mat erased = out.image == 0;
    cv::cvtColor(erased, erased, cv::COLOR_BGR2GRAY);
    for (const auto& gt : boxes) {
      const double bx0 = gt.box.x_min() * 90, bx1 = gt.box.x_max() * 90;
      const double by0 = gt.box.y_min() * 60, by1 = gt.box.y_max() * 60;
      // Count erased pixel cells weighted by their overlap with the box.
      double hidden = 0;
      for (int y = 0; y < 60; ++y) {
        for (int x = 0; x < 90; ++x) {
          if (!erased.at<unsigned char>(y, x)) continue;
          const double w = std::min(bx1, x + 1.0) - std::max(bx0, double(x));
          const double h = std::min(by1, y + 1.0) - std::max(by0, double(y));
          if (w > 0 && h > 0) hidden += w * h;
        }
      }
      CHECK(hidden <= 0.5 * (bx1 - bx0) * (by1 - by0) + 1e-9);
    }
  }
  // A box covering the whole frame cannot keep half of itself under a large cutout.
  const std::vector<GroundTruthBox> whole{{ObjectLabel::kBarge, Box::normalized(0.0, 0.0, 1.0, 1.0)}};
  auto skipped = apply_transform(AugmentKind::kCutout, 0.9, white, whole, 1);
  CHECK(skipped.skipped);
  CHECK(identical(skipped.image, white));
}

TEST_CASE("augmentation is deterministic for a seed") {
  std::mt19937 gen(2);
  const cv::Mat img = random_image(64, 48, 11);
  const auto boxes = random_boxes(gen, 4);
  for (AugmentKind kind : {AugmentKind::kCrop, AugmentKind::kRotate, AugmentKind::kNoise,
                           AugmentKind::kCutout, AugmentKind::kRain, AugmentKind::kFog}) {
    const AugmentSpec spec = AugmentSpec::make(kind);
    auto a = apply(spec, img, boxes, 77);
    auto b = apply(spec, img, boxes, 77);
    CHECK(identical(a.image, b.image));
    CHECK(a.boxes == b.boxes);
  }
  auto n1 = apply(AugmentSpec::make(AugmentKind::kNoise), img, boxes, 1);
  auto n2 = apply(AugmentSpec::make(AugmentKind::kNoise), img, boxes, 2);
  CHECK_FALSE(identical(n1.image, n2.image));
}

TEST_CASE("spec validation") {
  AugmentSpec blur = AugmentSpec::make(AugmentKind::kGaussianBlur);
  blur.range = {0.0, 1.0};
  CHECK_THROWS_AS(blur.validate(), ValidationError);
  AugmentSpec crop = AugmentSpec::make(AugmentKind::kCrop);
  crop.range = {0.5, 1.2};
  CHECK_THROWS_AS(crop.validate(), ValidationError);
  AugmentSpec rot = AugmentSpec::make(AugmentKind::kRotate);
  rot.range = {10, -10};
  CHECK_THROWS_AS(rot.validate(), ValidationError);
  rot.range = {-10, 10};
  rot.probability = 1.5;
  CHECK_THROWS_AS(rot.validate(), ValidationError);

  using nlohmann::json;
  CHECK_THROWS_AS(augment_config_from_json(json::parse(R"({"specs": [{"kind": "mosaic"}]})")),
                  ValidationError);
  CHECK_THROWS_AS(augment_config_from_json(json::parse(R"({"per_image_count": -1})")), ValidationError);
  CHECK_THROWS_AS(augment_config_from_json(json::parse(R"({"specs": [{"kind": "noise", "sigma": 3}]})")),
                  ValidationError);
  auto c = augment_config_from_json(json::parse(
      R"({"seed": 3, "per_image_count": 2, "specs": [{"kind": "fog"}, {"kind": "rain", "weather": null}]})"));
  CHECK(c.specs[0].weather == Weather::kFog);
  CHECK_FALSE(c.specs[1].weather);
  CHECK(c.specs[0].range.lo == default_range(AugmentKind::kFog).lo);
}

TEST_CASE("augmentation pipeline") {
  TempDir dir("augment");
  DatasetManifest m;
  for (int i = 0; i < 4; ++i) {
    auto r = fixtures::make_record("img" + std::to_string(i), "MRB",
                                   i % 2 ? SceneClass::D : SceneClass::B, Weather::kClear);
    r.path = dir / ("src/img" + std::to_string(i) + ".png");
    fs::create_directories(r.path.parent_path());
    cv::imwrite(r.path.string(), random_image(64, 40, i));
    m.records.push_back(r);
  }

  AugmentConfig none;
  none.per_image_count = 0;
  auto empty = run_augmentation(m, none, dir / "none");
  CHECK(empty.generated == 0);
  CHECK(empty.manifest.records.size() == m.records.size());

  AugmentConfig cfg;
  cfg.seed = 5;
  cfg.per_image_count = 2;
  cfg.max_outputs = 7;
  cfg.specs = {AugmentSpec::make(AugmentKind::kHflip), AugmentSpec::make(AugmentKind::kRotate),
               AugmentSpec::make(AugmentKind::kFog)};
  auto run = run_augmentation(m, cfg, dir / "out");
  CHECK(run.generated == 7);
  CHECK(run.manifest.records.size() == 11);

  const auto reloaded = load_manifest(dir / "out/manifest.jsonl");
  CHECK(reloaded.records.size() == 11);
  CHECK(reloaded.validate().empty());
  for (const auto& r : reloaded.records) {
    if (r.is_original()) continue;
    CHECK(r.weather == Weather::kFog);
    CHECK(r.location == "MRB");
    CHECK(fs::exists(r.path));
    const auto labels = parse_label_file(read_text_file(*r.label_path), reloaded.label_map);
    CHECK(labels.size() == r.annotations.size());
  }
  CHECK(reloaded.find("img3_aug1") == nullptr);
  CHECK(reloaded.find("img2_aug1") != nullptr);

  auto again = run_augmentation(m, cfg, dir / "again");
  for (const auto& r : run.manifest.records) {
    if (r.is_original()) continue;
    CHECK(read_text_file(dir / "out" / r.path) == read_text_file(dir / "again" / r.path));
    CHECK(read_text_file(dir / "out" / *r.label_path) == read_text_file(dir / "again" / *r.label_path));
  }
  CHECK(read_text_file(dir / "out/manifest.jsonl").size() > 0);
}

TEST_CASE("paper-scale augmentation count") {
  TempDir dir("augment_scale");
  DatasetManifest m = fixtures::make_table1_manifest(0);
  REQUIRE(m.records.size() == 331);
  const cv::Mat tiny = random_image(16, 12, 1);
  fs::create_directories(dir / "src");
  for (auto& r : m.records) {
    r.path = dir / ("src/" + r.id + ".png");
    cv::imwrite(r.path.string(), tiny);
  }
  AugmentConfig cfg;
  cfg.per_image_count = 2;
  cfg.max_outputs = 440;
  cfg.specs = {AugmentSpec::make(AugmentKind::kHflip), AugmentSpec::make(AugmentKind::kBrightness)};
  auto run = run_augmentation(m, cfg, dir / "out");
  CHECK(run.generated == 440);
  CHECK(run.manifest.records.size() == 771);
}
