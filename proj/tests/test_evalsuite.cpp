#include <doctest.h>

#include <algorithm>
#include <random>

#include "bargewatch/errors.hpp"
#include "bargewatch/evalsuite.hpp"
#include "bargewatch/scene.hpp"
#include "manifest_fixtures.hpp"
#include "matching_scenes.hpp"
#include "oracles.hpp"
#include "paper_tables.hpp"

using namespace bargewatch;

namespace {

GroundTruthBox gt(ObjectLabel l, double x0, double y0, double x1, double y1) {
  return {l, Box::normalized(x0, y0, x1, y1)};
}

Detection pred(ObjectLabel l, double x0, double y0, double x1, double y1, double c) {
  return Detection(Box::normalized(x0, y0, x1, y1), l, c);
}

const ClassCounts& of(const LabelCounts& c, ObjectLabel l) { return c[index_of(l)]; }

// Manifest and predictions whose scene pairs reproduce `cells`.
std::pair<DatasetManifest, PredictionSet> build(const std::vector<tables::Cell>& cells,
                                                Weather weather, int& next_id) {
  DatasetManifest m;
  PredictionSet p;
  for (const auto& c : cells) {
    for (std::size_t i = 0; i < c.count; ++i) {
      const std::string id = "img" + std::to_string(next_id++);
      m.records.push_back(fixtures::make_record(id, "SLA", c.observed, weather));
      std::vector<Detection> dets;
      for (const auto& a : fixtures::annotations_for(c.predicted)) dets.emplace_back(a.box, a.label, 0.9);
      p[id] = dets;
    }
  }
  return {m, p};
}

}  // namespace

TEST_CASE("precision_recall_f1 examples") {
  auto d = precision_recall_f1({63, 3, 7});
  CHECK(d.precision == doctest::Approx(63.0 / 66.0));
  CHECK(d.recall == doctest::Approx(0.9));
  CHECK(d.f1 == doctest::Approx(126.0 / 136.0));
  CHECK(d.f1 == doctest::Approx(0.926).epsilon(5e-4));
  CHECK_FALSE(d.vacuous);

  auto e = precision_recall_f1({17, 3, 3});
  CHECK(e.precision == doctest::Approx(0.85));
  CHECK(e.recall == doctest::Approx(0.85));
  CHECK(e.f1 == doctest::Approx(0.85));
}

TEST_CASE("precision_recall_f1 zero denominators") {
  auto empty = precision_recall_f1({0, 0, 0});
  CHECK(empty.vacuous);
  CHECK(empty.precision == 1.0);
  CHECK(empty.recall == 1.0);

  auto no_preds = precision_recall_f1({0, 0, 4});
  CHECK_FALSE(no_preds.vacuous);
  CHECK(no_preds.precision == 0.0);
  CHECK(no_preds.recall == 0.0);
  CHECK(no_preds.f1 == 0.0);

  auto no_truth = precision_recall_f1({0, 2, 0});
  CHECK(no_truth.precision == 0.0);
  CHECK(no_truth.recall == 0.0);
  CHECK(no_truth.f1 == 0.0);
}

TEST_CASE("match_detections examples") {
  const std::vector<GroundTruthBox> g{gt(ObjectLabel::kBarge, 0.1, 0.1, 0.3, 0.3),
                                      gt(ObjectLabel::kVesselWithBarge, 0.5, 0.5, 0.9, 0.8)};
  std::vector<Detection> same;
  for (const auto& b : g) same.emplace_back(b.box, b.label, 1.0);
  auto c = match_detections(g, same, 0.5);
  CHECK(of(c, ObjectLabel::kBarge) == ClassCounts{1, 0, 0});
  CHECK(of(c, ObjectLabel::kVesselWithBarge) == ClassCounts{1, 0, 0});

  const std::vector<GroundTruthBox> one{gt(ObjectLabel::kBarge, 0.1, 0.1, 0.3, 0.3)};
  const std::vector<Detection> two{pred(ObjectLabel::kBarge, 0.1, 0.1, 0.3, 0.3, 0.9),
                                   pred(ObjectLabel::kBarge, 0.11, 0.1, 0.31, 0.3, 0.8)};
  CHECK(of(match_detections(one, two, 0.5), ObjectLabel::kBarge) == ClassCounts{1, 1, 0});

  const std::vector<Detection> wrong{pred(ObjectLabel::kVesselWithoutBarge, 0.1, 0.1, 0.3, 0.3, 0.9)};
  auto w = match_detections(one, wrong, 0.5);
  CHECK(of(w, ObjectLabel::kBarge) == ClassCounts{0, 0, 1});
  CHECK(of(w, ObjectLabel::kVesselWithoutBarge) == ClassCounts{0, 1, 0});
}

TEST_CASE("match_detections breaks equal-IoU ties by ground-truth index") {
  // The prediction straddles two ground truths with identical overlap.
  const std::vector<GroundTruthBox> g{gt(ObjectLabel::kBarge, 0.0, 0.0, 0.2, 0.2),
                                      gt(ObjectLabel::kBarge, 0.1, 0.0, 0.3, 0.2)};
  const std::vector<Detection> p{pred(ObjectLabel::kBarge, 0.05, 0.0, 0.25, 0.2, 0.9),
                                 pred(ObjectLabel::kBarge, 0.0, 0.0, 0.2, 0.2, 0.5)};
  // Taking g0 first would let the second prediction reuse nothing; the tie
  // rule picks g0, leaving g1 unmatched by the second (IoU 1/3 < 0.5).
  auto c = match_detections(g, p, 0.5);
  CHECK(of(c, ObjectLabel::kBarge) == ClassCounts{1, 1, 1});
}

TEST_CASE("greedy matching is not optimal when ground truths overlap") {
  // p0 (highest confidence) prefers g0, which is the only box p1 can match.
  const std::vector<GroundTruthBox> g{gt(ObjectLabel::kBarge, 0.0, 0.0, 0.4, 0.4),
                                      gt(ObjectLabel::kBarge, 0.1, 0.0, 0.5, 0.4)};
  const std::vector<Detection> p{pred(ObjectLabel::kBarge, 0.04, 0.0, 0.44, 0.4, 0.9),
                                 pred(ObjectLabel::kBarge, 0.0, 0.0, 0.3, 0.4, 0.8)};
  CHECK(iou(g[0].box, p[0].box) > iou(g[1].box, p[0].box));
  CHECK(iou(g[1].box, p[0].box) >= 0.5);
  CHECK(iou(g[0].box, p[1].box) >= 0.5);
  CHECK(iou(g[1].box, p[1].box) < 0.5);
  CHECK(of(match_detections(g, p, 0.5), ObjectLabel::kBarge).tp == 1);
  auto allowed = [&](std::size_t gi, std::size_t pi) { return iou(g[gi].box, p[pi].box) >= 0.5; };
  CHECK(oracle::max_matching(2, 2, allowed) == 2);
}

TEST_CASE("greedy matching equals exhaustive assignment on separated ground truth") {
  std::mt19937 gen(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = scenes::random_scene(gen);
    const auto c = match_detections(s.gt, s.pred, 0.5);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& k : c) {
      tp += k.tp;
      fp += k.fp;
      fn += k.fn;
    }
    auto allowed = [&](std::size_t g, std::size_t p) {
      return s.gt[g].label == s.pred[p].label && scenes::corner_iou(s.gt[g].box, s.pred[p].box) >= 0.5;
    };
    const std::size_t best = oracle::max_matching(s.gt.size(), s.pred.size(), allowed);
    CHECK(tp == best);
    CHECK(tp + fp == s.pred.size());
    CHECK(tp + fn == s.gt.size());
  }
}

TEST_CASE("scene_confusion") {
  const auto m = scene_confusion(tables::pairs_of(tables::kTable5));
  CHECK(m == tables::matrix_of(tables::kTable5));
  CHECK(m.total() == 116);
  const std::size_t diag[] = {13, 12, 1, 63, 17, 0};
  for (SceneClass k : kAllSceneClasses) CHECK(m.at(k, k) == diag[index_of(k)]);
  CHECK(m.at(SceneClass::D, SceneClass::E) == 3);
  CHECK(m.at(SceneClass::D, SceneClass::F) == 4);
  CHECK(m.at(SceneClass::E, SceneClass::D) == 3);
  CHECK(m.row_sum(SceneClass::F) == 0);
  CHECK(m.column_sum(SceneClass::D) == 66);

  CHECK(scene_confusion({}).total() == 0);
  const std::vector<ScenePair> perfect{{SceneClass::A, SceneClass::A}, {SceneClass::E, SceneClass::E}};
  const auto p = scene_confusion(perfect);
  CHECK(p.diagonal_sum() == p.total());
}

TEST_CASE("metrics_from_confusion reproduces the published per-class F1") {
  const auto r = metrics_from_confusion(tables::matrix_of(tables::kTable5));
  const double expected[] = {1.0, 1.0, 1.0, 126.0 / 136.0, 0.85};
  for (int k = 0; k < 5; ++k) {
    CHECK(r.per_class[k].prf.f1 == doctest::Approx(expected[k]).epsilon(1e-12));
    CHECK(r.per_class[k].in_macro);
  }
  CHECK(std::abs(100 * r.per_class[3].prf.f1 - 92.6) <= 0.05);
  CHECK_FALSE(r.per_class[5].in_macro);
  CHECK(r.per_class[5].counts == ClassCounts{0, 4, 0});
  REQUIRE(r.macro_f1);
  CHECK(*r.macro_f1 == doctest::Approx((3.0 + 126.0 / 136.0 + 0.85) / 5.0));
  CHECK(std::abs(100 * *r.macro_f1 - 95.5) <= 0.1);
  CHECK(*r.per_class[3].accuracy == doctest::Approx(0.90).epsilon(1e-15));
  CHECK(*r.per_class[4].accuracy == doctest::Approx(0.85).epsilon(1e-15));
  CHECK_FALSE(r.per_class[5].accuracy);
  // The table's corner cell reads 96%; its own diagonal gives 106/116.
  CHECK(*r.overall_accuracy == doctest::Approx(106.0 / 116.0));
}

TEST_CASE("metrics_from_confusion on trivial matrices") {
  ConfusionMatrix identity;
  for (SceneClass k : kAllSceneClasses) identity.add(k, k);
  const auto r = metrics_from_confusion(identity);
  for (const auto& cm : r.per_class) {
    CHECK(cm.prf.f1 == 1.0);
    CHECK(*cm.accuracy == 1.0);
  }
  CHECK(*r.macro_f1 == 1.0);

  const auto empty = metrics_from_confusion(ConfusionMatrix{});
  CHECK_FALSE(empty.macro_f1);
  CHECK_FALSE(empty.overall_accuracy);
}

TEST_CASE("metrics are invariant to pair order") {
  auto pairs = tables::pairs_of(tables::kTable5);
  const auto base = report_to_json(metrics_from_confusion(scene_confusion(pairs)));
  std::mt19937 gen(9);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(pairs.begin(), pairs.end(), gen);
    CHECK(report_to_json(metrics_from_confusion(scene_confusion(pairs))) == base);
  }
}

TEST_CASE("weather slices") {
  int next = 0;
  auto [rain_m, rain_p] = build(tables::kRainSlice, Weather::kRain, next);
  auto [fog_m, fog_p] = build(tables::kFogSlice, Weather::kFog, next);
  DatasetManifest all = rain_m;
  all.records.insert(all.records.end(), fog_m.records.begin(), fog_m.records.end());
  PredictionSet preds = rain_p;
  preds.insert(fog_p.begin(), fog_p.end());

  RecordFilter rain;
  rain.weather = Weather::kRain;
  const auto r = slice_eval(all, preds, rain, rain.describe());
  CHECK(r.samples == 74);
  CHECK(r.slice == "weather=rain");
  CHECK(100 * r.per_class[0].prf.f1 == doctest::Approx(88.9).epsilon(1e-3));
  CHECK(100 * r.per_class[3].prf.f1 == doctest::Approx(94.3).epsilon(1e-3));
  CHECK(100 * r.per_class[4].prf.f1 == doctest::Approx(80.0));
  CHECK(100 * *r.macro_f1 == doctest::Approx(90.8).epsilon(1e-3));

  RecordFilter fog;
  fog.weather = Weather::kFog;
  const auto f = slice_eval(all, preds, fog, fog.describe());
  CHECK(f.samples == 19);
  CHECK(100 * f.per_class[3].prf.f1 == doctest::Approx(77.8).epsilon(1e-3));
  CHECK(100 * f.per_class[4].prf.f1 == doctest::Approx(50.0));
  CHECK(100 * *f.macro_f1 == doctest::Approx(81.95).epsilon(1e-3));

  const double published_rain[] = {88.9, 100, 94.3, 80};
  CHECK(*macro_average(published_rain) == doctest::Approx(90.8).epsilon(1e-3));

  const auto everything = slice_eval(all, preds, [](const ImageRecord&) { return true; });
  CHECK(everything.samples == 93);
  ConfusionMatrix sum = tables::matrix_of(tables::kRainSlice);
  for (const auto& c : tables::kFogSlice) sum.add(c.observed, c.predicted, c.count);
  CHECK(everything.confusion == sum);
}

TEST_CASE("slice_eval reports missing predictions") {
  int next = 0;
  auto [m, p] = build(tables::kFogSlice, Weather::kFog, next);
  p.erase("img0");
  p.erase("img5");
  try {
    slice_eval(m, p, [](const ImageRecord&) { return true; });
    FAIL("expected an evaluation error");
  } catch (const EvaluationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("img0") != std::string::npos);
    CHECK(msg.find("img5") != std::string::npos);
  }
}

TEST_CASE("slice_eval with box matching") {
  int next = 0;
  auto [m, p] = build(tables::kFogSlice, Weather::kFog, next);
  const auto r = slice_eval(m, p, [](const ImageRecord&) { return true; }, "all", 0.5);
  REQUIRE(r.object_counts);
  std::size_t total_gt = 0;
  for (const auto& rec : m.records) total_gt += rec.annotations.size();
  std::size_t tp = 0, fn = 0;
  for (const auto& c : *r.object_counts) {
    tp += c.tp;
    fn += c.fn;
  }
  CHECK(tp + fn == total_gt);
}

TEST_CASE("scene label files") {
  const auto obs = parse_scene_labels("# comment\na D E\nb A\n\nc E E  # trailing\n", 1);
  const auto prd = parse_scene_labels("a D E\nb A\nc E e\n", 2);
  CHECK(obs.at("a") == SceneClass::D);
  CHECK(prd.at("a") == SceneClass::E);
  CHECK(prd.at("b") == SceneClass::A);
  CHECK(pair_scenes(obs, prd).size() == 3);
  CHECK_THROWS_AS(parse_scene_labels("a Q\n", 1), ParseError);
  CHECK_THROWS_AS(parse_scene_labels("a D\na E\n", 1), ParseError);
  CHECK_THROWS_AS(parse_scene_labels("a\n", 1), ParseError);
  CHECK_THROWS_AS(pair_scenes(obs, parse_scene_labels("a D\n", 1)), EvaluationError);

  const std::string text = read_text_file(std::string(BARGEWATCH_FIXTURES) + "/table5_pairs");
  const auto pairs = pair_scenes(parse_scene_labels(text, 1), parse_scene_labels(text, 2));
  CHECK(scene_confusion(pairs) == tables::matrix_of(tables::kTable5));
}

TEST_CASE("transferability protocol") {
  const auto m = fixtures::make_table1_manifest(440);
  const auto t = transferability_protocol(m, "CCB");
  CHECK(t.test.records.size() == 26);
  for (const auto& r : t.test.records) {
    CHECK(r.location == "CCB");
    CHECK(r.is_original());
  }
  for (const auto& r : t.train.records) CHECK(r.location != "CCB");
  CHECK(t.train.records.size() + t.test.records.size() + t.dropped == m.records.size());
  CHECK(t.train.records.size() >= 700);
  CHECK_THROWS_AS(transferability_protocol(m, "XYZ"), std::invalid_argument);
  CHECK_THROWS_AS(transferability_protocol(m, ""), std::invalid_argument);
}

TEST_CASE("throughput") {
  CHECK(throughput(116, 3.41) == doctest::Approx(34.0).epsilon(0.003));
  CHECK(throughput(0, 1.0) == 0.0);
  CHECK(throughput(100, 2.0) == 50.0);
  CHECK_THROWS_AS(throughput(5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(throughput(5, -1.0), std::invalid_argument);
}

TEST_CASE("report rendering") {
  auto r = metrics_from_confusion(tables::matrix_of(tables::kTable5));
  r.fps = 34.0;
  const auto j = report_to_json(r);
  CHECK(j["samples"] == 116);
  CHECK(j["classes"]["D"]["tp"] == 63);
  CHECK(j["classes"]["F"]["accuracy"].is_null());
  CHECK(j["macro_f1"].get<double>() == doctest::Approx(*r.macro_f1));
  const std::string table = format_report_table(r);
  CHECK(table.find("macro F1 (%):         95.5") != std::string::npos);
  CHECK(table.find("overall accuracy (%): 91.4") != std::string::npos);
}
