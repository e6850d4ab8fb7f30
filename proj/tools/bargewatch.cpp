// bargewatch command-line entry point.
//
// Exit codes: 0 success, 1 usage/validation/config error, 2 runtime or I/O
// error. Diagnostics go to stderr; results go to stdout or --out.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>

#include "bargewatch/augment.hpp"
#include "bargewatch/bgsub.hpp"
#include "bargewatch/dataset.hpp"
#include "bargewatch/detector.hpp"
#include "bargewatch/errors.hpp"
#include "bargewatch/evalsuite.hpp"
#include "bargewatch/monitor.hpp"
#include "bargewatch/scene.hpp"
#include "bargewatch/server.hpp"

#ifndef BARGEWATCH_VERSION
#define BARGEWATCH_VERSION "0.0.0"
#endif

using namespace bargewatch;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2 };

// Input problems that are the caller's fault (exit 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string format = "table";
  std::string out;
  std::string config;
};

void add_format(CLI::App* cmd, Common& c) {
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"table", "json"}))
      ->capture_default_str();
}

json load_json(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// Writes to --out when given, else stdout.
void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    std::cout.flush();
    return;
  }
  write_text_file(out, text);
}

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  for (char& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
}

std::vector<fs::path> expand_images(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const std::string& in : inputs) {
    std::error_code ec;
    if (fs::is_directory(in, ec)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && is_image(e.path())) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      out.insert(out.end(), files.begin(), files.end());
    } else if (fs::exists(in, ec)) {
      out.emplace_back(in);
    } else {
      throw IoError("no such file or directory: " + in);
    }
  }
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

// ---- split ---------------------------------------------------------------------------

struct SplitArgs {
  Common common;
  std::string manifest;
  std::uint64_t seed = 0;
  double train = 0.70, validation = 0.15, test = 0.15;
};

int run_split(const SplitArgs& a, const CLI::App& cmd) {
  SplitRatios ratios{a.train, a.validation, a.test};
  std::uint64_t seed = a.seed;
  if (!a.common.config.empty()) {
    const json j = load_json(a.common.config);
    for (const auto& [key, value] : j.items()) {
      if (key == "seed") {
        if (!cmd.count("--seed")) seed = value.get<std::uint64_t>();
      } else if (key == "train") {
        if (!cmd.count("--train")) ratios.train = value.get<double>();
      } else if (key == "validation") {
        if (!cmd.count("--val")) ratios.validation = value.get<double>();
      } else if (key == "test") {
        if (!cmd.count("--test")) ratios.test = value.get<double>();
      } else {
        throw ValidationError("split config: unknown field '" + key + "'");
      }
    }
  }
  const DatasetManifest manifest = load_manifest(a.manifest);
  // Manifest warnings come back through split.warnings.
  const SplitAssignment split = stratified_group_split(manifest, ratios, seed);
  for (const std::string& w : split.warnings) std::cerr << "warning: " << w << '\n';
  const fs::path dir = a.common.out.empty() ? fs::path(a.manifest).parent_path() / "split" : fs::path(a.common.out);
  write_split(split, dir);

  if (a.common.format == "json") {
    json strata = json::array();
    for (const StratumReport& s : split.strata) {
      strata.push_back({{"key", s.key}, {"records", s.records}, {"originals", s.originals},
                        {"target", s.target}, {"assigned", s.assigned}, {"withheld", s.withheld}});
    }
    std::cout << json({{"directory", dir.string()}, {"seed", seed},
                       {"train", split.train.size()}, {"validation", split.validation.size()},
                       {"test", split.test.size()}, {"withheld", split.withheld.size()},
                       {"strata", strata}})
                     .dump(2)
              << '\n';
  } else {
    std::cout << "split written to " << dir.string() << " (seed " << seed << ")\n"
              << "train:      " << split.train.size() << '\n'
              << "validation: " << split.validation.size() << '\n'
              << "test:       " << split.test.size() << '\n'
              << "withheld:   " << split.withheld.size() << '\n';
  }
  return kOk;
}

// ---- augment -------------------------------------------------------------------------

struct AugmentArgs {
  Common common;
  std::string manifest;
  std::uint64_t seed = 0;
  int per_image = 1;
  std::size_t max_outputs = 0;
};

int run_augment(const AugmentArgs& a, const CLI::App& cmd) {
  if (a.common.out.empty()) throw UsageError("augment: --out is required");
  AugmentConfig config;
  if (!a.common.config.empty()) {
    config = augment_config_from_json(load_json(a.common.config));
  } else {
    for (int k = 0; k < static_cast<int>(AugmentKind::kRain) + 1; ++k) {
      config.specs.push_back(AugmentSpec::make(static_cast<AugmentKind>(k)));
    }
  }
  if (cmd.count("--seed")) config.seed = a.seed;
  if (cmd.count("--per-image")) config.per_image_count = a.per_image;
  if (cmd.count("--max-outputs")) config.max_outputs = a.max_outputs;
  config.validate();

  const DatasetManifest manifest = load_manifest(a.manifest);
  for (const std::string& w : manifest.validate()) std::cerr << "warning: " << w << '\n';
  const AugmentRunReport report = run_augmentation(manifest, config, a.common.out);
  const fs::path out_manifest = fs::path(a.common.out) / "manifest.jsonl";
  if (a.common.format == "json") {
    std::cout << json({{"manifest", out_manifest.string()}, {"records", report.manifest.records.size()},
                       {"generated", report.generated}, {"dropped_boxes", report.dropped_boxes},
                       {"seed", config.seed}})
                     .dump(2)
              << '\n';
  } else {
    std::cout << "generated " << report.generated << " augmented images ("
              << report.manifest.records.size() << " records in " << out_manifest.string() << ")\n"
              << "boxes dropped below visibility threshold: " << report.dropped_boxes << '\n';
  }
  return kOk;
}

// ---- detect / classify ---------------------------------------------------------------

struct DetectorArgs {
  std::string backend;
  std::string model;
  std::string fixture;
  int input_size = 0;
  double conf = 0;
  double iou = 0;
};

void add_detector_options(CLI::App* cmd, DetectorArgs& d) {
  cmd->add_option("--backend", d.backend, "Detector backend")->check(CLI::IsMember({"onnx", "stub"}));
  cmd->add_option("--model", d.model, "ONNX model path");
  cmd->add_option("--fixture", d.fixture, "Stub prediction fixture (JSON)");
  cmd->add_option("--input-size", d.input_size, "Model input size");
  cmd->add_option("--conf", d.conf, "Confidence threshold");
  cmd->add_option("--iou", d.iou, "NMS IoU threshold");
}

DetectorConfig detector_config(const DetectorArgs& d, const std::string& config_path, const CLI::App& cmd) {
  json j = config_path.empty() ? json::object() : load_json(config_path);
  if (j.contains("detector")) j = j["detector"];
  if (cmd.count("--backend")) j["backend"] = d.backend;
  if (cmd.count("--model")) j["model_path"] = d.model;
  if (cmd.count("--fixture")) j["fixture_path"] = d.fixture;
  if (cmd.count("--input-size")) j["input_size"] = d.input_size;
  if (cmd.count("--conf")) j["confidence_threshold"] = d.conf;
  if (cmd.count("--iou")) j["nms_iou_threshold"] = d.iou;
  if (!j.contains("backend") && j.contains("fixture_path") && !j.contains("model_path")) j["backend"] = "stub";
  return detector_config_from_json(j);
}

struct DetectArgs {
  Common common;
  DetectorArgs detector;
  std::vector<std::string> images;
};

PredictionSet detect_all(const DetectorConfig& config, const std::vector<std::string>& inputs,
                         std::size_t& failures) {
  auto backend = make_backend(config);
  PredictionSet out;
  for (const fs::path& p : expand_images(inputs)) {
    try {
      const Frame frame = load_frame(p);
      std::vector<Detection> dets = backend->detect(frame);
      out[frame.id] = normalized(dets);
    } catch (const DetectionError& e) {
      ++failures;
      std::cerr << "error: " << p.string() << ": " << e.what() << '\n';
    }
  }
  return out;
}

int run_detect(const DetectArgs& a, const CLI::App& cmd) {
  const DetectorConfig config = detector_config(a.detector, a.common.config, cmd);
  std::size_t failures = 0;
  const PredictionSet preds = detect_all(config, a.images, failures);
  if (a.common.format == "json") {
    emit(format_prediction_fixture(preds), a.common.out);
  } else {
    std::ostringstream s;
    for (const auto& [id, dets] : preds) {
      s << id << ": " << dets.size() << " detection(s), scene " << to_char(classify_detections(dets)) << '\n';
      for (const Detection& d : dets) {
        s << "  " << to_string(d.label) << ' ' << fixed(d.confidence, 3) << " [" << fixed(d.box.x_min(), 4) << ", "
          << fixed(d.box.y_min(), 4) << ", " << fixed(d.box.x_max(), 4) << ", " << fixed(d.box.y_max(), 4) << "]\n";
      }
    }
    emit(s.str(), a.common.out);
  }
  return failures ? kRuntime : kOk;
}

struct ClassifyArgs {
  Common common;
  DetectorArgs detector;
  std::string predictions;
  std::string manifest;
  std::vector<std::string> images;
};

int run_classify(const ClassifyArgs& a, const CLI::App& cmd) {
  SceneLabels scenes;
  std::size_t failures = 0;
  if (!a.predictions.empty()) {
    for (const auto& [id, dets] : load_prediction_fixture(a.predictions)) scenes[id] = classify_detections(dets);
  } else if (!a.manifest.empty()) {
    for (const ImageRecord& r : load_manifest(a.manifest).records) scenes[r.id] = ground_truth_scene(r);
  } else if (!a.images.empty()) {
    const PredictionSet preds = detect_all(detector_config(a.detector, a.common.config, cmd), a.images, failures);
    for (const auto& [id, dets] : preds) scenes[id] = classify_detections(dets);
  } else {
    throw UsageError("classify: one of --predictions, --manifest or --images is required");
  }
  if (a.common.format == "json") {
    json j = json::object();
    for (const auto& [id, s] : scenes) j[id] = std::string(1, to_char(s));
    emit(j.dump(2), a.common.out);
  } else {
    // Same layout as a scene label file, so it can feed evaluate --pred.
    std::ostringstream s;
    for (const auto& [id, sc] : scenes) s << id << ' ' << to_char(sc) << '\n';
    emit(s.str(), a.common.out);
  }
  return failures ? kRuntime : kOk;
}

// ---- evaluate ------------------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string gt;
  std::string pred;
  std::string manifest;
  std::string predictions;
  std::string slice;
  double match_iou = 0.5;
  std::string holdout;
  std::size_t frames = 0;
  double elapsed = 0;
};

int run_evaluate(const EvaluateArgs& a, const CLI::App& cmd) {
  if (!a.gt.empty() || !a.pred.empty()) {
    if (a.gt.empty() || a.pred.empty()) throw UsageError("evaluate: --gt and --pred go together");
    const SceneLabels observed = parse_scene_labels(read_text_file(a.gt), 1);
    const SceneLabels predicted = parse_scene_labels(read_text_file(a.pred), 2);
    const auto pairs = pair_scenes(observed, predicted);
    MetricsReport report = metrics_from_confusion(scene_confusion(pairs));
    if (cmd.count("--elapsed")) report.fps = throughput(report.samples, a.elapsed);
    emit(a.common.format == "json" ? report_to_json(report).dump(2) : format_report_table(report), a.common.out);
    return kOk;
  }
  if (!a.holdout.empty()) {
    if (a.manifest.empty()) throw UsageError("evaluate: --holdout needs --manifest");
    const TransferSplit t = transferability_protocol(load_manifest(a.manifest), a.holdout);
    const auto originals = [](const DatasetManifest& m) {
      return std::count_if(m.records.begin(), m.records.end(), [](const ImageRecord& r) { return r.is_original(); });
    };
    if (a.common.format == "json") {
      emit(json({{"holdout", a.holdout}, {"train", t.train.records.size()}, {"test", t.test.records.size()},
                 {"test_originals", originals(t.test)}, {"dropped", t.dropped}})
               .dump(2),
           a.common.out);
    } else {
      std::ostringstream s;
      s << "holdout location:  " << a.holdout << '\n'
        << "train records:     " << t.train.records.size() << '\n'
        << "test records:      " << t.test.records.size() << " (" << originals(t.test) << " originals)\n"
        << "dropped augmented: " << t.dropped << '\n';
      emit(s.str(), a.common.out);
    }
    return kOk;
  }
  if (!a.manifest.empty()) {
    if (a.predictions.empty()) throw UsageError("evaluate: --manifest needs --predictions or --holdout");
    const DatasetManifest manifest = load_manifest(a.manifest);
    const RecordFilter f = RecordFilter::parse(a.slice);
    std::optional<double> iou;
    if (cmd.count("--match-iou")) iou = a.match_iou;
    MetricsReport report = slice_eval(manifest, load_prediction_fixture(a.predictions), f,
                                      a.slice.empty() ? "all" : f.describe(), iou);
    if (cmd.count("--elapsed")) report.fps = throughput(report.samples, a.elapsed);
    emit(a.common.format == "json" ? report_to_json(report).dump(2) : format_report_table(report), a.common.out);
    return kOk;
  }
  if (cmd.count("--frames")) {
    if (!cmd.count("--elapsed")) throw UsageError("evaluate: --frames needs --elapsed");
    const double fps = throughput(a.frames, a.elapsed);
    emit(a.common.format == "json"
             ? json({{"frames", a.frames}, {"elapsed_seconds", a.elapsed}, {"fps", fps}}).dump(2)
             : std::to_string(a.frames) + " frames in " + fixed(a.elapsed, 3) + " s: " + fixed(fps, 1) + " fps",
         a.common.out);
    return kOk;
  }
  throw UsageError("evaluate: give --gt/--pred, --manifest with --predictions or --holdout, or --frames/--elapsed");
}

// ---- bgsub ---------------------------------------------------------------------------

struct BgsubArgs {
  Common common;
  std::string input;
  double alpha = 0.02;
  double tau = 25.0;
  std::string mode = "mask";
};

int run_bgsub(const BgsubArgs& a, const CLI::App& cmd) {
  BackgroundConfig config;
  if (!a.common.config.empty()) {
    const json j = load_json(a.common.config);
    for (const auto& [key, value] : j.items()) {
      if (key == "alpha") config.alpha = value.get<double>();
      else if (key == "tau") config.tau = value.get<double>();
      else throw ValidationError("bgsub config: unknown field '" + key + "'");
    }
  }
  if (cmd.count("--alpha")) config.alpha = a.alpha;
  if (cmd.count("--tau")) config.tau = a.tau;
  config.validate();

  std::vector<std::pair<std::string, cv::Mat>> frames;
  std::error_code ec;
  if (fs::is_directory(a.input, ec)) {
    for (const fs::path& p : expand_images({a.input})) {
      Frame f = load_frame(p);
      frames.emplace_back(f.id, f.image);
    }
  } else {
    cv::VideoCapture cap(a.input);
    if (!cap.isOpened()) throw IoError("cannot open " + a.input);
    const std::string stem = fs::path(a.input).stem().string();
    cv::Mat img;
    for (int i = 0; cap.read(img); ++i) {
      char suffix[16];
      std::snprintf(suffix, sizeof suffix, "_%05d", i);
      frames.emplace_back(stem + suffix, img.clone());
    }
  }
  if (frames.empty()) throw IoError("no frames in " + a.input);
  if (!a.common.out.empty()) fs::create_directories(a.common.out);

  BackgroundModel model(config);
  json rows = json::array();
  std::ostringstream table;
  table << "frame                     foreground %\n";
  for (const auto& [id, img] : frames) {
    model.update(img);
    const cv::Mat mask = model.foreground_mask(img);
    const double pct = 100.0 * cv::countNonZero(mask) / static_cast<double>(mask.total());
    if (!a.common.out.empty()) {
      const cv::Mat result = a.mode == "normalize" ? model.normalize(img) : mask;
      const fs::path path = fs::path(a.common.out) / (id + "_" + a.mode + ".png");
      if (!cv::imwrite(path.string(), result)) throw IoError("cannot write " + path.string());
    }
    rows.push_back({{"frame", id}, {"foreground_pct", pct}});
    std::string padded = id;
    if (padded.size() < 26) padded.resize(26, ' ');
    table << padded << fixed(pct, 2) << '\n';
  }
  if (a.common.format == "json") {
    std::cout << json({{"alpha", config.alpha}, {"tau", config.tau}, {"frames", rows}}).dump(2) << '\n';
  } else {
    std::cout << table.str();
  }
  return kOk;
}

// ---- monitor / serve -----------------------------------------------------------------

struct ServiceArgs {
  Common common;
  std::string bind;
  int port = 0;
  std::string log_dir;
  std::string token;
  bool once = false;
  bool no_serve = false;
};

MonitorConfig service_config(const ServiceArgs& a, const CLI::App& cmd) {
  if (a.common.config.empty()) throw UsageError("--config is required");
  MonitorConfig config = load_monitor_config(a.common.config);
  apply_env_overrides(config, [](const char* name) { return std::getenv(name); });
  if (cmd.count("--bind")) apply_bind(config.server, a.bind);
  if (cmd.count("--port")) config.server.port = a.port;
  if (cmd.count("--log-dir")) config.log_dir = a.log_dir;
  if (cmd.count("--token")) config.server.bearer_token = a.token;
  config.validate();
  return config;
}

// Blocks SIGINT/SIGTERM in every thread; the main thread collects them with
// sigwait.
sigset_t block_shutdown_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

void wait_for_shutdown(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
  std::cerr << "received signal " << sig << ", shutting down\n";
}

int run_monitor(const ServiceArgs& a, const CLI::App& cmd) {
  const MonitorConfig config = service_config(a, cmd);
  const sigset_t signals = block_shutdown_signals();
  Monitor monitor(config);
  std::unique_ptr<ApiServer> server;
  if (!a.once && !a.no_serve) {
    server = std::make_unique<ApiServer>(monitor.config(), monitor.log(), monitor.board());
    const int port = server->start();
    std::cerr << "serving on http://" << config.server.bind << ':' << port << '\n';
  }
  monitor.start();
  if (a.once) {
    monitor.wait();
  } else {
    wait_for_shutdown(signals);
    monitor.stop();
    monitor.wait();
  }
  if (server) server->stop();
  std::size_t events = 0, errors = 0;
  for (const auto& s : monitor.board().all()) {
    events += s->events_written;
    errors += s->frame_errors;
    std::cerr << s->id << ": " << to_string(s->state) << ", " << s->frames_processed << " frames, "
              << s->events_written << " events, " << s->frame_errors << " frame errors\n";
  }
  if (monitor.log().pending() > 0) {
    std::cerr << "error: " << monitor.log().pending() << " event(s) could not be written\n";
    return kRuntime;
  }
  (void)events;
  (void)errors;
  return kOk;
}

int run_serve(const ServiceArgs& a, const CLI::App& cmd) {
  const MonitorConfig config = service_config(a, cmd);
  const sigset_t signals = block_shutdown_signals();
  EventLog log(config.log_dir);
  StatusBoard board;
  ApiServer server(config, log, board);
  const int port = server.start();
  std::cerr << "serving " << config.log_dir.string() << " on http://" << config.server.bind << ':' << port << '\n';
  wait_for_shutdown(signals);
  server.stop();
  return kOk;
}

void add_service_options(CLI::App* cmd, ServiceArgs& s) {
  cmd->add_option("--config", s.common.config, "Monitor config file (JSON)")->required();
  cmd->add_option("--bind", s.bind, "Bind address, host or host:port");
  cmd->add_option("--port", s.port, "Port (0 picks a free one)");
  cmd->add_option("--log-dir", s.log_dir, "Event log directory");
  cmd->add_option("--token", s.token, "Require this bearer token");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bargewatch: barge traffic detection, evaluation and monitoring"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "70:15:15 stratified split with an original-only test set");
  split_cmd->add_option("--manifest", split.manifest, "Dataset manifest (NDJSON)")->required();
  split_cmd->add_option("--seed", split.seed, "Shuffle seed")->capture_default_str();
  split_cmd->add_option("--train", split.train, "Train fraction")->capture_default_str();
  split_cmd->add_option("--val", split.validation, "Validation fraction")->capture_default_str();
  split_cmd->add_option("--test", split.test, "Test fraction")->capture_default_str();
  split_cmd->add_option("--out", split.common.out, "Directory for train.txt/val.txt/test.txt");
  split_cmd->add_option("--config", split.common.config, "JSON with seed/train/validation/test");
  add_format(split_cmd, split.common);

  AugmentArgs augment;
  auto* aug_cmd = app.add_subcommand("augment", "Box-aware augmentation of a manifest");
  aug_cmd->add_option("--manifest", augment.manifest, "Dataset manifest (NDJSON)")->required();
  aug_cmd->add_option("--config", augment.common.config, "Augmentation config (JSON)");
  aug_cmd->add_option("--out", augment.common.out, "Output directory")->required();
  aug_cmd->add_option("--seed", augment.seed, "Seed (overrides config)");
  aug_cmd->add_option("--per-image", augment.per_image, "Augmented copies per original");
  aug_cmd->add_option("--max-outputs", augment.max_outputs, "Cap on generated images");
  add_format(aug_cmd, augment.common);

  DetectArgs detect;
  auto* det_cmd = app.add_subcommand("detect", "Run the detector on images");
  det_cmd->add_option("images", detect.images, "Image files or directories")->required();
  det_cmd->add_option("--config", detect.common.config, "Detector config (JSON)");
  det_cmd->add_option("--out", detect.common.out, "Write results here");
  add_detector_options(det_cmd, detect.detector);
  add_format(det_cmd, detect.common);

  ClassifyArgs classify;
  auto* cls_cmd = app.add_subcommand("classify", "Scene class (A-F) per image");
  auto* cls_pred = cls_cmd->add_option("--predictions", classify.predictions, "Prediction fixture (JSON)");
  auto* cls_man = cls_cmd->add_option("--manifest", classify.manifest, "Ground-truth scenes of a manifest");
  auto* cls_img = cls_cmd->add_option("--images", classify.images, "Detect then classify these images");
  cls_pred->excludes(cls_man)->excludes(cls_img);
  cls_man->excludes(cls_img);
  cls_cmd->add_option("--config", classify.common.config, "Detector config (JSON)");
  cls_cmd->add_option("--out", classify.common.out, "Write results here");
  add_detector_options(cls_cmd, classify.detector);
  add_format(cls_cmd, classify.common);

  EvaluateArgs evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "Scene metrics, slices, transferability, throughput");
  auto* e_gt = eval_cmd->add_option("--gt", evaluate.gt, "Observed scene labels (id observed [predicted])");
  auto* e_pred = eval_cmd->add_option("--pred", evaluate.pred, "Predicted scene labels");
  auto* e_man = eval_cmd->add_option("--manifest", evaluate.manifest, "Dataset manifest");
  eval_cmd->add_option("--predictions", evaluate.predictions, "Prediction fixture (JSON)");
  eval_cmd->add_option("--slice", evaluate.slice, "Filter, e.g. weather=rain,origin=original");
  eval_cmd->add_option("--match-iou", evaluate.match_iou, "Also match boxes at this IoU");
  auto* e_hold = eval_cmd->add_option("--holdout", evaluate.holdout, "Leave this location out");
  eval_cmd->add_option("--frames", evaluate.frames, "Frame count for throughput");
  eval_cmd->add_option("--elapsed", evaluate.elapsed, "Elapsed seconds for throughput");
  eval_cmd->add_option("--out", evaluate.common.out, "Write the report here");
  e_gt->excludes(e_man);
  e_pred->excludes(e_man);
  e_gt->excludes(e_hold);
  add_format(eval_cmd, evaluate.common);

  BgsubArgs bgsub;
  auto* bg_cmd = app.add_subcommand("bgsub", "Running-average background subtraction");
  bg_cmd->add_option("--input", bgsub.input, "Image directory or video file")->required();
  bg_cmd->add_option("--out", bgsub.common.out, "Directory for masks");
  bg_cmd->add_option("--config", bgsub.common.config, "JSON with alpha/tau");
  bg_cmd->add_option("--alpha", bgsub.alpha, "Learning rate")->capture_default_str();
  bg_cmd->add_option("--tau", bgsub.tau, "Foreground threshold (8-bit)")->capture_default_str();
  bg_cmd->add_option("--mode", bgsub.mode, "What to write")->check(CLI::IsMember({"mask", "normalize"}))
      ->capture_default_str();
  add_format(bg_cmd, bgsub.common);

  ServiceArgs monitor;
  auto* mon_cmd = app.add_subcommand("monitor", "Run camera pipelines and serve the API");
  add_service_options(mon_cmd, monitor);
  auto* once = mon_cmd->add_flag("--once", monitor.once, "Process finite sources to the end, then exit");
  mon_cmd->add_flag("--no-serve", monitor.no_serve, "Do not start the HTTP server")->excludes(once);

  ServiceArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the event log API only");
  add_service_options(serve_cmd, serve);

  auto* version_cmd = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0 && dynamic_cast<const CLI::CallForHelp*>(&e) == nullptr) {
      std::cerr << '\n' << app.help();
    }
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*split_cmd) return run_split(split, *split_cmd);
    if (*aug_cmd) return run_augment(augment, *aug_cmd);
    if (*det_cmd) return run_detect(detect, *det_cmd);
    if (*cls_cmd) return run_classify(classify, *cls_cmd);
    if (*eval_cmd) return run_evaluate(evaluate, *eval_cmd);
    if (*bg_cmd) return run_bgsub(bgsub, *bg_cmd);
    if (*mon_cmd) return run_monitor(monitor, *mon_cmd);
    if (*serve_cmd) return run_serve(serve, *serve_cmd);
    if (*version_cmd) {
      std::cout << "bargewatch " << BARGEWATCH_VERSION << '\n';
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
