#include "bargewatch/events.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <stdexcept>

#include "bargewatch/errors.hpp"
#include "bargewatch/scene.hpp"

namespace bargewatch {

using nlohmann::json;
namespace chr = std::chrono;

// ---- time ------------------------------------------------------------------------

std::string format_date(Date d) {
  const chr::year_month_day ymd(d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(Timestamp t) {
  const Date d = date_of(t);
  const chr::hh_mm_ss<chr::milliseconds> hms(t - d);
  char buf[48];
  const auto ms = hms.subseconds().count();
  if (ms == 0) {
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(d).c_str(),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
  } else {
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d.%03dZ", format_date(d).c_str(),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()), static_cast<int>(ms));
  }
  return buf;
}

namespace {

int digits(std::string_view text, std::size_t pos, std::size_t n, std::string_view whole) {
  int v = 0;
  if (pos + n > text.size()) throw ParseError("malformed time '" + std::string(whole) + "'", 0);
  auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + n, v);
  if (ec != std::errc() || p != text.data() + pos + n) {
    throw ParseError("malformed time '" + std::string(whole) + "'", 0);
  }
  return v;
}

void expect(std::string_view text, std::size_t pos, char c, std::string_view whole) {
  if (pos >= text.size() || text[pos] != c) {
    throw ParseError("malformed time '" + std::string(whole) + "'", 0);
  }
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10) throw ParseError("malformed date '" + std::string(text) + "'", 0);
  const int y = digits(text, 0, 4, text);
  expect(text, 4, '-', text);
  const int m = digits(text, 5, 2, text);
  expect(text, 7, '-', text);
  const int d = digits(text, 8, 2, text);
  const chr::year_month_day ymd{chr::year(y), chr::month(static_cast<unsigned>(m)),
                                chr::day(static_cast<unsigned>(d))};
  if (!ymd.ok()) throw ParseError("invalid date '" + std::string(text) + "'", 0);
  return chr::sys_days(ymd);
}

Timestamp parse_timestamp(std::string_view text) {
  if (text.size() == 10) return Timestamp(parse_date(text));
  if (text.size() < 20) throw ParseError("malformed time '" + std::string(text) + "'", 0);
  const Date d = parse_date(text.substr(0, 10));
  expect(text, 10, 'T', text);
  const int hh = digits(text, 11, 2, text);
  expect(text, 13, ':', text);
  const int mm = digits(text, 14, 2, text);
  expect(text, 16, ':', text);
  const int ss = digits(text, 17, 2, text);
  if (hh > 23 || mm > 59 || ss > 59) throw ParseError("invalid time '" + std::string(text) + "'", 0);
  std::size_t pos = 19;
  int ms = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int scale = 100;
    const std::size_t first = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      ms += (text[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
    if (pos == first) throw ParseError("malformed time '" + std::string(text) + "'", 0);
  }
  if (pos + 1 != text.size() || text[pos] != 'Z') {
    throw ParseError("time '" + std::string(text) + "' must be UTC with a trailing Z", 0);
  }
  return Timestamp(d) + chr::hours(hh) + chr::minutes(mm) + chr::seconds(ss) + chr::milliseconds(ms);
}

// ---- observations and events ----------------------------------------------------------

double FrameObservation::peak_confidence() const {
  double best = 0.0;
  for (const Detection& d : detections) best = std::max(best, d.confidence);
  return best;
}

FrameObservation observe(std::string camera_id, Timestamp t, std::vector<Detection> detections,
                         std::string frame_ref) {
  FrameObservation o;
  o.camera_id = std::move(camera_id);
  o.timestamp = t;
  o.scene = classify_detections(detections);
  o.detections = std::move(detections);
  o.frame_ref = std::move(frame_ref);
  return o;
}

json event_to_json(const PassageEvent& e) {
  return {{"camera_id", e.camera_id},
          {"scene", std::string(1, to_char(e.scene))},
          {"start", format_timestamp(e.start)},
          {"end", format_timestamp(e.end)},
          {"frame_count", e.frame_count},
          {"peak_confidence", e.peak_confidence}};
}

PassageEvent event_from_json(const json& j) {
  try {
    PassageEvent e;
    e.camera_id = j.at("camera_id").get<std::string>();
    auto scene = parse_scene_class(j.at("scene").get<std::string>());
    if (!scene) throw SchemaError("event: bad scene " + j.at("scene").dump());
    e.scene = *scene;
    e.start = parse_timestamp(j.at("start").get<std::string>());
    e.end = parse_timestamp(j.at("end").get<std::string>());
    e.frame_count = j.at("frame_count").get<std::size_t>();
    e.peak_confidence = j.at("peak_confidence").get<double>();
    return e;
  } catch (const json::exception& ex) {
    throw SchemaError(std::string("event: ") + ex.what());
  } catch (const ParseError& ex) {
    throw SchemaError(std::string("event: ") + ex.what());
  }
}

void DebounceConfig::validate() const {
  if (min_consecutive < 1) throw ValidationError("min_consecutive: must be >= 1");
  if (gap_tolerance < 0) throw ValidationError("gap_tolerance: must be >= 0");
}

namespace {

struct ScanResult {
  std::vector<PassageEvent> events;
  std::size_t resume = 0;  // first index not yet decided
};

// Runs the rule over obs; without `final`, stops at a run still open at the
// end and reports where it started.
ScanResult scan(std::span<const FrameObservation> obs, const DebounceConfig& cfg, bool final) {
  ScanResult out;
  std::size_t i = 0;
  while (i < obs.size()) {
    const SceneClass c = obs[i].scene;
    if (c == SceneClass::A) {
      ++i;
      continue;
    }
    std::size_t last = i;
    std::size_t count = 1;
    double peak = obs[i].peak_confidence();
    int gap = 0;
    std::size_t j = i + 1;
    bool closed = false;
    for (; j < obs.size(); ++j) {
      if (obs[j].scene == c) {
        last = j;
        ++count;
        peak = std::max(peak, obs[j].peak_confidence());
        gap = 0;
      } else if (++gap > cfg.gap_tolerance) {
        closed = true;
        break;
      }
    }
    if (!closed && !final) {
      out.resume = i;
      return out;
    }
    if (count >= static_cast<std::size_t>(cfg.min_consecutive)) {
      out.events.push_back(
          {obs[i].camera_id, c, obs[i].timestamp, obs[last].timestamp, count, peak});
      i = last + 1;
    } else {
      ++i;
    }
  }
  out.resume = obs.size();
  return out;
}

}  // namespace

std::vector<PassageEvent> extract_events(std::span<const FrameObservation> observations,
                                         const DebounceConfig& config) {
  config.validate();
  for (std::size_t k = 1; k < observations.size(); ++k) {
    if (observations[k].timestamp < observations[k - 1].timestamp) {
      throw std::invalid_argument("observations are not sorted by timestamp");
    }
  }
  return scan(observations, config, true).events;
}

Debouncer::Debouncer(DebounceConfig config) : config_(config) { config_.validate(); }

std::vector<PassageEvent> Debouncer::push(FrameObservation observation) {
  if (last_ && observation.timestamp < *last_) {
    throw std::invalid_argument("observation is older than the previous one");
  }
  last_ = observation.timestamp;
  pending_.push_back(std::move(observation));
  ScanResult r = scan(pending_, config_, false);
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(r.resume));
  return std::move(r.events);
}

std::vector<PassageEvent> Debouncer::flush() {
  ScanResult r = scan(pending_, config_, true);
  pending_.clear();
  return std::move(r.events);
}

// ---- aggregation ---------------------------------------------------------------------

DailyAggregate aggregate_daily(std::span<const PassageEvent> events, Date date,
                               const std::string& camera_id) {
  DailyAggregate a;
  a.camera_id = camera_id;
  a.date = date;
  const Timestamp day_start(date);
  const Timestamp day_end(date + chr::days(1));
  for (const PassageEvent& e : events) {
    if (e.camera_id != camera_id || e.start >= day_end || e.end < day_start) continue;
    switch (e.scene) {
      case SceneClass::C:
      case SceneClass::D:
        ++a.with_barge_count;
        ++a.vessel_count;
        break;
      case SceneClass::B:
      case SceneClass::F:
        ++a.vessel_count;
        break;
      case SceneClass::E:
        ++a.barge_only_count;
        break;
      case SceneClass::A:
        break;
    }
  }
  if (a.vessel_count > 0) {
    a.pct_with_barges = static_cast<double>(a.with_barge_count) / static_cast<double>(a.vessel_count);
  }
  return a;
}

json aggregate_to_json(const DailyAggregate& a) {
  return {{"camera_id", a.camera_id},
          {"date", format_date(a.date)},
          {"vessel_count", a.vessel_count},
          {"with_barge_count", a.with_barge_count},
          {"barge_only_count", a.barge_only_count},
          {"pct_with_barges", a.pct_with_barges ? json(*a.pct_with_barges) : json()},
          {"pct_defined", a.pct_with_barges.has_value()}};
}

}  // namespace bargewatch
