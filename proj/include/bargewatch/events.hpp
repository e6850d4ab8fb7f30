#pragma once

// Frame observations, debouncing into passage events, and daily traffic
// aggregates.

#include <chrono>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bargewatch/geometry.hpp"
#include "bargewatch/labels.hpp"

namespace bargewatch {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Date = std::chrono::sys_days;

/// "2024-06-01T08:00:05Z", with ".mmm" only when milliseconds are non-zero.
std::string format_timestamp(Timestamp t);
/// "YYYY-MM-DDTHH:MM:SS[.f...]Z" or a bare "YYYY-MM-DD" (midnight). Throws
/// ParseError.
Timestamp parse_timestamp(std::string_view text);
std::string format_date(Date d);
Date parse_date(std::string_view text);  // throws ParseError
inline Date date_of(Timestamp t) { return std::chrono::floor<std::chrono::days>(t); }

struct FrameObservation {
  std::string camera_id;
  Timestamp timestamp;
  SceneClass scene = SceneClass::A;
  std::vector<Detection> detections;
  std::string frame_ref;  // frame id or saved path

  double peak_confidence() const;
};

/// Builds an observation whose scene is classified from the detections.
FrameObservation observe(std::string camera_id, Timestamp t, std::vector<Detection> detections,
                         std::string frame_ref = {});

struct PassageEvent {
  std::string camera_id;
  SceneClass scene = SceneClass::D;
  Timestamp start;
  Timestamp end;
  std::size_t frame_count = 0;
  double peak_confidence = 0.0;

  friend bool operator==(const PassageEvent&, const PassageEvent&) = default;
};

nlohmann::json event_to_json(const PassageEvent& e);
PassageEvent event_from_json(const nlohmann::json& j);  // throws SchemaError

struct DebounceConfig {
  int min_consecutive = 2;
  int gap_tolerance = 1;

  void validate() const;  // throws ValidationError
};

/// Batch rule. A run opens at a non-A frame of class c. Later frames of class
/// c join it and reset the gap; any other frame adds to the gap, and a gap
/// longer than gap_tolerance (or the end of input) closes the run after its
/// last class-c frame. A closed run with at least min_consecutive class-c
/// frames becomes an event and scanning resumes after it; otherwise scanning
/// resumes at the frame after the run's first frame. Throws
/// std::invalid_argument when timestamps decrease.
std::vector<PassageEvent> extract_events(std::span<const FrameObservation> observations,
                                         const DebounceConfig& config);

/// Incremental form of extract_events for one camera: pushing observations
/// one at a time and then calling flush() yields exactly the batch events.
class Debouncer {
 public:
  explicit Debouncer(DebounceConfig config = {});

  /// Events that became final with this observation.
  std::vector<PassageEvent> push(FrameObservation observation);
  /// Closes any open run (end of stream).
  std::vector<PassageEvent> flush();

  std::size_t pending() const { return pending_.size(); }

 private:
  DebounceConfig config_;
  std::vector<FrameObservation> pending_;
  std::optional<Timestamp> last_;
};

struct DailyAggregate {
  std::string camera_id;
  Date date;
  std::size_t vessel_count = 0;      // scenes B, C, D, F
  std::size_t with_barge_count = 0;  // scenes C, D
  std::size_t barge_only_count = 0;  // scene E
  std::optional<double> pct_with_barges;  // undefined when vessel_count == 0
};

/// Counts this camera's events that intersect the UTC day `date`.
DailyAggregate aggregate_daily(std::span<const PassageEvent> events, Date date,
                               const std::string& camera_id);

nlohmann::json aggregate_to_json(const DailyAggregate& a);

}  // namespace bargewatch
