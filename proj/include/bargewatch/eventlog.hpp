#pragma once

// Append-only event log: one NDJSON file per camera per UTC day,
// <root>/<camera_id>/<YYYY-MM-DD>.ndjson, keyed by the event's start time.
// Each record is written with a single append, so a crash can at worst leave
// one partial line at the end of a file. Readers skip that line; the first
// append to a file in a process truncates it away.

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bargewatch/events.hpp"

namespace bargewatch {

struct LogReadStats {
  std::size_t records = 0;
  std::size_t partial_tail = 0;  // unterminated final lines skipped
  std::size_t corrupt = 0;       // complete lines that failed to parse
};

class EventLog {
 public:
  explicit EventLog(std::filesystem::path root, bool fsync = false);

  /// Appends one event. On I/O failure the event is kept in memory, the
  /// failure counter grows and the next append retries it first. Returns
  /// false when the event (or an earlier one) is still pending.
  bool append(const PassageEvent& event);

  /// Retries buffered events; true when nothing is left pending.
  bool retry_pending();

  std::size_t pending() const;
  std::size_t failures() const { return failures_.load(); }

  std::filesystem::path file_for(const std::string& camera_id, Date day) const;
  const std::filesystem::path& root() const { return root_; }

  /// Events of one camera whose start day lies in [from, to], in file order.
  std::vector<PassageEvent> read(const std::string& camera_id, Date from, Date to,
                                 LogReadStats* stats = nullptr) const;
  /// Every event of one camera.
  std::vector<PassageEvent> read_all(const std::string& camera_id,
                                     LogReadStats* stats = nullptr) const;

 private:
  bool write_line(const PassageEvent& event);

  std::filesystem::path root_;
  bool fsync_;
  mutable std::mutex mutex_;
  std::vector<PassageEvent> pending_;
  std::set<std::filesystem::path> recovered_;
  std::atomic<std::size_t> failures_{0};
};

/// Parses NDJSON event text, skipping an unterminated last line.
std::vector<PassageEvent> parse_event_lines(std::string_view text, LogReadStats* stats = nullptr);

}  // namespace bargewatch
