#include "bargewatch/eventlog.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include "bargewatch/dataset.hpp"
#include "bargewatch/errors.hpp"

namespace bargewatch {

namespace fs = std::filesystem;

namespace {

// Cuts an unterminated tail left by an interrupted writer.
void truncate_partial_tail(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return;
  const std::string text = read_text_file(path);
  if (text.empty() || text.back() == '\n') return;
  const auto keep = text.rfind('\n');
  fs::resize_file(path, keep == std::string::npos ? 0 : keep + 1, ec);
}

bool write_all(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

EventLog::EventLog(fs::path root, bool fsync) : root_(std::move(root)), fsync_(fsync) {}

fs::path EventLog::file_for(const std::string& camera_id, Date day) const {
  return root_ / camera_id / (format_date(day) + ".ndjson");
}

bool EventLog::write_line(const PassageEvent& event) {
  const fs::path path = file_for(event.camera_id, date_of(event.start));
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) return false;
  if (!recovered_.count(path)) {
    truncate_partial_tail(path);
    recovered_.insert(path);
  }
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) return false;
  const std::string line = event_to_json(event).dump() + "\n";
  bool ok = write_all(fd, line);
  if (ok && fsync_) ok = ::fsync(fd) == 0;
  ok = (::close(fd) == 0) && ok;
  return ok;
}

bool EventLog::retry_pending() {
  std::lock_guard lock(mutex_);
  while (!pending_.empty()) {
    if (!write_line(pending_.front())) {
      ++failures_;
      return false;
    }
    pending_.erase(pending_.begin());
  }
  return true;
}

bool EventLog::append(const PassageEvent& event) {
  {
    std::lock_guard lock(mutex_);
    pending_.push_back(event);
  }
  return retry_pending();
}

std::size_t EventLog::pending() const {
  std::lock_guard lock(mutex_);
  return pending_.size();
}

std::vector<PassageEvent> parse_event_lines(std::string_view text, LogReadStats* stats) {
  LogReadStats local;
  LogReadStats& s = stats ? *stats : local;
  std::vector<PassageEvent> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      ++s.partial_tail;
      break;
    }
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(event_from_json(nlohmann::json::parse(line)));
      ++s.records;
    } catch (const std::exception&) {
      ++s.corrupt;
    }
  }
  return out;
}

std::vector<PassageEvent> EventLog::read(const std::string& camera_id, Date from, Date to,
                                         LogReadStats* stats) const {
  std::vector<PassageEvent> out;
  for (Date d = from; d <= to; d += std::chrono::days(1)) {
    const fs::path path = file_for(camera_id, d);
    std::error_code ec;
    if (!fs::exists(path, ec)) continue;
    auto events = parse_event_lines(read_text_file(path), stats);
    out.insert(out.end(), events.begin(), events.end());
  }
  return out;
}

std::vector<PassageEvent> EventLog::read_all(const std::string& camera_id,
                                             LogReadStats* stats) const {
  const fs::path dir = root_ / camera_id;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return {};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".ndjson") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PassageEvent> out;
  for (const fs::path& f : files) {
    auto events = parse_event_lines(read_text_file(f), stats);
    out.insert(out.end(), events.begin(), events.end());
  }
  return out;
}

}  // namespace bargewatch
