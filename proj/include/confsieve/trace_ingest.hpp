#pragma once

// File-access trace parsing and per-path access statistics.
//
// Trace format: one event per line, `timestamp_ns<TAB>app<TAB>op<TAB>path`.
// Lines starting with '#' and blank lines are skipped.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "confsieve/error.hpp"
#include "confsieve/types.hpp"
#include "confsieve/version_store.hpp"

namespace confsieve {

enum class AccessOp { OpenRead, OpenWrite, OpenRw, Read, Write, Mmap, Unlink, Close };

inline constexpr std::array<std::pair<AccessOp, std::string_view>, 8> kAccessOpNames = {{
    {AccessOp::OpenRead, "OPEN_READ"},
    {AccessOp::OpenWrite, "OPEN_WRITE"},
    {AccessOp::OpenRw, "OPEN_RW"},
    {AccessOp::Read, "READ"},
    {AccessOp::Write, "WRITE"},
    {AccessOp::Mmap, "MMAP"},
    {AccessOp::Unlink, "UNLINK"},
    {AccessOp::Close, "CLOSE"},
}};

inline std::string_view to_string(AccessOp op) noexcept {
  for (const auto& [o, name] : kAccessOpNames)
    if (o == op) return name;
  return "?";
}

inline std::optional<AccessOp> parse_access_op(std::string_view token) noexcept {
  for (const auto& [o, name] : kAccessOpNames)
    if (name == token) return o;
  return std::nullopt;
}

inline bool is_open(AccessOp op) noexcept {
  return op == AccessOp::OpenRead || op == AccessOp::OpenWrite || op == AccessOp::OpenRw;
}

// MMAP counts as a write.
inline bool is_write(AccessOp op) noexcept { return op == AccessOp::Write || op == AccessOp::Mmap; }

inline bool is_data_op(AccessOp op) noexcept { return op == AccessOp::Read || is_write(op); }

struct AccessEvent {
  TimestampNs timestamp = 0;
  std::string app;
  AccessOp op = AccessOp::OpenRead;
  std::string path;

  friend bool operator==(const AccessEvent&, const AccessEvent&) = default;
};

inline std::string format_event(const AccessEvent& e) {
  std::string out = std::to_string(e.timestamp);
  out += '\t';
  out += e.app;
  out += '\t';
  out += to_string(e.op);
  out += '\t';
  out += e.path;
  return out;
}

// Parses one trace record. `line_number` is only used for diagnostics.
inline AccessEvent parse_event(std::string_view line, std::size_t line_number = 1,
                               std::string_view source = "<trace>") {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> cols;
  std::string_view rest = line;
  for (std::size_t tab; (tab = rest.find('\t')) != std::string_view::npos; rest.remove_prefix(tab + 1))
    cols.push_back(rest.substr(0, tab));
  cols.push_back(rest);
  if (cols.size() != 4)
    throw ParseError(std::string(source), line_number,
                     "expected 4 tab-separated fields, got " + std::to_string(cols.size()));

  AccessEvent e;
  const auto ts = cols[0];
  auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), e.timestamp);
  if (ts.empty() || ec != std::errc{} || ptr != ts.data() + ts.size())
    throw ParseError(std::string(source), line_number, "non-numeric timestamp '" + std::string(ts) + "'");
  e.app = std::string(cols[1]);
  auto op = parse_access_op(cols[2]);
  if (!op) throw ParseError(std::string(source), line_number, "unknown op '" + std::string(cols[2]) + "'");
  e.op = *op;
  if (cols[3].empty()) throw ParseError(std::string(source), line_number, "empty path");
  e.path = std::string(cols[3]);
  return e;
}

inline std::vector<AccessEvent> parse_trace(std::istream& in, std::string_view source = "<trace>") {
  std::vector<AccessEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    events.push_back(parse_event(line, lineno, source));
  }
  return events;
}

inline std::vector<AccessEvent> read_trace_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open trace " + file.string());
  return parse_trace(in, file.string());
}

struct AccessStats {
  std::string path;
  std::uint64_t opens = 0;
  std::uint64_t write_before_read_opens = 0;
  bool deleted = false;
  TimestampNs first_seen = 0;
  TimestampNs last_seen = 0;

  friend bool operator==(const AccessStats&, const AccessStats&) = default;
};

struct TraceDiagnostics {
  std::uint64_t unmatched_closes = 0;     // CLOSE with no open session
  std::uint64_t orphan_data_ops = 0;      // READ/WRITE/MMAP with no open session
};

struct TraceStats {
  std::map<std::string, AccessStats> by_path;
  TraceDiagnostics diagnostics;
};

// Aggregates per-path statistics. A session is keyed by (path, app) and runs
// from an OPEN_* to the matching CLOSE or the next OPEN_* on the same key.
inline TraceStats build_stats(const std::vector<AccessEvent>& events) {
  struct Session {
    AccessOp open_op;
    std::optional<AccessOp> first_data;
    bool any_write = false;
  };
  TraceStats out;
  std::map<std::pair<std::string, std::string>, Session> open_sessions;

  auto finish = [&](const std::string& path, const Session& s) {
    const bool write_first = (s.first_data && is_write(*s.first_data)) ||
                             (s.open_op == AccessOp::OpenWrite && s.any_write);
    if (write_first) ++out.by_path[path].write_before_read_opens;
  };

  std::optional<TimestampNs> last_ts;
  for (const auto& e : events) {
    if (last_ts && e.timestamp < *last_ts)
      throw OrderingError("trace event at " + std::to_string(e.timestamp) + " for " + e.path +
                          " precedes previous event at " + std::to_string(*last_ts));
    last_ts = e.timestamp;

    auto [it, inserted] = out.by_path.try_emplace(e.path);
    AccessStats& st = it->second;
    if (inserted) {
      st.path = e.path;
      st.first_seen = e.timestamp;
    }
    st.last_seen = e.timestamp;

    const auto key = std::make_pair(e.path, e.app);
    if (is_open(e.op)) {
      if (auto s = open_sessions.find(key); s != open_sessions.end()) {
        finish(e.path, s->second);
        open_sessions.erase(s);
      }
      ++st.opens;
      open_sessions.emplace(key, Session{e.op, std::nullopt, false});
    } else if (is_data_op(e.op)) {
      auto s = open_sessions.find(key);
      if (s == open_sessions.end()) {
        ++out.diagnostics.orphan_data_ops;
        continue;
      }
      if (!s->second.first_data) s->second.first_data = e.op;
      s->second.any_write = s->second.any_write || is_write(e.op);
    } else if (e.op == AccessOp::Close) {
      auto s = open_sessions.find(key);
      if (s == open_sessions.end()) {
        ++out.diagnostics.unmatched_closes;
        if (inserted) out.by_path.erase(it);
        continue;
      }
      finish(e.path, s->second);
      open_sessions.erase(s);
    } else if (e.op == AccessOp::Unlink) {
      st.deleted = true;
    }
  }
  for (const auto& [key, s] : open_sessions) finish(key.first, s);
  return out;
}

// Points at which an event-driven replay creates a version: a run of writes
// inside one session becomes a single version stamped at the session's CLOSE
// (or at the event that ends the session).
struct VersionPoint {
  std::string path;
  std::string app;
  TimestampNs timestamp = 0;

  friend bool operator==(const VersionPoint&, const VersionPoint&) = default;
};

inline std::vector<VersionPoint> coalesced_version_points(const std::vector<AccessEvent>& events) {
  std::map<std::pair<std::string, std::string>, bool> dirty;  // open sessions -> has pending write
  std::vector<VersionPoint> points;
  for (const auto& e : events) {
    const auto key = std::make_pair(e.path, e.app);
    auto it = dirty.find(key);
    if (is_open(e.op) || e.op == AccessOp::Close) {
      if (it != dirty.end()) {
        if (it->second) points.push_back({e.path, e.app, e.timestamp});
        dirty.erase(it);
      }
      if (is_open(e.op)) dirty.emplace(key, false);
    } else if (is_write(e.op) && it != dirty.end()) {
      it->second = true;
    }
  }
  for (const auto& [key, pending] : dirty)
    if (pending && !events.empty()) points.push_back({key.first, key.second, events.back().timestamp});
  return points;
}

// Stats file: `path<TAB>opens<TAB>write_before_read_opens<TAB>deleted<TAB>first_seen<TAB>last_seen`.
inline constexpr std::string_view kStatsHeader =
    "# path\topens\twrite_before_read_opens\tdeleted\tfirst_seen\tlast_seen";

inline void write_stats(std::ostream& out, const std::map<std::string, AccessStats>& stats) {
  out << kStatsHeader << '\n';
  for (const auto& [path, s] : stats)
    out << path << '\t' << s.opens << '\t' << s.write_before_read_opens << '\t' << (s.deleted ? 1 : 0) << '\t'
        << s.first_seen << '\t' << s.last_seen << '\n';
}

inline std::map<std::string, AccessStats> read_stats(std::istream& in, std::string_view source = "<stats>") {
  std::map<std::string, AccessStats> out;
  std::string line;
  std::size_t lineno = 0;
  auto num = [&](std::string_view tok, auto& dst) {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), dst);
    if (tok.empty() || ec != std::errc{} || p != tok.data() + tok.size())
      throw ParseError(std::string(source), lineno, "bad number '" + std::string(tok) + "'");
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string_view> cols;
    std::string_view rest = line;
    for (std::size_t tab; (tab = rest.find('\t')) != std::string_view::npos; rest.remove_prefix(tab + 1))
      cols.push_back(rest.substr(0, tab));
    cols.push_back(rest);
    if (cols.size() != 6) throw ParseError(std::string(source), lineno, "expected 6 fields");
    AccessStats s;
    s.path = std::string(cols[0]);
    num(cols[1], s.opens);
    num(cols[2], s.write_before_read_opens);
    int deleted = 0;
    num(cols[3], deleted);
    s.deleted = deleted != 0;
    num(cols[4], s.first_seen);
    num(cols[5], s.last_seen);
    if (s.write_before_read_opens > s.opens)
      throw ParseError(std::string(source), lineno, "write_before_read_opens exceeds opens");
    out[s.path] = s;
  }
  return out;
}

struct CaptureReport {
  std::uint64_t appended = 0;
  std::vector<std::string> skipped;  // unreadable files
};

// Appends one version for every regular file under `directory` whose content
// differs from the newest version in its log (or that has no log yet).
// Files inside the store directory itself are ignored.
inline CaptureReport capture_snapshot(const fs::path& directory, VersionStore& store, TimestampNs timestamp) {
  std::error_code ec;
  const fs::path root = fs::canonical(directory, ec);
  if (ec) throw IoError("cannot read directory " + directory.string() + ": " + ec.message());
  const fs::path store_dir = fs::weakly_canonical(store.directory());

  std::vector<fs::path> files;
  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw IoError("cannot read directory " + root.string() + ": " + ec.message());
  for (const auto end = fs::recursive_directory_iterator(); it != end; it.increment(ec)) {
    if (ec) break;
    if (it->is_directory() && fs::weakly_canonical(it->path()) == store_dir) {
      it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file()) files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());

  CaptureReport report;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) {
      report.skipped.push_back(f.string());
      continue;
    }
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
      report.skipped.push_back(f.string());
      continue;
    }
    const std::string key = f.lexically_normal().string();
    const ByteView content = as_bytes(raw);
    if (VersionLog* log = store.find(key)) {
      if (auto latest = log->latest(); latest && std::equal(latest->begin(), latest->end(), content.begin(),
                                                            content.end()))
        continue;
    }
    store.append_version(key, timestamp, content);
    ++report.appended;
  }
  return report;
}

}  // namespace confsieve
