#pragma once

// Cheap predicates that remove files which cannot hold application state
// before any similarity work is done.

#include <charconv>
#include <cstdint>
#include <optional>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "confsieve/error.hpp"
#include "confsieve/trace_ingest.hpp"

namespace confsieve {

struct FilterConfig {
  double write_before_read_threshold = 0.20;
  std::vector<std::string> home_prefixes;

  void validate() const {
    if (!(write_before_read_threshold >= 0.0 && write_before_read_threshold <= 1.0))
      throw ArgumentError("write_before_read_threshold must lie in [0,1]");
  }
};

enum class FailedFilter { None, Deleted, WriteBeforeRead, UserData };

inline std::string_view to_string(FailedFilter f) noexcept {
  switch (f) {
    case FailedFilter::None: return "PASS";
    case FailedFilter::Deleted: return "DELETED";
    case FailedFilter::WriteBeforeRead: return "WRITE_BEFORE_READ";
    case FailedFilter::UserData: return "USER_DATA";
  }
  return "?";
}

inline std::optional<FailedFilter> parse_failed_filter(std::string_view s) noexcept {
  for (auto f : {FailedFilter::None, FailedFilter::Deleted, FailedFilter::WriteBeforeRead, FailedFilter::UserData})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

struct FilterVerdict {
  bool passed = true;
  FailedFilter failed_filter = FailedFilter::None;

  friend bool operator==(const FilterVerdict&, const FilterVerdict&) = default;
};

inline bool passes_persistence(const AccessStats& stats) noexcept { return !stats.deleted; }

// Removal needs strictly more than the threshold fraction of write-first opens.
// A file never opened in the trace fails: there is no evidence it is read back.
inline bool passes_read_before_write(const AccessStats& stats, const FilterConfig& cfg) noexcept {
  if (stats.opens == 0) return false;
  const double ratio = static_cast<double>(stats.write_before_read_opens) / static_cast<double>(stats.opens);
  return ratio <= cfg.write_before_read_threshold;
}

namespace detail {

// Component-wise prefix test: "/home/u" covers "/home/u/x" but not "/home/user2".
inline bool under_prefix(std::string_view path, std::string_view prefix, std::string_view& remainder) {
  while (prefix.size() > 1 && prefix.back() == '/') prefix.remove_suffix(1);
  if (prefix.empty() || !path.starts_with(prefix)) return false;
  if (prefix == "/") {
    remainder = path.substr(1);
    return true;
  }
  if (path.size() == prefix.size()) {
    remainder = {};
    return true;
  }
  if (path[prefix.size()] != '/') return false;
  remainder = path.substr(prefix.size() + 1);
  return true;
}

}  // namespace detail

// False for documents under a home prefix whose directory chain below the
// prefix has no dot-prefixed component. The basename is not considered.
inline bool passes_user_data(std::string_view path, const FilterConfig& cfg) {
  for (const auto& prefix : cfg.home_prefixes) {
    std::string_view rest;
    if (!detail::under_prefix(path, prefix, rest)) continue;
    const auto last_slash = rest.rfind('/');
    std::string_view dirs = last_slash == std::string_view::npos ? std::string_view{} : rest.substr(0, last_slash);
    bool hidden = false;
    while (!dirs.empty()) {
      const auto slash = dirs.find('/');
      const auto comp = dirs.substr(0, slash);
      if (!comp.empty() && comp.front() == '.') {
        hidden = true;
        break;
      }
      if (slash == std::string_view::npos) break;
      dirs.remove_prefix(slash + 1);
    }
    if (!hidden) return false;
  }
  return true;
}

// Persistence, then read-before-write, then user data; the first failure wins.
inline FilterVerdict apply_filters(std::string_view path, const AccessStats& stats, const FilterConfig& cfg) {
  if (!passes_persistence(stats)) return {false, FailedFilter::Deleted};
  if (!passes_read_before_write(stats, cfg)) return {false, FailedFilter::WriteBeforeRead};
  if (!passes_user_data(path, cfg)) return {false, FailedFilter::UserData};
  return {};
}

// `threshold=0.20` and repeated `home=/home/u` lines; '#' starts a comment.
inline FilterConfig parse_filter_config(std::istream& in, std::string_view source = "<filter config>") {
  FilterConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    while (!v.empty() && (v.back() == '\r' || v.back() == ' ')) v.remove_suffix(1);
    while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
    if (v.empty() || v.front() == '#') continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) throw ParseError(std::string(source), lineno, "expected key=value");
    const auto key = v.substr(0, eq);
    const auto value = v.substr(eq + 1);
    if (key == "threshold") {
      double t = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), t);
      if (ec != std::errc{} || p != value.data() + value.size() || t < 0.0 || t > 1.0)
        throw ParseError(std::string(source), lineno, "threshold must be a number in [0,1]");
      cfg.write_before_read_threshold = t;
    } else if (key == "home") {
      if (value.empty() || value.front() != '/')
        throw ParseError(std::string(source), lineno, "home prefix must be an absolute path");
      cfg.home_prefixes.emplace_back(value);
    } else {
      throw ParseError(std::string(source), lineno, "unknown key '" + std::string(key) + "'");
    }
  }
  return cfg;
}

inline void write_filter_config(std::ostream& out, const FilterConfig& cfg) {
  out << "threshold=" << cfg.write_before_read_threshold << '\n';
  for (const auto& h : cfg.home_prefixes) out << "home=" << h << '\n';
}

}  // namespace confsieve
