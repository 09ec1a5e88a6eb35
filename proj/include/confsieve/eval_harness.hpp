#pragma once

// Synthetic workloads with ground-truth labels, and the evaluation metrics:
// confusion counts, versions eliminated, bytes saved and ROC points.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "confsieve/entry_tracker.hpp"
#include "confsieve/error.hpp"
#include "confsieve/filters.hpp"
#include "confsieve/trace_ingest.hpp"
#include "confsieve/types.hpp"
#include "confsieve/version_store.hpp"

namespace confsieve {

enum class Archetype { Config, Task, Time, Temp, UserData };

inline std::string_view to_string(Archetype a) noexcept {
  switch (a) {
    case Archetype::Config: return "CONFIG";
    case Archetype::Task: return "TASK";
    case Archetype::Time: return "TIME";
    case Archetype::Temp: return "TEMP";
    case Archetype::UserData: return "USERDATA";
  }
  return "?";
}

struct WorkloadSpec {
  std::size_t config = 10;
  std::size_t task = 20;
  std::size_t time = 20;
  std::size_t temp = 10;
  std::size_t userdata = 10;
  std::size_t min_versions = 20;
  std::size_t max_versions = 50;
  double config_gap_hours = 4.0;     // mean inter-arrival of CONFIG versions
  double task_gap_hours = 3.0;       // mean inter-arrival of TASK and TIME versions
  double burst_fraction = 0.25;      // share of TASK files written in one burst
  double burst_gap_minutes = 2.0;
  double write_first_fraction = 0.2;  // share of TASK files that truncate before reading
  std::string home = "/home/user";
  std::uint64_t seed = 1;
  TimestampNs start = 1'700'000'000'000'000'000;

  std::size_t total_files() const noexcept { return config + task + time + temp + userdata; }

  void validate() const {
    if (min_versions < 1 || max_versions < min_versions) throw ArgumentError("need 1 <= min_versions <= max_versions");
    if (config_gap_hours <= 0 || task_gap_hours <= 0 || burst_gap_minutes <= 0)
      throw ArgumentError("inter-arrival means must be positive");
    for (double f : {burst_fraction, write_first_fraction})
      if (f < 0.0 || f > 1.0) throw ArgumentError("fractions must lie in [0,1]");
    if (home.empty() || home.front() != '/') throw ArgumentError("home must be an absolute path");
  }
};

// `key=value` lines; '#' comments. Keys mirror the WorkloadSpec fields.
inline WorkloadSpec parse_workload_spec(std::istream& in, std::string_view source = "<workload spec>") {
  WorkloadSpec spec;
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
    auto parse = [&](auto& dst) {
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), dst);
      if (value.empty() || ec != std::errc{} || p != value.data() + value.size())
        throw ParseError(std::string(source), lineno, "bad value for '" + std::string(key) + "'");
    };
    if (key == "config") parse(spec.config);
    else if (key == "task") parse(spec.task);
    else if (key == "time") parse(spec.time);
    else if (key == "temp") parse(spec.temp);
    else if (key == "userdata") parse(spec.userdata);
    else if (key == "min_versions") parse(spec.min_versions);
    else if (key == "max_versions") parse(spec.max_versions);
    else if (key == "config_gap_hours") parse(spec.config_gap_hours);
    else if (key == "task_gap_hours") parse(spec.task_gap_hours);
    else if (key == "burst_fraction") parse(spec.burst_fraction);
    else if (key == "burst_gap_minutes") parse(spec.burst_gap_minutes);
    else if (key == "write_first_fraction") parse(spec.write_first_fraction);
    else if (key == "seed") parse(spec.seed);
    else if (key == "start") parse(spec.start);
    else if (key == "home") spec.home = std::string(value);
    else throw ParseError(std::string(source), lineno, "unknown key '" + std::string(key) + "'");
  }
  try {
    spec.validate();
  } catch (const ArgumentError& e) {
    throw ParseError(std::string(source), lineno, e.what());
  }
  return spec;
}

struct GroundTruthLabel {
  std::string path;
  bool is_config = false;

  friend bool operator==(const GroundTruthLabel&, const GroundTruthLabel&) = default;
};

struct GeneratedFile {
  std::string path;
  std::string app;
  Archetype archetype = Archetype::Task;
  std::vector<TextVersion> versions;
};

struct Workload {
  std::vector<GeneratedFile> files;
  std::vector<AccessEvent> trace;
  std::vector<GroundTruthLabel> labels;
  FilterConfig filter_config;
};

namespace detail {

// Platform-independent draws on top of mt19937_64 (the std distributions are
// implementation-defined).
class WorkloadRng {
 public:
  explicit WorkloadRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(next() % (hi - lo + 1)); }
  bool chance(double p) { return uniform() < p; }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  std::string token(std::size_t len) {
    static constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    std::string s(len, ' ');
    for (auto& c : s) c = kAlphabet[next() % kAlphabet.size()];
    return s;
  }

 private:
  std::mt19937_64 engine_;
};

inline std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

inline TimestampNs hours(double h) { return static_cast<TimestampNs>(h * static_cast<double>(kNsPerHour)); }

inline std::vector<TimestampNs> arrival_times(WorkloadRng& rng, TimestampNs start, std::size_t n, double mean_hours) {
  std::vector<TimestampNs> ts;
  TimestampNs t = start + hours(rng.uniform() * mean_hours);
  for (std::size_t i = 0; i < n; ++i) {
    ts.push_back(t);
    t += std::max<TimestampNs>(1'000'000'000, hours(rng.exponential(mean_hours)));
  }
  return ts;
}

// Large stable core of settings, a timestamp line rewritten on every save,
// and occasional value edits.
inline std::vector<TextVersion> config_versions(WorkloadRng& rng, const std::vector<TimestampNs>& ts) {
  const std::size_t keys = rng.between(30, 60);
  std::vector<std::string> lines;
  for (std::size_t k = 0; k < keys; ++k)
    lines.push_back("pref(\"option." + rng.token(6) + "\", \"" + rng.token(rng.between(3, 10)) + "\");");
  std::vector<TextVersion> out;
  for (auto t : ts) {
    if (!out.empty() && rng.chance(0.15)) {
      auto& l = lines[rng.between(0, lines.size() - 1)];
      l = l.substr(0, l.find(", ")) + ", \"" + rng.token(rng.between(3, 10)) + "\");";
    }
    if (!out.empty() && rng.chance(0.03))
      lines.push_back("pref(\"option." + rng.token(6) + "\", \"" + rng.token(rng.between(3, 10)) + "\");");
    auto body = lines;
    body.insert(body.begin() + static_cast<std::ptrdiff_t>(body.size() / 2), "pref(\"last_save\", " + std::to_string(t) + ");");
    out.push_back({t, join_lines(body)});
  }
  return out;
}

// Most lines are replaced on every version.
inline std::vector<TextVersion> task_versions(WorkloadRng& rng, const std::vector<TimestampNs>& ts) {
  const std::size_t n = rng.between(20, 40);
  auto fresh = [&] { return "item " + rng.token(12) + " at /srv/" + rng.token(rng.between(4, 16)) + " rank " + rng.token(4); };
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < n; ++i) lines.push_back(fresh());
  std::vector<TextVersion> out;
  for (auto t : ts) {
    if (!out.empty()) {
      const std::size_t replace = rng.between((6 * n + 9) / 10, n);
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      for (std::size_t i = 0; i < replace; ++i) {
        std::swap(idx[i], idx[rng.between(i, n - 1)]);
        lines[idx[i]] = fresh();
      }
    }
    out.push_back({t, join_lines(lines)});
  }
  return out;
}

// Only counters and timestamps.
inline std::vector<TextVersion> time_versions(WorkloadRng& rng, const std::vector<TimestampNs>& ts) {
  const std::size_t n = rng.between(4, 10);
  std::vector<std::uint64_t> counters(n);
  for (auto& c : counters) c = rng.next() % 1'000'000;
  std::vector<TextVersion> out;
  for (auto t : ts) {
    std::vector<std::string> lines{std::to_string(t)};
    for (auto& c : counters) {
      c += 1 + rng.next() % 100'000;
      lines.push_back(std::to_string(c) + " " + std::to_string(rng.next() % 1'000'000'000));
    }
    out.push_back({t, join_lines(lines)});
  }
  return out;
}

inline std::vector<TextVersion> temp_versions(WorkloadRng& rng, const std::vector<TimestampNs>& ts) {
  std::vector<TextVersion> out;
  for (auto t : ts) out.push_back({t, "pid=" + std::to_string(rng.next() % 65536) + "\n" + rng.token(32) + "\n"});
  return out;
}

// A document that is edited in place: paragraphs mostly survive.
inline std::vector<TextVersion> userdata_versions(WorkloadRng& rng, const std::vector<TimestampNs>& ts) {
  std::vector<std::string> paras;
  const std::size_t n = rng.between(10, 30);
  for (std::size_t i = 0; i < n; ++i) paras.push_back("The " + rng.token(8) + " report covers " + rng.token(20) + ".");
  std::vector<TextVersion> out;
  for (auto t : ts) {
    if (!out.empty()) {
      if (rng.chance(0.6)) paras[rng.between(0, paras.size() - 1)] += " Also " + rng.token(10) + ".";
      if (rng.chance(0.3)) paras.push_back("Note " + rng.token(16) + ".");
    }
    out.push_back({t, join_lines(paras)});
  }
  return out;
}

}  // namespace detail

// Deterministic for a given (spec, seed); `seed` overrides spec.seed.
inline Workload generate_workload(const WorkloadSpec& spec, std::optional<std::uint64_t> seed = std::nullopt) {
  spec.validate();
  detail::WorkloadRng rng(seed.value_or(spec.seed));
  Workload w;
  w.filter_config.home_prefixes = {spec.home};

  struct Pending {
    TimestampNs t;
    std::size_t order;
    AccessEvent event;
  };
  std::vector<Pending> events;
  auto emit = [&](TimestampNs t, const std::string& app, AccessOp op, const std::string& path) {
    events.push_back({t, events.size(), {t, app, op, path}});
  };
  auto read_session = [&](TimestampNs t, const std::string& app, const std::string& path) {
    emit(t, app, AccessOp::OpenRead, path);
    emit(t + 1, app, AccessOp::Read, path);
    emit(t + 2, app, AccessOp::Close, path);
  };
  auto update_session = [&](TimestampNs t, const std::string& app, const std::string& path) {
    emit(t, app, AccessOp::OpenRw, path);
    emit(t + 1, app, AccessOp::Read, path);
    emit(t + 2, app, AccessOp::Write, path);
    emit(t + 3, app, AccessOp::Close, path);
  };
  auto truncate_session = [&](TimestampNs t, const std::string& app, const std::string& path) {
    emit(t, app, AccessOp::OpenWrite, path);
    emit(t + 1, app, AccessOp::Write, path);
    emit(t + 2, app, AccessOp::Close, path);
  };

  std::size_t serial = 0;
  auto add_files = [&](Archetype kind, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i, ++serial) {
      GeneratedFile f;
      f.archetype = kind;
      f.app = "app" + std::to_string(serial % 7);
      const std::size_t nver = rng.between(spec.min_versions, spec.max_versions);
      const std::string dot_dir = spec.home + "/." + f.app + "/";
      bool burst = false;
      bool write_first = false;
      std::vector<TimestampNs> ts;
      switch (kind) {
        case Archetype::Config:
          f.path = dot_dir + "prefs-" + std::to_string(serial) + ".js";
          ts = detail::arrival_times(rng, spec.start, nver, spec.config_gap_hours);
          f.versions = detail::config_versions(rng, ts);
          break;
        case Archetype::Task:
          f.path = dot_dir + "session-" + std::to_string(serial) + ".dat";
          burst = rng.chance(spec.burst_fraction);
          write_first = rng.chance(spec.write_first_fraction);
          ts = burst ? detail::arrival_times(rng, spec.start, nver, spec.burst_gap_minutes / 60.0)
                     : detail::arrival_times(rng, spec.start, nver, spec.task_gap_hours);
          f.versions = detail::task_versions(rng, ts);
          break;
        case Archetype::Time:
          f.path = dot_dir + "counters-" + std::to_string(serial);
          ts = detail::arrival_times(rng, spec.start, nver, spec.task_gap_hours);
          f.versions = detail::time_versions(rng, ts);
          break;
        case Archetype::Temp:
          f.path = dot_dir + "lock-" + std::to_string(serial);
          ts = detail::arrival_times(rng, spec.start, rng.between(1, 3), 0.1);
          f.versions = detail::temp_versions(rng, ts);
          break;
        case Archetype::UserData:
          f.path = spec.home + "/docs/report-" + std::to_string(serial) + ".txt";
          ts = detail::arrival_times(rng, spec.start, nver, spec.task_gap_hours);
          f.versions = detail::userdata_versions(rng, ts);
          break;
      }

      // Access pattern: a read at startup, one session per saved version.
      if (kind != Archetype::Temp) read_session(spec.start - kNsPerHour, f.app, f.path);
      for (const auto& v : f.versions) {
        if (kind == Archetype::Temp || write_first) truncate_session(v.timestamp, f.app, f.path);
        else update_session(v.timestamp, f.app, f.path);
        if (kind == Archetype::Config && rng.chance(0.5)) read_session(v.timestamp + kNsPerHour / 2, f.app, f.path);
      }
      if (kind == Archetype::Temp) emit(f.versions.back().timestamp + 1'000'000, f.app, AccessOp::Unlink, f.path);

      w.labels.push_back({f.path, kind == Archetype::Config});
      w.files.push_back(std::move(f));
    }
  };
  add_files(Archetype::Config, spec.config);
  add_files(Archetype::Task, spec.task);
  add_files(Archetype::Time, spec.time);
  add_files(Archetype::Temp, spec.temp);
  add_files(Archetype::UserData, spec.userdata);

  std::sort(events.begin(), events.end(), [](const Pending& a, const Pending& b) {
    return a.t != b.t ? a.t < b.t : a.order < b.order;
  });
  w.trace.reserve(events.size());
  for (auto& p : events) w.trace.push_back(std::move(p.event));
  std::sort(w.labels.begin(), w.labels.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return w;
}

inline void write_labels(std::ostream& out, const std::vector<GroundTruthLabel>& labels) {
  for (const auto& l : labels) out << l.path << '\t' << (l.is_config ? "config" : "nonconfig") << '\n';
}

inline std::map<std::string, bool> read_labels(std::istream& in, std::string_view source = "<labels>") {
  std::map<std::string, bool> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(std::string(source), lineno, "expected path<TAB>config|nonconfig");
    const auto kind = std::string_view(line).substr(tab + 1);
    if (kind != "config" && kind != "nonconfig")
      throw ParseError(std::string(source), lineno, "label must be config or nonconfig");
    if (!out.emplace(line.substr(0, tab), kind == "config").second)
      throw ParseError(std::string(source), lineno, "duplicate label for " + line.substr(0, tab));
  }
  return out;
}

// Writes store/, trace.tsv, labels.tsv and filter.conf under `out_dir`.
inline void write_workload(const Workload& w, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  if (fs::exists(out_dir / "store" / VersionStore::kIndexFile))
    throw IoError(out_dir.string() + " already contains a store");
  auto store = VersionStore::open(out_dir / "store");
  for (const auto& f : w.files) {
    auto& log = store.ensure_log(f.path, f.app);
    for (const auto& v : f.versions) log.append(v.timestamp, as_bytes(v.content));
  }
  {
    std::ofstream trace(out_dir / "trace.tsv");
    trace << "# timestamp_ns\tapp\top\tpath\n";
    for (const auto& e : w.trace) trace << format_event(e) << '\n';
  }
  {
    std::ofstream labels(out_dir / "labels.tsv");
    write_labels(labels, w.labels);
  }
  std::ofstream conf(out_dir / "filter.conf");
  write_filter_config(conf, w.filter_config);
  if (!conf) throw IoError("failed writing workload files under " + out_dir.string());
}

// What the evaluation needs to know about one file.
struct ScoredFile {
  double score = 0.0;
  bool passed_filters = true;
  std::uint64_t versions = 0;
  std::uint64_t bytes = 0;
};

using ScoreTable = std::map<std::string, ScoredFile>;
using LabelTable = std::map<std::string, bool>;

struct Metrics {
  double threshold = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fn = 0;
  std::uint64_t fp = 0;
  std::uint64_t surviving_nonconfig = 0;  // non-config files that passed the filters
  std::uint64_t versions_eliminated = 0;
  std::uint64_t versions_total = 0;  // all non-config versions
  std::uint64_t bytes_saved = 0;
  std::uint64_t bytes_total = 0;  // all non-config bytes

  double tpr() const noexcept { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  double fpr() const noexcept {
    return surviving_nonconfig == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(surviving_nonconfig);
  }
  double versions_eliminated_pct() const noexcept {
    return versions_total == 0 ? 0.0 : 100.0 * static_cast<double>(versions_eliminated) / static_cast<double>(versions_total);
  }
  double bytes_saved_pct() const noexcept {
    return bytes_total == 0 ? 0.0 : 100.0 * static_cast<double>(bytes_saved) / static_cast<double>(bytes_total);
  }
};

// Scores above the threshold are kept (positive); at or below are eliminated.
inline Metrics confusion(const ScoreTable& scores, const LabelTable& labels, double threshold) {
  std::string missing;
  for (const auto& [path, _] : labels)
    if (!scores.contains(path)) missing += (missing.empty() ? "" : ", ") + path;
  std::string unlabeled;
  for (const auto& [path, _] : scores)
    if (!labels.contains(path)) unlabeled += (unlabeled.empty() ? "" : ", ") + path;
  if (!missing.empty() || !unlabeled.empty()) {
    std::string msg = "scores and labels disagree";
    if (!missing.empty()) msg += "; no score for: " + missing;
    if (!unlabeled.empty()) msg += "; no label for: " + unlabeled;
    throw ArgumentError(msg);
  }

  Metrics m;
  m.threshold = threshold;
  for (const auto& [path, is_config] : labels) {
    const ScoredFile& s = scores.at(path);
    const bool kept = s.score > threshold;
    if (is_config) {
      (kept ? m.tp : m.fn) += 1;
      continue;
    }
    m.versions_total += s.versions;
    m.bytes_total += s.bytes;
    if (!kept) {
      m.versions_eliminated += s.versions;
      m.bytes_saved += s.bytes;
    }
    if (s.passed_filters) {
      ++m.surviving_nonconfig;
      if (kept) ++m.fp;
    }
  }
  return m;
}

inline const std::vector<double> kDefaultThresholds = {0.95, 0.90, 0.80, 0.70, 0.60};

struct RocResult {
  std::vector<Metrics> points;
  std::optional<double> best_threshold;  // closest operating point to (fpr 0, tpr 1)
};

inline RocResult roc_curve(const ScoreTable& scores, const LabelTable& labels, const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw ArgumentError("at least one threshold is required");
  RocResult out;
  double best = 0.0;
  for (double t : thresholds) {
    out.points.push_back(confusion(scores, labels, t));
    const auto& m = out.points.back();
    const double d = std::hypot(m.fpr(), 1.0 - m.tpr());
    if (!out.best_threshold || d < best) {
      best = d;
      out.best_threshold = t;
    }
  }
  return out;
}

inline void write_roc_csv(std::ostream& out, const RocResult& roc) {
  out << "threshold,tp,fn,fp,tpr,fpr,versions_eliminated_pct,bytes_saved_pct\n";
  char buf[256];
  for (const auto& m : roc.points) {
    std::snprintf(buf, sizeof buf, "%.4g,%llu,%llu,%llu,%.4f,%.4f,%.2f,%.2f\n", m.threshold,
                  static_cast<unsigned long long>(m.tp), static_cast<unsigned long long>(m.fn),
                  static_cast<unsigned long long>(m.fp), m.tpr(), m.fpr(), m.versions_eliminated_pct(),
                  m.bytes_saved_pct());
    out << buf;
  }
}

}  // namespace confsieve
