#pragma once

// The confsieve command line. Exit status: 0 success, 1 usage error,
// 2 data error (bad input files, empty store, I/O failures).

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "confsieve/confsieve.hpp"

namespace confsieve::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string store;
  bool quiet = false;
  std::string trace;
  std::string stats_out;
  std::string stats;
  std::string filter_config;
  std::string dir;
  std::string spec;
  std::string out;
  std::string scores;
  std::string labels;
  std::string verdicts;
  std::string path;
  std::string dest;
  std::string mode;
  std::string thresholds = "0.95,0.9,0.8,0.7,0.6";
  double period_hours = 3.0;
  std::size_t samples = 12;
  std::optional<std::uint64_t> seed;
  std::optional<TimestampNs> timestamp;
  std::optional<TimestampNs> phase_start;
  std::int64_t quota = -1;
  std::uint64_t index = 0;
};

namespace detail {

inline std::string resolve_store(const RunConfig& cfg) {
  if (!cfg.store.empty()) return cfg.store;
  if (const char* env = std::getenv("CONFSIEVE_STORE"); env && *env) return env;
  throw UsageError("no store given: pass --store DIR or set CONFSIEVE_STORE");
}

// Opens an existing store; a missing directory is a data error.
inline VersionStore open_existing_store(const RunConfig& cfg) {
  const auto dir = resolve_store(cfg);
  if (!fs::is_directory(dir)) throw IoError("store directory does not exist: " + dir);
  return VersionStore::open(dir);
}

inline std::ifstream open_input(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file);
  return in;
}

inline TriggerConfig trigger_config(const RunConfig& cfg) {
  if (!(cfg.period_hours > 0)) throw UsageError("--period-hours must be positive");
  if (cfg.samples < 1) throw UsageError("--samples must be at least 1");
  TriggerConfig t;
  t.period = std::chrono::nanoseconds(static_cast<std::int64_t>(cfg.period_hours * static_cast<double>(kNsPerHour)));
  t.sample_length = cfg.samples;
  return t;
}

inline std::vector<double> parse_thresholds(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    double t = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), t);
    if (tok.empty() || ec != std::errc{} || p != tok.data() + tok.size() || t < 0.0 || t > 1.0)
      throw UsageError("bad threshold '" + tok + "'");
    out.push_back(t);
  }
  if (out.empty()) throw UsageError("--thresholds needs at least one value");
  return out;
}

// Writes to --out when given, else to `fallback`.
template <typename F>
void emit(const RunConfig& cfg, std::ostream& fallback, F&& write) {
  if (cfg.out.empty()) {
    write(fallback);
    return;
  }
  std::ostringstream buf;
  write(buf);
  const std::string text = buf.str();
  confsieve::detail::write_file_atomically(cfg.out, as_bytes(text));
}

inline std::optional<VerdictTable> load_verdicts(const RunConfig& cfg) {
  if (cfg.verdicts.empty()) return std::nullopt;
  auto in = open_input(cfg.verdicts);
  return read_verdicts(in, cfg.verdicts);
}

}  // namespace detail

inline int cmd_gen(const RunConfig& cfg, std::ostream& out) {
  auto in = detail::open_input(cfg.spec);
  const WorkloadSpec spec = parse_workload_spec(in, cfg.spec);
  const Workload w = generate_workload(spec, cfg.seed);
  write_workload(w, cfg.out);
  if (!cfg.quiet)
    out << "generated " << w.files.size() << " files, " << w.trace.size() << " trace events in " << cfg.out << '\n';
  return kExitOk;
}

inline int cmd_ingest(const RunConfig& cfg, std::ostream&, std::ostream& err) {
  const auto events = read_trace_file(cfg.trace);
  const TraceStats stats = build_stats(events);
  std::ostringstream buf;
  write_stats(buf, stats.by_path);
  const std::string text = buf.str();
  confsieve::detail::write_file_atomically(cfg.stats_out, as_bytes(text));
  if (!cfg.quiet && (stats.diagnostics.unmatched_closes || stats.diagnostics.orphan_data_ops))
    err << "note: " << stats.diagnostics.unmatched_closes << " unmatched CLOSE, " << stats.diagnostics.orphan_data_ops
        << " data ops outside a session\n";
  return kExitOk;
}

inline int cmd_capture(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  auto store = VersionStore::open(detail::resolve_store(cfg));
  const TimestampNs ts = cfg.timestamp.value_or(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch()).count());
  const auto report = capture_snapshot(cfg.dir, store, ts);
  for (const auto& s : report.skipped) err << "skipped unreadable file: " << s << '\n';
  if (!cfg.quiet) out << "appended " << report.appended << " versions\n";
  return kExitOk;
}

inline int cmd_filter(const RunConfig& cfg, std::ostream& out) {
  auto stats_in = detail::open_input(cfg.stats);
  const auto stats = read_stats(stats_in, cfg.stats);
  auto conf_in = detail::open_input(cfg.filter_config);
  const FilterConfig fc = parse_filter_config(conf_in, cfg.filter_config);
  const auto verdicts = filter_all(stats, fc);
  detail::emit(cfg, out, [&](std::ostream& o) { write_verdicts(o, verdicts); });
  return kExitOk;
}

inline int cmd_trigger(const RunConfig& cfg, std::ostream& out) {
  const auto trig = detail::trigger_config(cfg);
  const auto store = detail::open_existing_store(cfg);
  detail::emit(cfg, out, [&](std::ostream& o) {
    for (const auto& path : store.paths()) {
      const auto ts = store.log(path).timestamps();
      const auto scan = scan_periods(ts, trig);
      o << path << '\t' << (scan.trigger ? std::to_string(*scan.trigger) : std::string("NONE")) << '\t'
        << scan.openers.size() << '\n';
    }
  });
  return kExitOk;
}

inline int cmd_score(const RunConfig& cfg, std::ostream& out, bool rank) {
  const auto trig = detail::trigger_config(cfg);
  const std::string mode_name = cfg.mode.empty() ? (rank ? "recovery" : "sampled") : cfg.mode;
  const auto mode = parse_score_mode(mode_name);
  if (!mode) throw UsageError("unknown --mode '" + mode_name + "' (all|triggered|sampled|recovery)");
  const auto verdicts = detail::load_verdicts(cfg);
  const auto store = detail::open_existing_store(cfg);
  if (store.empty()) throw Error("empty store: " + store.directory().string());
  const auto scores = score_store(store, trig, *mode, verdicts);
  detail::emit(cfg, out, [&](std::ostream& o) { write_scores(o, scores, rank); });
  return kExitOk;
}

inline int cmd_entries(const RunConfig& cfg, std::ostream& out) {
  const auto store = detail::open_existing_store(cfg);
  const auto report = entry_history(store.log(cfg.path));
  if (report.binary) throw Error(cfg.path + " is binary; entries are only tracked for text files");
  std::vector<bool> is_config(report.entries.size(), false);
  if (cfg.phase_start)
    for (auto id : classify_config_entries(report, *cfg.phase_start)) is_config[id] = true;
  detail::emit(cfg, out, [&](std::ostream& o) {
    o << "entry_id,adds,deletes,changes,versions_present,lifetime,is_config\n";
    char buf[64];
    for (const auto& e : report.entries) {
      std::snprintf(buf, sizeof buf, "%.6f", report.lifetimes[e.id]);
      o << e.id << ',' << e.adds << ',' << e.deletes << ',' << e.changes << ',' << e.versions_present << ',' << buf
        << ',' << (cfg.phase_start ? (is_config[e.id] ? "1" : "0") : "-") << '\n';
    }
  });
  return kExitOk;
}

inline int cmd_lifetimes(const RunConfig& cfg, std::ostream& out) {
  const auto store = detail::open_existing_store(cfg);
  const auto report = entry_history(store.log(cfg.path));
  if (report.binary) throw Error(cfg.path + " is binary; entries are only tracked for text files");
  detail::emit(cfg, out, [&](std::ostream& o) {
    o << "lifetime,cumulative_fraction\n";
    char buf[64];
    for (const auto& [l, f] : lifetime_cdf(report)) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", l, f);
      o << buf;
    }
  });
  return kExitOk;
}

inline int cmd_roc(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto thresholds = detail::parse_thresholds(cfg.thresholds);
  auto scores_in = detail::open_input(cfg.scores);
  const auto rows = read_scores(scores_in, cfg.scores);
  auto labels_in = detail::open_input(cfg.labels);
  const auto labels = read_labels(labels_in, cfg.labels);
  const auto verdicts = detail::load_verdicts(cfg);
  // Version and byte totals come from the store when one is available.
  std::optional<VersionStore> store;
  const char* env = std::getenv("CONFSIEVE_STORE");
  if (!cfg.store.empty() || (env && *env)) store.emplace(detail::open_existing_store(cfg));
  const auto table = build_score_table(rows, verdicts, store ? &*store : nullptr);
  const auto roc = roc_curve(table, labels, thresholds);
  detail::emit(cfg, out, [&](std::ostream& o) { write_roc_csv(o, roc); });
  if (!cfg.quiet && roc.best_threshold) err << "best threshold (closest to fpr=0, tpr=1): " << *roc.best_threshold << '\n';
  return kExitOk;
}

inline int cmd_evict(const RunConfig& cfg, std::ostream& out) {
  if (cfg.quota < 0) throw UsageError("--quota must be a non-negative byte count");
  auto scores_in = detail::open_input(cfg.scores);
  std::map<std::string, double> scores;
  for (const auto& row : read_scores(scores_in, cfg.scores)) scores[row.path] = row.score;
  auto store = detail::open_existing_store(cfg);
  const auto report = evict_for_quota(store, scores, cfg.quota);
  detail::emit(cfg, out, [&](std::ostream& o) {
    for (const auto& e : report.evicted) o << e.path << '\t' << e.versions_removed << '\t' << e.bytes_freed << '\n';
    o << "# remaining_bytes " << report.remaining_bytes << '\n';
  });
  return kExitOk;
}

inline int cmd_rollback(const RunConfig& cfg, std::ostream& out) {
  const auto store = detail::open_existing_store(cfg);
  const fs::path dest = cfg.dest.empty() ? fs::path(cfg.path) : fs::path(cfg.dest);
  const auto written = rollback(store.log(cfg.path), cfg.index, dest);
  if (!cfg.quiet) out << "restored version " << cfg.index << " of " << cfg.path << " to " << dest.string() << " ("
                      << written << " bytes)\n";
  return kExitOk;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"confsieve: find configuration files in versioned file histories"};
  app.require_subcommand(1);
  app.add_option("--store", cfg.store, "Version store directory (default: $CONFSIEVE_STORE)");
  app.add_flag("-q,--quiet", cfg.quiet, "Suppress informational output");

  auto store_opt = [&](CLI::App* sub) {
    sub->add_option("--store", cfg.store, "Version store directory");
    sub->add_flag("-q,--quiet", cfg.quiet, "Suppress informational output");
  };
  auto trigger_opts = [&](CLI::App* sub) {
    sub->add_option("--period-hours", cfg.period_hours, "Sampling period T in hours")->capture_default_str();
    sub->add_option("--samples", cfg.samples, "Sample length M")->capture_default_str();
  };

  auto* gen = app.add_subcommand("gen", "Generate a labelled synthetic workload");
  gen->add_option("--spec", cfg.spec, "Workload spec file")->required();
  gen->add_option("--seed", cfg.seed, "RNG seed (overrides the spec)");
  gen->add_option("--out", cfg.out, "Output directory")->required();
  gen->add_flag("-q,--quiet", cfg.quiet);

  auto* ingest = app.add_subcommand("ingest", "Build per-file access statistics from a trace");
  ingest->add_option("--trace", cfg.trace, "Trace file")->required();
  ingest->add_option("--stats-out", cfg.stats_out, "Statistics output file")->required();
  ingest->add_flag("-q,--quiet", cfg.quiet);

  auto* capture = app.add_subcommand("capture", "Snapshot a directory tree into the store");
  capture->add_option("--dir", cfg.dir, "Directory to capture")->required();
  capture->add_option("--timestamp", cfg.timestamp, "Version timestamp in ns (default: now)");
  store_opt(capture);

  auto* filter = app.add_subcommand("filter", "Apply the file filters to access statistics");
  filter->add_option("--stats", cfg.stats, "Statistics file from ingest")->required();
  filter->add_option("--config", cfg.filter_config, "Filter config file")->required();
  filter->add_option("--out", cfg.out, "Write verdicts here instead of stdout");

  auto* trigger = app.add_subcommand("trigger", "Report each file's trigger point");
  store_opt(trigger);
  trigger_opts(trigger);
  trigger->add_option("--out", cfg.out, "Output file");

  auto* score = app.add_subcommand("score", "Compute similarity scores");
  auto* rank = app.add_subcommand("rank", "Rank files by score with filter verdicts (recovery mode)");
  for (auto* sub : {score, rank}) {
    store_opt(sub);
    trigger_opts(sub);
    sub->add_option("--mode", cfg.mode, "all|triggered|sampled|recovery");
    sub->add_option("--verdicts", cfg.verdicts, "Filter verdicts; failing files score 0");
    sub->add_option("--out", cfg.out, "Output file");
  }

  auto* entries = app.add_subcommand("entries", "Data-entry change history of one file (CSV)");
  auto* lifetimes = app.add_subcommand("lifetimes", "Entry lifetime CDF of one file (CSV)");
  for (auto* sub : {entries, lifetimes}) {
    store_opt(sub);
    sub->add_option("--path", cfg.path, "Shadowed file path")->required();
    sub->add_option("--out", cfg.out, "Output file");
  }
  entries->add_option("--phase-start", cfg.phase_start, "Start of the configuration phase (ns)");

  auto* roc = app.add_subcommand("roc", "Confusion metrics per threshold (CSV)");
  store_opt(roc);
  roc->add_option("--scores", cfg.scores, "Score file")->required();
  roc->add_option("--labels", cfg.labels, "Ground-truth labels")->required();
  roc->add_option("--thresholds", cfg.thresholds, "Comma-separated thresholds")->capture_default_str();
  roc->add_option("--verdicts", cfg.verdicts, "Filter verdicts (FP counts only surviving files)");
  roc->add_option("--out", cfg.out, "Output file");

  auto* evict = app.add_subcommand("evict", "Evict whole logs, lowest score first, until under quota");
  store_opt(evict);
  evict->add_option("--scores", cfg.scores, "Score file")->required();
  evict->add_option("--quota", cfg.quota, "Quota in bytes")->required();
  evict->add_option("--out", cfg.out, "Report file");

  auto* rollback_cmd = app.add_subcommand("rollback", "Restore one version of a file");
  store_opt(rollback_cmd);
  rollback_cmd->add_option("--path", cfg.path, "Shadowed file path")->required();
  rollback_cmd->add_option("--index", cfg.index, "Version index")->required();
  rollback_cmd->add_option("--dest", cfg.dest, "Destination (default: the original path)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(cfg, out);
    if (ingest->parsed()) return cmd_ingest(cfg, out, err);
    if (capture->parsed()) return cmd_capture(cfg, out, err);
    if (filter->parsed()) return cmd_filter(cfg, out);
    if (trigger->parsed()) return cmd_trigger(cfg, out);
    if (score->parsed()) return cmd_score(cfg, out, false);
    if (rank->parsed()) return cmd_score(cfg, out, true);
    if (entries->parsed()) return cmd_entries(cfg, out);
    if (lifetimes->parsed()) return cmd_lifetimes(cfg, out);
    if (roc->parsed()) return cmd_roc(cfg, out, err);
    if (evict->parsed()) return cmd_evict(cfg, out);
    if (rollback_cmd->parsed()) return cmd_rollback(cfg, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const confsieve::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  err << "no command given\n";
  return kExitUsage;
}

}  // namespace confsieve::cli
