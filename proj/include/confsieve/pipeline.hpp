#pragma once

// Glue between the modules: whole-store scoring with filter verdicts, and the
// text formats exchanged between CLI steps.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "confsieve/chunk_similarity.hpp"
#include "confsieve/error.hpp"
#include "confsieve/eval_harness.hpp"
#include "confsieve/filters.hpp"
#include "confsieve/trace_ingest.hpp"
#include "confsieve/trigger_sampler.hpp"
#include "confsieve/version_store.hpp"

namespace confsieve {

using VerdictTable = std::map<std::string, FilterVerdict>;

inline VerdictTable filter_all(const std::map<std::string, AccessStats>& stats, const FilterConfig& cfg) {
  cfg.validate();
  VerdictTable out;
  for (const auto& [path, s] : stats) out.emplace(path, apply_filters(path, s, cfg));
  return out;
}

inline void write_verdicts(std::ostream& out, const VerdictTable& verdicts) {
  for (const auto& [path, v] : verdicts) out << path << '\t' << to_string(v.failed_filter) << '\n';
}

inline VerdictTable read_verdicts(std::istream& in, std::string_view source = "<verdicts>") {
  VerdictTable out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(std::string(source), lineno, "expected path<TAB>verdict");
    auto f = parse_failed_filter(std::string_view(line).substr(tab + 1));
    if (!f) throw ParseError(std::string(source), lineno, "unknown verdict '" + line.substr(tab + 1) + "'");
    out[line.substr(0, tab)] = {*f == FailedFilter::None, *f};
  }
  return out;
}

// Verdict for a stored path. Paths the trace never mentions were never
// opened, so they fail the read-before-write filter.
inline FilterVerdict verdict_for(const VerdictTable& verdicts, const std::string& path) {
  auto it = verdicts.find(path);
  if (it != verdicts.end()) return it->second;
  return {false, FailedFilter::WriteBeforeRead};
}

struct RankedScore {
  SimilarityScore score;
  std::optional<FilterVerdict> verdict;
};

// Scores every log in the store. With verdicts, files that fail a filter get
// score 0 and versions_used 0 without being chunked. Sorted by descending
// score, then ascending path.
inline std::vector<RankedScore> score_store(const VersionStore& store, const TriggerConfig& trig, ScoreMode mode,
                                            const std::optional<VerdictTable>& verdicts = std::nullopt,
                                            const ChunkerConfig& chunker_cfg = {}) {
  trig.validate();
  const Chunker chunker(chunker_cfg);
  std::vector<RankedScore> out;
  for (const auto& path : store.paths()) {
    const VersionLog& log = store.log(path);
    if (log.empty()) continue;
    RankedScore r;
    if (verdicts) r.verdict = verdict_for(*verdicts, path);
    if (r.verdict && !r.verdict->passed) {
      r.score.path = path;
      r.score.mode = mode;
      r.score.score = 0.0;
      r.score.versions_used = 0;
    } else {
      r.score = score_file(log, trig, mode, chunker);
    }
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const RankedScore& a, const RankedScore& b) {
    if (a.score.score != b.score.score) return a.score.score > b.score.score;
    return a.score.path < b.score.path;
  });
  return out;
}

inline std::string format_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9f", s);
  return buf;
}

// `path<TAB>score<TAB>versions_used<TAB>mode`, plus `<TAB>verdict` for rank.
inline void write_scores(std::ostream& out, const std::vector<RankedScore>& scores, bool with_verdicts) {
  for (const auto& r : scores) {
    out << r.score.path << '\t' << format_score(r.score.score) << '\t' << r.score.versions_used << '\t'
        << to_string(r.score.mode);
    if (with_verdicts) out << '\t' << (r.verdict ? to_string(r.verdict->failed_filter) : std::string_view("-"));
    out << '\n';
  }
}

struct ScoreRow {
  std::string path;
  double score = 0.0;
  std::uint64_t versions_used = 0;
  ScoreMode mode = ScoreMode::AllVersions;
};

inline std::vector<ScoreRow> read_scores(std::istream& in, std::string_view source = "<scores>") {
  std::vector<ScoreRow> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string_view> cols;
    std::string_view rest = line;
    for (std::size_t tab; (tab = rest.find('\t')) != std::string_view::npos; rest.remove_prefix(tab + 1))
      cols.push_back(rest.substr(0, tab));
    cols.push_back(rest);
    if (cols.size() != 4 && cols.size() != 5)
      throw ParseError(std::string(source), lineno, "expected path, score, versions_used, mode");
    ScoreRow row;
    row.path = std::string(cols[0]);
    auto [p1, e1] = std::from_chars(cols[1].data(), cols[1].data() + cols[1].size(), row.score);
    if (e1 != std::errc{} || p1 != cols[1].data() + cols[1].size() || row.score < 0.0 || row.score > 1.0)
      throw ParseError(std::string(source), lineno, "score must be a number in [0,1]");
    auto [p2, e2] = std::from_chars(cols[2].data(), cols[2].data() + cols[2].size(), row.versions_used);
    if (e2 != std::errc{} || p2 != cols[2].data() + cols[2].size())
      throw ParseError(std::string(source), lineno, "bad versions_used");
    auto mode = parse_score_mode(cols[3]);
    if (!mode) throw ParseError(std::string(source), lineno, "unknown mode '" + std::string(cols[3]) + "'");
    row.mode = *mode;
    out.push_back(std::move(row));
  }
  return out;
}

// Builds the evaluation table: scores from the score file, filter status from
// the verdicts (all pass when absent), version and byte totals from the store
// (zero without one).
inline ScoreTable build_score_table(const std::vector<ScoreRow>& rows, const std::optional<VerdictTable>& verdicts,
                                    const VersionStore* store) {
  ScoreTable table;
  for (const auto& row : rows) {
    ScoredFile f;
    f.score = row.score;
    f.passed_filters = verdicts ? verdict_for(*verdicts, row.path).passed : true;
    if (const auto* log = store ? store->find(row.path) : nullptr) {
      f.versions = log->size();
      f.bytes = log->total_bytes();
    }
    table[row.path] = f;
  }
  return table;
}

}  // namespace confsieve
