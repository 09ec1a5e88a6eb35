#pragma once

// Split-and-match tracking of logical data entries across a text file's
// versions.
//
// Each version is split on line feeds into unique fragments. Between two
// consecutive versions, fragments that disappeared are matched against
// fragments that appeared by longest common substring; a match means one
// entry changed value. Two fragments that ever co-existed in one version are
// never matched, since a file does not hold two values of one entry.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "confsieve/error.hpp"
#include "confsieve/types.hpp"
#include "confsieve/version_store.hpp"

namespace confsieve {

inline constexpr double kDefaultMinMatchRatio = 0.5;
inline constexpr double kBinaryByteFraction = 0.10;

// Split on 0x0A, drop empty pieces, keep the first occurrence of duplicates.
inline std::vector<std::string> split_fragments(std::string_view content) {
  std::vector<std::string> out;
  std::unordered_set<std::string_view> seen;
  std::size_t start = 0;
  while (start <= content.size()) {
    auto nl = content.find('\n', start);
    if (nl == std::string_view::npos) nl = content.size();
    const auto piece = content.substr(start, nl - start);
    if (!piece.empty() && seen.insert(piece).second) out.emplace_back(piece);
    start = nl + 1;
  }
  return out;
}

inline std::vector<std::string> split_fragments(ByteView content) { return split_fragments(as_text(content)); }

// Length of the longest contiguous run shared by a and b. O(|a|*|b|) time,
// O(|b|) space.
inline std::size_t longest_common_substring(std::string_view a, std::string_view b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  std::size_t best = 0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      best = std::max(best, cur[j]);
    }
    std::swap(prev, cur);
  }
  return best;
}

// True when more than 10% of the bytes fall outside tab, LF, CR and
// printable ASCII.
inline bool looks_binary(ByteView content) noexcept {
  std::size_t odd = 0;
  for (std::byte b : content) {
    const auto c = static_cast<unsigned char>(b);
    const bool text = c == 0x09 || c == 0x0A || c == 0x0D || (c >= 0x20 && c <= 0x7E);
    if (!text) ++odd;
  }
  return static_cast<double>(odd) > kBinaryByteFraction * static_cast<double>(content.size());
}

// Which versions each fragment appears in.
class CoexistenceIndex {
 public:
  CoexistenceIndex() = default;

  template <typename Versions>
  explicit CoexistenceIndex(const Versions& fragment_sets) {
    std::size_t v = 0;
    for (const auto& set : fragment_sets) add_version(v++, set);
  }

  void add_version(std::size_t version, const std::vector<std::string>& fragments) {
    for (const auto& f : fragments) {
      auto& list = presence_[f];
      if (list.empty() || list.back() != version) list.push_back(version);
    }
  }

  bool coexisted(const std::string& a, const std::string& b) const {
    if (a == b) return true;
    auto ia = presence_.find(a);
    auto ib = presence_.find(b);
    if (ia == presence_.end() || ib == presence_.end()) return false;
    const auto& x = ia->second;
    const auto& y = ib->second;
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
      if (x[i] == y[j]) return true;
      if (x[i] < y[j]) ++i; else ++j;
    }
    return false;
  }

  const std::vector<std::size_t>* versions_of(const std::string& f) const {
    auto it = presence_.find(f);
    return it == presence_.end() ? nullptr : &it->second;
  }

 private:
  std::unordered_map<std::string, std::vector<std::size_t>> presence_;
};

struct FragmentMatch {
  std::size_t removed = 0;  // index into the removed list
  std::size_t added = 0;    // index into the added list
  std::size_t lcs = 0;

  friend bool operator==(const FragmentMatch&, const FragmentMatch&) = default;
};

// Greedy assignment by descending LCS length; ties go to the earlier added
// fragment, then the earlier removed one. A pair qualifies when
// forbidden(r, a) is false and its LCS is positive and at least min_ratio
// times the longer fragment.
template <typename Forbidden>
std::vector<FragmentMatch> match_changes_unless(const std::vector<std::string>& removed,
                                                const std::vector<std::string>& added, Forbidden&& forbidden,
                                                double min_ratio = kDefaultMinMatchRatio) {
  std::vector<FragmentMatch> candidates;
  for (std::size_t a = 0; a < added.size(); ++a) {
    for (std::size_t r = 0; r < removed.size(); ++r) {
      if (forbidden(r, a)) continue;
      const auto lcs = longest_common_substring(removed[r], added[a]);
      const auto longer = std::max(removed[r].size(), added[a].size());
      if (lcs == 0 || static_cast<double>(lcs) < min_ratio * static_cast<double>(longer)) continue;
      candidates.push_back({r, a, lcs});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const FragmentMatch& x, const FragmentMatch& y) {
    if (x.lcs != y.lcs) return x.lcs > y.lcs;
    if (x.added != y.added) return x.added < y.added;
    return x.removed < y.removed;
  });
  std::vector<bool> used_r(removed.size()), used_a(added.size());
  std::vector<FragmentMatch> out;
  for (const auto& c : candidates) {
    if (used_r[c.removed] || used_a[c.added]) continue;
    used_r[c.removed] = used_a[c.added] = true;
    out.push_back(c);
  }
  return out;
}

// Pairs that ever co-existed in one version are forbidden.
inline std::vector<FragmentMatch> match_changes(const std::vector<std::string>& removed,
                                                const std::vector<std::string>& added,
                                                const CoexistenceIndex& coexistence,
                                                double min_ratio = kDefaultMinMatchRatio) {
  return match_changes_unless(
      removed, added, [&](std::size_t r, std::size_t a) { return coexistence.coexisted(removed[r], added[a]); },
      min_ratio);
}

struct DataFragment {
  std::string bytes;
  std::size_t first_version = 0;
  std::size_t last_version = 0;
};

struct DataEntry {
  std::size_t id = 0;
  std::vector<std::string> fragments;  // values in the order they became current
  std::uint64_t adds = 0;
  std::uint64_t deletes = 0;
  std::uint64_t changes = 0;
  std::uint64_t versions_present = 0;
  std::optional<TimestampNs> first_add;
  std::optional<TimestampNs> first_delete;
  std::optional<TimestampNs> first_change;
  std::vector<TimestampNs> change_times;
};

struct EntryHistoryReport {
  std::string path;
  std::vector<DataEntry> entries;
  std::vector<DataFragment> fragments;
  std::size_t total_versions = 0;
  std::vector<double> lifetimes;  // per entry, versions_present / total_versions
  TimestampNs first_timestamp = 0;
  TimestampNs last_timestamp = 0;
  bool binary = false;  // binary versions are not tracked; entries stay empty
};

struct TextVersion {
  TimestampNs timestamp = 0;
  std::string content;
};

inline EntryHistoryReport entry_history(std::span<const TextVersion> versions, double min_ratio = kDefaultMinMatchRatio) {
  EntryHistoryReport report;
  report.total_versions = versions.size();
  if (versions.empty()) return report;
  report.first_timestamp = versions.front().timestamp;
  report.last_timestamp = versions.back().timestamp;
  for (const auto& v : versions) {
    if (looks_binary(as_bytes(v.content))) {
      report.binary = true;
      return report;
    }
  }

  std::vector<std::vector<std::string>> frags;
  frags.reserve(versions.size());
  for (const auto& v : versions) frags.push_back(split_fragments(std::string_view(v.content)));
  const CoexistenceIndex coexistence(frags);

  auto& entries = report.entries;
  std::unordered_map<std::string, std::size_t> entry_of;

  auto new_entry = [&](const std::string& f, TimestampNs ts) {
    DataEntry e;
    e.id = entries.size();
    e.fragments.push_back(f);
    e.adds = 1;
    e.first_add = ts;
    entry_of[f] = e.id;
    entries.push_back(std::move(e));
  };
  auto record_change = [&](DataEntry& e, const std::string& f, TimestampNs ts) {
    ++e.changes;
    e.fragments.push_back(f);
    e.change_times.push_back(ts);
    if (!e.first_change) e.first_change = ts;
  };

  for (const auto& f : frags[0]) new_entry(f, versions[0].timestamp);

  for (std::size_t t = 1; t < versions.size(); ++t) {
    const TimestampNs ts = versions[t].timestamp;
    const std::unordered_set<std::string_view> prev(frags[t - 1].begin(), frags[t - 1].end());
    const std::unordered_set<std::string_view> cur(frags[t].begin(), frags[t].end());

    std::vector<std::string> removed, fresh;
    for (const auto& f : frags[t - 1])
      if (!cur.contains(f)) removed.push_back(f);
    std::vector<bool> removed_used(removed.size(), false);

    for (const auto& f : frags[t]) {
      if (prev.contains(f)) continue;
      auto known = entry_of.find(f);
      if (known == entry_of.end()) {
        fresh.push_back(f);
        continue;
      }
      // A byte-identical fragment returns to the entry it already belongs to.
      DataEntry& e = entries[known->second];
      bool paired = false;
      for (std::size_t r = 0; r < removed.size(); ++r) {
        if (!removed_used[r] && entry_of.at(removed[r]) == e.id) {
          removed_used[r] = true;
          record_change(e, f, ts);
          paired = true;
          break;
        }
      }
      if (!paired) {
        ++e.adds;
        if (e.fragments.back() != f) e.fragments.push_back(f);
      }
    }

    std::vector<std::string> open_removed;
    std::vector<std::size_t> open_removed_at;
    for (std::size_t r = 0; r < removed.size(); ++r) {
      if (removed_used[r]) continue;
      open_removed.push_back(removed[r]);
      open_removed_at.push_back(r);
    }
    // An added fragment may not join an entry if it ever co-existed with any
    // of that entry's values, not only the one being removed.
    const auto matches = match_changes_unless(
        open_removed, fresh,
        [&](std::size_t r, std::size_t a) {
          const auto& values = entries[entry_of.at(open_removed[r])].fragments;
          return std::any_of(values.begin(), values.end(),
                             [&](const std::string& v) { return coexistence.coexisted(v, fresh[a]); });
        },
        min_ratio);
    std::vector<bool> fresh_used(fresh.size(), false);
    for (const auto& m : matches) {
      removed_used[open_removed_at[m.removed]] = true;
      fresh_used[m.added] = true;
      DataEntry& e = entries[entry_of.at(open_removed[m.removed])];
      record_change(e, fresh[m.added], ts);
      entry_of[fresh[m.added]] = e.id;
    }
    for (std::size_t a = 0; a < fresh.size(); ++a)
      if (!fresh_used[a]) new_entry(fresh[a], ts);
    for (std::size_t r = 0; r < removed.size(); ++r) {
      if (removed_used[r]) continue;
      DataEntry& e = entries[entry_of.at(removed[r])];
      ++e.deletes;
      if (!e.first_delete) e.first_delete = ts;
    }
  }

  for (std::size_t t = 0; t < frags.size(); ++t) {
    std::set<std::size_t> present;
    for (const auto& f : frags[t]) present.insert(entry_of.at(f));
    for (auto id : present) ++entries[id].versions_present;
  }

  std::map<std::string, DataFragment> fragment_table;
  for (std::size_t t = 0; t < frags.size(); ++t) {
    for (const auto& f : frags[t]) {
      auto [it, inserted] = fragment_table.try_emplace(f, DataFragment{f, t, t});
      if (!inserted) it->second.last_version = t;
    }
  }
  for (auto& [_, frag] : fragment_table) report.fragments.push_back(std::move(frag));

  report.lifetimes.reserve(entries.size());
  for (const auto& e : entries)
    report.lifetimes.push_back(static_cast<double>(e.versions_present) / static_cast<double>(versions.size()));
  return report;
}

inline EntryHistoryReport entry_history(const VersionLog& log, double min_ratio = kDefaultMinMatchRatio) {
  if (log.empty()) throw ArgumentError(log.path() + ": empty log");
  std::vector<TextVersion> versions;
  for (const auto& rec : log.records()) {
    const Bytes content = log.read(rec.index);
    versions.push_back({rec.timestamp, std::string(as_text(content))});
  }
  auto report = entry_history(versions, min_ratio);
  report.path = log.path();
  return report;
}

// Entries with at least one change, all of them at or after `phase_start`.
inline std::vector<std::size_t> classify_config_entries(const EntryHistoryReport& report, TimestampNs phase_start) {
  if (report.total_versions == 0 || phase_start < report.first_timestamp || phase_start > report.last_timestamp)
    throw ArgumentError("phase start " + std::to_string(phase_start) + " lies outside the log's time span [" +
                        std::to_string(report.first_timestamp) + ", " + std::to_string(report.last_timestamp) + "]");
  std::vector<std::size_t> out;
  for (const auto& e : report.entries) {
    if (e.changes == 0) continue;
    if (std::all_of(e.change_times.begin(), e.change_times.end(), [&](TimestampNs t) { return t >= phase_start; }))
      out.push_back(e.id);
  }
  return out;
}

// Configuration entries over all entries.
inline double config_state_ratio(const EntryHistoryReport& report, TimestampNs phase_start) {
  if (report.entries.empty()) return 0.0;
  return static_cast<double>(classify_config_entries(report, phase_start).size()) /
         static_cast<double>(report.entries.size());
}

// Empirical CDF of entry lifetimes: (lifetime, fraction of entries <= it).
inline std::vector<std::pair<double, double>> lifetime_cdf(const EntryHistoryReport& report) {
  std::vector<double> sorted = report.lifetimes;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.emplace_back(sorted[i], static_cast<double>(i + 1) / static_cast<double>(sorted.size()));
  }
  return out;
}

}  // namespace confsieve
