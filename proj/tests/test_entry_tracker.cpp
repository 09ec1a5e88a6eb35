#include <gtest/gtest.h>

#include <random>
#include <set>

#include "confsieve/entry_tracker.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace confsieve;
using V = std::vector<std::string>;

namespace {

std::vector<TextVersion> text_log(std::initializer_list<std::pair<double, std::string>> versions) {
  std::vector<TextVersion> out;
  for (const auto& [h, body] : versions) out.push_back({static_cast<TimestampNs>(h * kNsPerHour), body});
  return out;
}

const DataEntry& entry_with(const EntryHistoryReport& r, const std::string& fragment) {
  for (const auto& e : r.entries)
    if (std::find(e.fragments.begin(), e.fragments.end(), fragment) != e.fragments.end()) return e;
  throw std::runtime_error("no entry holds " + fragment);
}

// Six versions with four planted entries: one value change after the phase
// boundary at 2.5h, one addition, one deletion, one stable line.
std::vector<TextVersion> planted_log() {
  const std::string base = "stable=yes\nvolume=3\nold_feature=on\n";
  const std::string changed = "stable=yes\nvolume=7\nold_feature=on\n";
  return text_log({{0, base},
                   {1, base},
                   {2, base},
                   {3, changed},
                   {4, changed + "new_feature=off\n"},
                   {5, "stable=yes\nvolume=7\nnew_feature=off\n"}});
}

}  // namespace

TEST(SplitFragments, DropsEmptiesAndDuplicates) {
  EXPECT_EQ(split_fragments("a\nb\na\n"), (V{"a", "b"}));
  EXPECT_EQ(split_fragments(""), V{});
  EXPECT_EQ(split_fragments("no newline here"), (V{"no newline here"}));
  EXPECT_EQ(split_fragments("\n\nx\n\n"), (V{"x"}));
  EXPECT_EQ(split_fragments("b\r\na\n"), (V{"b\r", "a"}));
}

TEST(LongestCommonSubstring, Examples) {
  EXPECT_EQ(longest_common_substring("abcdef", "zcdefg"), 4u);
  EXPECT_EQ(longest_common_substring("same text", "same text"), 9u);
  EXPECT_EQ(longest_common_substring("abc", "xyz"), 0u);
  EXPECT_EQ(longest_common_substring("", "xyz"), 0u);
}

TEST(LongestCommonSubstring, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 2000; ++trial) {
    auto word = [&] {
      std::string s(rng() % 25, ' ');
      for (auto& c : s) c = static_cast<char>('a' + rng() % 3);
      return s;
    };
    const auto a = word(), b = word();
    EXPECT_EQ(longest_common_substring(a, b), oracle::lcs_exhaustive(a, b)) << a << " / " << b;
  }
}

TEST(LooksBinary, TenPercentThreshold) {
  std::string text(100, 'a');
  EXPECT_FALSE(looks_binary(as_bytes(text)));
  for (int i = 0; i < 10; ++i) text[i] = '\x01';
  EXPECT_FALSE(looks_binary(as_bytes(text)));
  text[10] = '\x02';
  EXPECT_TRUE(looks_binary(as_bytes(text)));
  EXPECT_FALSE(looks_binary(as_bytes("tab\there\r\n")));
}

TEST(MatchChanges, ValueEditOfOnePreference) {
  const V removed{"user_pref(\"javascript.enabled\", true);"};
  const V added{"user_pref(\"javascript.enabled\", false);"};
  auto m = match_changes(removed, added, CoexistenceIndex{});
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].removed, 0u);
  EXPECT_EQ(m[0].added, 0u);
}

TEST(MatchChanges, NothingInCommon) {
  EXPECT_TRUE(match_changes({"aaaa"}, {"bbbb"}, CoexistenceIndex{}).empty());
}

TEST(MatchChanges, RatioBoundaryIsInclusive) {
  // LCS 4 of max length 8: exactly half.
  EXPECT_EQ(match_changes({"abcdWXYZ"}, {"abcdQRST"}, CoexistenceIndex{}).size(), 1u);
  EXPECT_TRUE(match_changes({"abcWXYZ1"}, {"abcQRST2"}, CoexistenceIndex{}).empty());
}

TEST(MatchChanges, CoexistingFragmentsNeverMatch) {
  // timeout=100 and timeout=200 both appear in version 2.
  const std::vector<V> versions{{"timeout=100"}, {"timeout=200"}, {"timeout=100", "timeout=200"}, {"timeout=200"}};
  const CoexistenceIndex co(versions);
  EXPECT_TRUE(co.coexisted("timeout=100", "timeout=200"));
  EXPECT_TRUE(match_changes({"timeout=100"}, {"timeout=200"}, co).empty());
  EXPECT_EQ(match_changes({"timeout=100"}, {"timeout=200"}, CoexistenceIndex{}).size(), 1u);

  std::vector<TextVersion> log;
  for (std::size_t i = 0; i < versions.size(); ++i) {
    std::string body;
    for (const auto& f : versions[i]) body += f + "\n";
    log.push_back({static_cast<TimestampNs>(i), body});
  }
  auto r = entry_history(log);
  for (const auto& e : r.entries) EXPECT_EQ(e.changes, 0u);
  EXPECT_EQ(r.entries.size(), 2u);
}

TEST(MatchChanges, GreedyByLongestOverlapThenAddedOrder) {
  const V removed{"colour=blue-green", "colour=red"};
  const V added{"colour=blue-grey", "colour=rad"};
  auto m = match_changes(removed, added, CoexistenceIndex{});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], (FragmentMatch{0, 0, longest_common_substring(removed[0], added[0])}));
  EXPECT_EQ(m[1].removed, 1u);
  EXPECT_EQ(m[1].added, 1u);

  // Equal overlaps: the earlier added fragment wins the single removed one.
  auto tie = match_changes({"k=1"}, {"k=2", "k=3"}, CoexistenceIndex{});
  ASSERT_EQ(tie.size(), 1u);
  EXPECT_EQ(tie[0].added, 0u);
}

TEST(MatchChanges, EachFragmentUsedAtMostOnce) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 300; ++trial) {
    auto frag = [&] {
      std::string s = "key" + std::to_string(rng() % 4) + "=";
      for (auto n = rng() % 6; n > 0; --n) s += static_cast<char>('a' + rng() % 4);
      return s;
    };
    V removed, added;
    for (auto n = rng() % 6; n > 0; --n) removed.push_back(frag());
    for (auto n = rng() % 6; n > 0; --n) added.push_back(frag());
    auto m = match_changes(removed, added, CoexistenceIndex{});
    std::set<std::size_t> r_used, a_used;
    for (const auto& x : m) {
      EXPECT_TRUE(r_used.insert(x.removed).second);
      EXPECT_TRUE(a_used.insert(x.added).second);
      EXPECT_GE(2 * x.lcs, std::max(removed[x.removed].size(), added[x.added].size()));
    }
    // Conservation: unmatched + matched accounts for every fragment.
    EXPECT_EQ(removed.size() - r_used.size() + m.size(), removed.size());
    EXPECT_EQ(added.size() - a_used.size() + m.size(), added.size());
  }
}

TEST(EntryHistory, LifetimeIsAFractionOfVersions) {
  const std::string rest = "alpha=1\nbeta=2\n";
  auto r = entry_history(text_log({{0, rest + "line L\n"},
                                   {1, rest + "line L\n"},
                                   {2, rest + "line L\n"},
                                   {3, rest + "line L\n"},
                                   {4, rest}}));
  const auto& e = entry_with(r, "line L");
  EXPECT_DOUBLE_EQ(r.lifetimes[e.id], 0.8);
  EXPECT_EQ(e.deletes, 1u);
}

TEST(EntryHistory, OneValueChange) {
  auto r = entry_history(text_log({{0, "k=1"}, {1, "k=2"}, {2, "k=2"}}));
  ASSERT_EQ(r.entries.size(), 1u);
  const auto& e = r.entries[0];
  EXPECT_EQ(e.adds, 1u);
  EXPECT_EQ(e.changes, 1u);
  EXPECT_EQ(e.deletes, 0u);
  EXPECT_EQ(e.versions_present, 3u);
  EXPECT_EQ(e.fragments, (V{"k=1", "k=2"}));
}

TEST(EntryHistory, UnchangingLogHasFullLifetimes) {
  const std::string body = "a=1\nb=2\nc=3\n";
  auto r = entry_history(text_log({{0, body}, {1, body}, {2, body}, {3, body}}));
  ASSERT_EQ(r.entries.size(), 3u);
  for (const auto& e : r.entries) {
    EXPECT_EQ(e.changes, 0u);
    EXPECT_EQ(e.adds, 1u);
    EXPECT_EQ(e.first_add, std::optional<TimestampNs>(0));
  }
  for (double l : r.lifetimes) EXPECT_EQ(l, 1.0);
}

TEST(EntryHistory, ReaddedFragmentRejoinsItsEntry) {
  auto r = entry_history(text_log({{0, "x=1\nkeep\n"}, {1, "keep\n"}, {2, "x=1\nkeep\n"}}));
  ASSERT_EQ(r.entries.size(), 2u);
  const auto& e = entry_with(r, "x=1");
  EXPECT_EQ(e.adds, 2u);
  EXPECT_EQ(e.deletes, 1u);
  EXPECT_EQ(e.changes, 0u);
  EXPECT_EQ(e.versions_present, 2u);
}

TEST(EntryHistory, ChangeBackToAnOldValue) {
  auto r = entry_history(text_log({{0, "mode=fast"}, {1, "mode=slow"}, {2, "mode=fast"}}));
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0].changes, 2u);
  EXPECT_EQ(r.entries[0].versions_present, 3u);
}

TEST(EntryHistory, BinaryVersionsAreNotTracked) {
  std::string blob(64, '\0');
  auto r = entry_history(text_log({{0, "k=1\n"}, {1, blob}}));
  EXPECT_TRUE(r.binary);
  EXPECT_TRUE(r.entries.empty());
}

TEST(EntryHistory, PlantedEntries) {
  const auto log = planted_log();
  auto r = entry_history(log);
  ASSERT_EQ(r.entries.size(), 4u);
  ASSERT_EQ(r.total_versions, 6u);

  const auto& stable = entry_with(r, "stable=yes");
  EXPECT_EQ(std::tie(stable.adds, stable.deletes, stable.changes, stable.versions_present),
            std::make_tuple(1u, 0u, 0u, 6u));
  const auto& volume = entry_with(r, "volume=3");
  EXPECT_EQ(std::tie(volume.adds, volume.deletes, volume.changes, volume.versions_present),
            std::make_tuple(1u, 0u, 1u, 6u));
  EXPECT_EQ(volume.fragments, (V{"volume=3", "volume=7"}));
  const auto& added = entry_with(r, "new_feature=off");
  EXPECT_EQ(std::tie(added.adds, added.deletes, added.changes, added.versions_present),
            std::make_tuple(1u, 0u, 0u, 2u));
  const auto& removed = entry_with(r, "old_feature=on");
  EXPECT_EQ(std::tie(removed.adds, removed.deletes, removed.changes, removed.versions_present),
            std::make_tuple(1u, 1u, 0u, 5u));

  EXPECT_DOUBLE_EQ(r.lifetimes[stable.id], 1.0);
  EXPECT_DOUBLE_EQ(r.lifetimes[volume.id], 1.0);
  EXPECT_DOUBLE_EQ(r.lifetimes[added.id], 2.0 / 6.0);
  EXPECT_DOUBLE_EQ(r.lifetimes[removed.id], 5.0 / 6.0);

  EXPECT_EQ(classify_config_entries(r, static_cast<TimestampNs>(2.5 * kNsPerHour)), std::vector<std::size_t>{volume.id});
  EXPECT_DOUBLE_EQ(config_state_ratio(r, static_cast<TimestampNs>(2.5 * kNsPerHour)), 0.25);
}

TEST(Classify, ChangesOnBothSidesOfThePhaseAreExcluded) {
  auto r = entry_history(text_log({{0, "a=1\nb=1\nc=1\n"}, {1, "a=2\nb=1\nc=1\n"}, {3, "a=3\nb=2\nc=1\n"}}));
  const auto phase = 2 * kNsPerHour;
  auto ids = classify_config_entries(r, phase);
  EXPECT_EQ(ids, std::vector<std::size_t>{entry_with(r, "b=1").id});
  // Changes exactly at the boundary count as inside the phase.
  EXPECT_EQ(classify_config_entries(r, 3 * kNsPerHour), std::vector<std::size_t>{entry_with(r, "b=1").id});
  EXPECT_EQ(classify_config_entries(r, 0).size(), 2u);
}

TEST(Classify, PhaseOutsideTheLogIsAnError) {
  auto r = entry_history(text_log({{1, "a=1"}, {2, "a=2"}}));
  EXPECT_THROW(classify_config_entries(r, 0), ArgumentError);
  EXPECT_THROW(classify_config_entries(r, 3 * kNsPerHour), ArgumentError);
}

TEST(EntryHistory, NoEntryHoldsCoexistingFragments) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::string> lines;
    for (int i = 0; i < 8; ++i) lines.push_back("opt" + std::to_string(i) + "=" + std::to_string(rng() % 5));
    std::vector<TextVersion> log;
    for (int v = 0; v < 12; ++v) {
      for (auto& l : lines)
        if (rng() % 4 == 0) l = l.substr(0, l.find('=') + 1) + std::to_string(rng() % 5);
      if (rng() % 3 == 0) lines.push_back("opt" + std::to_string(rng() % 10) + "=" + std::to_string(rng() % 5));
      if (rng() % 3 == 0 && !lines.empty()) lines.erase(lines.begin() + static_cast<long>(rng() % lines.size()));
      std::string body;
      for (const auto& l : lines) body += l + "\n";
      log.push_back({v, body});
    }
    auto r = entry_history(log);
    std::vector<std::set<std::string>> sets;
    for (const auto& v : log) {
      auto f = split_fragments(std::string_view(v.content));
      sets.emplace_back(f.begin(), f.end());
    }
    std::size_t present_total = 0;
    for (const auto& e : r.entries) {
      // A value can become current again, so compare distinct values only.
      const std::set<std::string> distinct(e.fragments.begin(), e.fragments.end());
      const std::vector<std::string> values(distinct.begin(), distinct.end());
      for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t j = i + 1; j < values.size(); ++j)
          for (const auto& s : sets)
            EXPECT_FALSE(s.count(values[i]) && s.count(values[j])) << values[i] << " / " << values[j];
      EXPECT_LE(e.versions_present, r.total_versions);
      present_total += e.versions_present;
    }
    for (double l : r.lifetimes) {
      EXPECT_GT(l, 0.0);
      EXPECT_LE(l, 1.0);
    }
    // Each version's fragments belong to distinct entries.
    std::size_t fragment_total = 0;
    for (const auto& s : sets) fragment_total += s.size();
    EXPECT_EQ(present_total, fragment_total);
  }
}

TEST(LifetimeCdf, StepsAtDistinctLifetimes) {
  EntryHistoryReport r;
  r.lifetimes = {1.0, 0.5, 1.0, 0.25};
  auto cdf = lifetime_cdf(r);
  ASSERT_EQ(cdf.size(), 3u);
  EXPECT_EQ(cdf[0], std::make_pair(0.25, 0.25));
  EXPECT_EQ(cdf[1], std::make_pair(0.5, 0.5));
  EXPECT_EQ(cdf[2], std::make_pair(1.0, 1.0));
}

TEST(EntryHistory, ReadsAVersionLog) {
  confsieve::testing::TempDir dir;
  auto store = VersionStore::open(dir.path());
  for (const auto& v : planted_log()) store.append_version("/home/u/.app/rc", v.timestamp, as_bytes(v.content));
  auto r = entry_history(store.log("/home/u/.app/rc"));
  EXPECT_EQ(r.path, "/home/u/.app/rc");
  EXPECT_EQ(r.entries.size(), 4u);
}
