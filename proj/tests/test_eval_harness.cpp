#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "corpus.hpp"
#include "support.hpp"

using namespace confsieve;
using confsieve::testing::TempDir;

namespace {

WorkloadSpec empty_spec() {
  WorkloadSpec s;
  s.config = s.task = s.time = s.temp = s.userdata = 0;
  return s;
}

std::uint64_t dir_digest(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    acc += std::filesystem::relative(f, dir).string() + '\n';
    acc.append(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return fnv1a64(as_bytes(acc));
}

// Straight recount of the metric definitions.
Metrics recount(const ScoreTable& scores, const LabelTable& labels, double t) {
  Metrics m;
  for (const auto& [path, cfg] : labels) {
    const auto& s = scores.at(path);
    if (cfg && s.score > t) m.tp++;
    if (cfg && !(s.score > t)) m.fn++;
    if (!cfg && s.passed_filters && s.score > t) m.fp++;
    if (!cfg && s.passed_filters) m.surviving_nonconfig++;
    if (!cfg) m.versions_total += s.versions, m.bytes_total += s.bytes;
    if (!cfg && s.score <= t) m.versions_eliminated += s.versions, m.bytes_saved += s.bytes;
  }
  return m;
}

}  // namespace

TEST(GenerateWorkload, EmptySpecGivesEmptyCorpus) {
  TempDir dir;
  auto w = generate_workload(empty_spec());
  EXPECT_TRUE(w.files.empty());
  EXPECT_TRUE(w.labels.empty());
  EXPECT_TRUE(w.trace.empty());
  write_workload(w, dir.path());
  EXPECT_TRUE(VersionStore::open(dir / "store").empty());
}

TEST(GenerateWorkload, CountsByConstruction) {
  auto spec = empty_spec();
  spec.config = 5;
  spec.task = 20;
  auto w = generate_workload(spec, 7);
  EXPECT_EQ(w.labels.size(), 25u);
  EXPECT_EQ(std::count_if(w.labels.begin(), w.labels.end(), [](const auto& l) { return l.is_config; }), 5);
  std::set<std::string> unique;
  for (const auto& l : w.labels) EXPECT_TRUE(unique.insert(l.path).second);
}

TEST(GenerateWorkload, SameSeedSameBytes) {
  TempDir a, b, c;
  WorkloadSpec spec;
  write_workload(generate_workload(spec, 3), a.path());
  write_workload(generate_workload(spec, 3), b.path());
  write_workload(generate_workload(spec, 4), c.path());
  EXPECT_EQ(dir_digest(a.path()), dir_digest(b.path()));
  EXPECT_NE(dir_digest(a.path()), dir_digest(c.path()));
}

TEST(GenerateWorkload, ArchetypeShapes) {
  WorkloadSpec spec;
  auto w = generate_workload(spec);
  FilterConfig home;
  home.home_prefixes = {spec.home};
  for (const auto& f : w.files) {
    ASSERT_FALSE(f.versions.empty());
    for (std::size_t i = 1; i < f.versions.size(); ++i) EXPECT_LE(f.versions[i - 1].timestamp, f.versions[i].timestamp);
    const bool unlinked = std::any_of(w.trace.begin(), w.trace.end(),
                                      [&](const AccessEvent& e) { return e.path == f.path && e.op == AccessOp::Unlink; });
    EXPECT_EQ(unlinked, f.archetype == Archetype::Temp) << f.path;
    if (f.archetype == Archetype::UserData) {
      EXPECT_FALSE(passes_user_data(f.path, home)) << f.path;
    }
    if (f.archetype == Archetype::Config) {
      EXPECT_GE(f.versions.size(), spec.min_versions);
      EXPECT_LE(f.versions.size(), spec.max_versions);
    }
  }
  for (std::size_t i = 1; i < w.trace.size(); ++i) EXPECT_LE(w.trace[i - 1].timestamp, w.trace[i].timestamp);
}

TEST(GenerateWorkload, TaskVersionsReplaceMostLines) {
  auto spec = empty_spec();
  spec.task = 5;
  auto w = generate_workload(spec, 9);
  for (const auto& f : w.files) {
    for (std::size_t i = 1; i < f.versions.size(); ++i) {
      auto prev = split_fragments(std::string_view(f.versions[i - 1].content));
      auto cur = split_fragments(std::string_view(f.versions[i].content));
      std::set<std::string> p(prev.begin(), prev.end());
      std::size_t kept = 0;
      for (const auto& l : cur) kept += p.count(l);
      EXPECT_LE(kept * 10, cur.size() * 4) << f.path << " v" << i;
    }
  }
}

TEST(WorkloadSpecFile, ParsesKeys) {
  std::istringstream in("# corpus\nconfig=3\ntask=4\ntime=0\ntemp=1\nuserdata=2\nseed=9\nhome=/home/x\n");
  auto spec = parse_workload_spec(in);
  EXPECT_EQ(spec.config, 3u);
  EXPECT_EQ(spec.total_files(), 10u);
  EXPECT_EQ(spec.seed, 9u);
  EXPECT_EQ(spec.home, "/home/x");
  std::istringstream bad("colour=3\n");
  EXPECT_THROW(parse_workload_spec(bad), ParseError);
  std::istringstream inverted("min_versions=10\nmax_versions=5\n");
  EXPECT_THROW(parse_workload_spec(inverted), ParseError);
}

TEST(Labels, RoundTrip) {
  std::vector<GroundTruthLabel> labels{{"/a", true}, {"/b", false}};
  std::stringstream buf;
  write_labels(buf, labels);
  EXPECT_EQ(buf.str(), "/a\tconfig\n/b\tnonconfig\n");
  auto back = read_labels(buf);
  EXPECT_EQ(back, (LabelTable{{"/a", true}, {"/b", false}}));
  std::istringstream bad("/a\tmaybe\n");
  EXPECT_THROW(read_labels(bad), ParseError);
}

TEST(Confusion, DirectCountingExample) {
  const ScoreTable scores{{"a", {0.9, true, 3, 30}}, {"b", {0.85, true, 4, 40}}, {"c", {0.5, true, 5, 50}}};
  const LabelTable labels{{"a", true}, {"b", false}, {"c", false}};
  auto m = confusion(scores, labels, 0.8);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 0u);
  EXPECT_EQ(m.versions_eliminated, 5u);
  EXPECT_EQ(m.versions_total, 9u);
  EXPECT_EQ(m.bytes_saved, 50u);
  EXPECT_DOUBLE_EQ(m.fpr(), 0.5);
}

TEST(Confusion, ThresholdOneKeepsNothing) {
  const ScoreTable scores{{"a", {1.0, true, 1, 1}}, {"b", {1.0, true, 1, 1}}};
  const LabelTable labels{{"a", true}, {"b", false}};
  auto m = confusion(scores, labels, 1.0);
  EXPECT_EQ(m.fp, 0u);
  EXPECT_EQ(m.tp, 0u);
}

TEST(Confusion, ThresholdZeroEliminatesNothing) {
  const ScoreTable scores{{"a", {0.3, true, 1, 1}}, {"b", {0.1, true, 2, 2}}};
  const LabelTable labels{{"a", true}, {"b", false}};
  auto m = confusion(scores, labels, 0.0);
  EXPECT_EQ(m.fn, 0u);
  EXPECT_EQ(m.versions_eliminated, 0u);
}

TEST(Confusion, FilteredFilesDoNotCountAsFalsePositives) {
  const ScoreTable scores{{"kept", {0.9, true, 1, 1}}, {"filtered", {0.0, false, 7, 70}}};
  const LabelTable labels{{"kept", false}, {"filtered", false}};
  auto m = confusion(scores, labels, 0.5);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.surviving_nonconfig, 1u);
  EXPECT_EQ(m.versions_eliminated, 7u);
  EXPECT_EQ(m.versions_total, 8u);
}

TEST(Confusion, MismatchedKeysNameThePaths) {
  const ScoreTable scores{{"a", {}}, {"extra", {}}};
  const LabelTable labels{{"a", true}, {"missing", false}};
  try {
    confusion(scores, labels, 0.5);
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("extra"), std::string::npos);
  }
}

TEST(Confusion, AgreesWithRecount) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    ScoreTable scores;
    LabelTable labels;
    const auto n = 1 + rng() % 50;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto path = "/f" + std::to_string(i);
      scores[path] = {static_cast<double>(rng() % 21) / 20.0, rng() % 4 != 0, rng() % 50, rng() % 5000};
      labels[path] = rng() % 3 == 0;
    }
    const double t = static_cast<double>(rng() % 21) / 20.0;
    const auto got = confusion(scores, labels, t);
    const auto want = recount(scores, labels, t);
    EXPECT_EQ(std::tie(got.tp, got.fn, got.fp, got.surviving_nonconfig),
              std::tie(want.tp, want.fn, want.fp, want.surviving_nonconfig));
    EXPECT_EQ(std::tie(got.versions_eliminated, got.versions_total, got.bytes_saved, got.bytes_total),
              std::tie(want.versions_eliminated, want.versions_total, want.bytes_saved, want.bytes_total));
    EXPECT_EQ(got.tp + got.fn, static_cast<std::uint64_t>(std::count_if(labels.begin(), labels.end(), [](auto& l) { return l.second; })));
  }
}

TEST(Roc, DefaultThresholds) {
  EXPECT_EQ(kDefaultThresholds, (std::vector<double>{0.95, 0.9, 0.8, 0.7, 0.6}));
  const ScoreTable scores{{"a", {0.99, true, 1, 1}}, {"b", {0.1, true, 1, 1}}};
  const LabelTable labels{{"a", true}, {"b", false}};
  auto roc = roc_curve(scores, labels, kDefaultThresholds);
  ASSERT_EQ(roc.points.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(roc.points[i].threshold, kDefaultThresholds[i]);
}

TEST(Roc, SeparableScoresReachThePerfectCorner) {
  const ScoreTable scores{{"c1", {0.97, true, 1, 1}}, {"c2", {0.92, true, 1, 1}}, {"n1", {0.4, true, 1, 1}},
                          {"n2", {0.85, true, 1, 1}}};
  const LabelTable labels{{"c1", true}, {"c2", true}, {"n1", false}, {"n2", false}};
  auto roc = roc_curve(scores, labels, kDefaultThresholds);
  EXPECT_TRUE(std::any_of(roc.points.begin(), roc.points.end(),
                          [](const Metrics& m) { return m.fpr() == 0.0 && m.tpr() == 1.0; }));
  EXPECT_EQ(roc.best_threshold, std::optional<double>(0.9));
}

TEST(Roc, RatesAreMonotoneInThreshold) {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreTable scores;
    LabelTable labels;
    for (int i = 0; i < 40; ++i) {
      const auto path = "/f" + std::to_string(i);
      scores[path] = {static_cast<double>(rng() % 101) / 100.0, rng() % 5 != 0, 1, 1};
      labels[path] = rng() % 2 == 0;
    }
    std::vector<double> ts;
    for (int i = 0; i <= 20; ++i) ts.push_back(i / 20.0);
    auto roc = roc_curve(scores, labels, ts);
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      EXPECT_LE(roc.points[i].tpr(), roc.points[i - 1].tpr());
      EXPECT_LE(roc.points[i].fpr(), roc.points[i - 1].fpr());
    }
  }
}

TEST(Roc, LabelIndependentScoresHugTheDiagonal) {
  std::mt19937_64 rng(63);
  ScoreTable scores;
  LabelTable labels;
  for (int i = 0; i < 200; ++i) {
    const auto path = "/f" + std::to_string(i);
    scores[path] = {static_cast<double>(rng() >> 11) * 0x1.0p-53, true, 1, 1};
    labels[path] = i % 2 == 0;
  }
  for (const auto& m : roc_curve(scores, labels, kDefaultThresholds).points)
    EXPECT_LE(std::abs(m.tpr() - m.fpr()), 0.15) << m.threshold;
}

TEST(Roc, CsvLayout) {
  const ScoreTable scores{{"a", {0.9, true, 2, 20}}, {"b", {0.5, true, 3, 30}}};
  const LabelTable labels{{"a", true}, {"b", false}};
  std::ostringstream out;
  write_roc_csv(out, roc_curve(scores, labels, {0.8}));
  EXPECT_EQ(out.str(),
            "threshold,tp,fn,fp,tpr,fpr,versions_eliminated_pct,bytes_saved_pct\n"
            "0.8,1,0,0,1.0000,0.0000,100.00,100.00\n");
}

TEST(Corpus, FiltersRemoveTempAndUserDataButNoConfig) {
  TempDir dir;
  WorkloadSpec spec;
  auto run = confsieve::testing::build_corpus(spec, dir.path());
  for (const auto& path : run.by_archetype[Archetype::Temp]) EXPECT_FALSE(verdict_for(run.verdicts, path).passed) << path;
  for (const auto& path : run.by_archetype[Archetype::UserData]) EXPECT_FALSE(verdict_for(run.verdicts, path).passed) << path;
  for (const auto& path : run.by_archetype[Archetype::Config]) EXPECT_TRUE(verdict_for(run.verdicts, path).passed) << path;
  for (const auto& [path, is_config] : run.labels)
    if (!verdict_for(run.verdicts, path).passed) {
      EXPECT_FALSE(is_config) << path;
    }
}

TEST(Corpus, ConfigFilesScoreHighOthersLow) {
  TempDir dir;
  auto run = confsieve::testing::build_corpus(WorkloadSpec{}, dir.path());
  auto store = VersionStore::open(dir / "store");
  auto table = confsieve::testing::score_corpus(run, store, ScoreMode::Sampled);
  for (const auto& path : run.by_archetype[Archetype::Config]) EXPECT_GT(table.at(path).score, 0.8) << path;
  for (const auto& path : run.by_archetype[Archetype::Time]) EXPECT_LT(table.at(path).score, 0.5) << path;
}
