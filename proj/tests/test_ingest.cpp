#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stdgnn/ingest.hpp"
#include "test_helpers.hpp"

namespace stdgnn {
namespace {

using testing::TempDir;

constexpr std::int64_t kMonday = 1609718400;  // 2021-01-04 00:00 UTC
constexpr std::int64_t kYear = 365 * 86400;

std::string report(const std::string& bug, std::int64_t ts, const std::string& text = "crash in editor",
                   const std::string& to = "") {
  std::string to_field = to.empty() ? "null" : "\"" + to + "\"";
  return R"({"bug":")" + bug + R"(","kind":"report","from":null,"to":)" + to_field +
         R"(,"ts":)" + std::to_string(ts) + R"(,"text":")" + text + "\"}\n";
}

std::string toss(const std::string& bug, const std::string& from, const std::string& to, std::int64_t ts) {
  return R"({"bug":")" + bug + R"(","kind":"toss","from":")" + from + R"(","to":")" + to +
         R"(","ts":)" + std::to_string(ts) + "}\n";
}

std::string fix(const std::string& bug, const std::string& to, std::int64_t ts) {
  return R"({"bug":")" + bug + R"(","kind":"fix","from":null,"to":")" + to + R"(","ts":)" +
         std::to_string(ts) + "}\n";
}

EventLog parse_string(const std::string& content, ParseStats* stats = nullptr) {
  TempDir dir;
  return parse_events(dir.write("log.jsonl", content), stats);
}

/// `fixes` bugs fixed by `dev`, one per day starting at `start`.
std::string fixes_by(const std::string& dev, int fixes, std::int64_t start, const std::string& tag) {
  std::string out;
  for (int i = 0; i < fixes; ++i) {
    const auto bug = tag + dev + "_" + std::to_string(i);
    out += report(bug, start + i * 86400);
    out += fix(bug, dev, start + i * 86400 + 60);
  }
  return out;
}

TEST(Tokenize, LowercasesSplitsAndDropsStopWords) {
  EXPECT_EQ(tokenize("The NullPointer in x.y, CRASHES on-save!"),
            (std::vector<std::string>{"nullpointer", "crashes", "save"}));
  EXPECT_TRUE(tokenize("a I of").empty());
}

TEST(ParseEvents, EmptyFile) {
  const auto log = parse_string("");
  EXPECT_TRUE(log.events.empty());
  EXPECT_TRUE(log.reports.empty());
}

TEST(ParseEvents, ThreeLineLogBuildsHolderSequence) {
  const auto log = parse_string(report("b1", 0) + toss("b1", "d1", "d2", 10) + fix("b1", "d2", 20));
  ASSERT_EQ(log.events.size(), 3u);
  const auto& r = log.reports.at("b1");
  EXPECT_EQ(r.holder_sequence, (std::vector<std::string>{"d1", "d2"}));
  EXPECT_EQ(r.fixer, "d2");
  EXPECT_EQ(r.fixer, r.holder_sequence.back());
  EXPECT_EQ(r.tokens, (std::vector<std::string>{"crash", "editor"}));
}

TEST(ParseEvents, ShuffledLinesGiveIdenticalLog) {
  const std::string a = report("b1", 0) + toss("b1", "d1", "d2", 10) + fix("b1", "d2", 20) +
                        report("b2", 5, "ui freeze", "d3") + fix("b2", "d3", 7);
  const std::string b = fix("b2", "d3", 7) + fix("b1", "d2", 20) + report("b2", 5, "ui freeze", "d3") +
                        toss("b1", "d1", "d2", 10) + report("b1", 0);
  EXPECT_EQ(parse_string(a), parse_string(b));
}

TEST(ParseEvents, MalformedLinesSkippedAndCounted) {
  std::string content;
  for (int i = 0; i < 10; ++i) {
    const auto bug = "b" + std::to_string(i);
    content += report(bug, i) + fix(bug, "d1", i + 1);
  }
  content += R"({"bug":"bx","kind":"reopen","ts":3})" "\n";
  content += "\n";
  ParseStats stats;
  const auto log = parse_string(content, &stats);
  EXPECT_EQ(stats.malformed, 1u);
  EXPECT_EQ(stats.blank, 1u);
  EXPECT_EQ(log.events.size(), 20u);
}

TEST(ParseEvents, TooManyMalformedIsFatal) {
  std::string content = report("b1", 0) + fix("b1", "d1", 1);
  content += "not json\n";
  EXPECT_THROW(parse_string(content), RuntimeFailure);
}

TEST(ParseEvents, MissingFileIsFatal) {
  EXPECT_THROW(parse_events("/nonexistent/events.jsonl"), RuntimeFailure);
}

TEST(ParseEvents, BugsWithoutDefiniteFixerAreDropped) {
  ParseStats stats;
  std::string content;
  for (int i = 0; i < 20; ++i) content += report("ok" + std::to_string(i), i) + fix("ok" + std::to_string(i), "d1", i + 1);
  content += report("open", 0) + toss("open", "d1", "d2", 3);
  content += report("twice", 0) + fix("twice", "d1", 3) + fix("twice", "d2", 4);
  content += fix("orphan", "d1", 3);
  const auto log = parse_string(content, &stats);
  EXPECT_EQ(log.reports.size(), 20u);
  EXPECT_EQ(stats.bugs_without_fixer, 1u);
  EXPECT_EQ(stats.bugs_with_multiple_fixes, 1u);
  EXPECT_EQ(stats.bugs_without_report, 1u);
  for (const auto& e : log.events) EXPECT_TRUE(log.reports.count(e.bug_id));
}

TEST(FilterInactive, ActiveDevelopersUnchanged) {
  const auto log = parse_string(fixes_by("d1", 6, kMonday, "a") + fixes_by("d2", 7, kMonday, "b"));
  EXPECT_EQ(filter_inactive(log, 5), log);
}

TEST(FilterInactive, FiveFixesInAYearIsInactive) {
  std::string content = fixes_by("d1", 6, kMonday, "a") + fixes_by("lazy", 5, kMonday, "b");
  content += report("t1", kMonday + 10) + toss("t1", "lazy", "d1", kMonday + 20) + fix("t1", "d1", kMonday + 30);
  const auto log = parse_string(content);
  FilterStats stats;
  const auto filtered = filter_inactive(log, 5, &stats);
  EXPECT_EQ(stats.removed_developers, std::vector<std::string>{"lazy"});
  EXPECT_EQ(filtered.developers(), std::vector<std::string>{"d1"});
  EXPECT_EQ(filtered.reports.size(), 7u);
  EXPECT_EQ(filtered.count(EventKind::Toss), 0u);
  EXPECT_EQ(filtered.reports.at("t1").holder_sequence, std::vector<std::string>{"d1"});
}

TEST(FilterInactive, OneBusyYearIsEnough) {
  const auto log = parse_string(fixes_by("d1", 10, kMonday, "a") + fixes_by("d2", 6, kMonday + kYear, "b") +
                                fixes_by("d2", 6, kMonday, "c"));
  // d1 has 10 fixes in 2021 and none in 2022.
  const auto filtered = filter_inactive(log, 5);
  EXPECT_EQ(filtered.developers(), (std::vector<std::string>{"d1", "d2"}));
  EXPECT_EQ(utc_year(kMonday), 2021);
  EXPECT_EQ(utc_year(kMonday + kYear), 2022);
}

TEST(FilterInactive, IdempotentOnSyntheticLogs) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SyntheticConfig cfg;
    cfg.n_devs = 40;
    cfg.n_bugs = 300;
    cfg.reputation_exponent = 1.5;
    const auto log = generate_synthetic(cfg, seed);
    const auto once = filter_inactive(log, 5);
    EXPECT_LT(once.developers().size(), log.developers().size());
    EXPECT_EQ(filter_inactive(once, 5), once);
  }
}

TEST(BuildSnapshots, SingleToss) {
  const auto log = parse_string(report("b1", kMonday) + toss("b1", "d1", "d2", kMonday + 5) +
                                fix("b1", "d2", kMonday + 9));
  const auto series = build_snapshots(log, Granularity::Weekly, 1, 1);
  ASSERT_EQ(series.size(), 1u);
  const auto& s = series.snapshots[0];
  EXPECT_EQ(s.weight(0, 1), 1.0);
  EXPECT_EQ(s.total_weight(), 1.0);
}

TEST(BuildSnapshots, CountsAndDegrees) {
  const auto log = parse_string(report("b1", kMonday) + toss("b1", "d1", "d2", kMonday + 5) +
                                fix("b1", "d2", kMonday + 6) + report("b2", kMonday) +
                                toss("b2", "d1", "d2", kMonday + 7) + toss("b2", "d2", "d3", kMonday + 8) +
                                fix("b2", "d3", kMonday + 9));
  const auto series = build_snapshots(log, Granularity::Daily, 1, 1);
  const auto& s = series.snapshots[0];
  const auto d1 = *series.index_of("d1");
  const auto d2 = *series.index_of("d2");
  const auto d3 = *series.index_of("d3");
  EXPECT_EQ(s.weight(d1, d2), 2.0);
  EXPECT_EQ(s.weight(d2, d3), 1.0);
  EXPECT_EQ(s.weight(d2, d1), 0.0);
  EXPECT_EQ(s.out_degree[d1], 1u);
  EXPECT_EQ(s.in_degree[d2], 1u);
  EXPECT_EQ(s.total_degree(d2), 2u);
}

TEST(BuildSnapshots, WeeklySlicesPartitionFourWeekLog) {
  std::string content;
  for (int w = 0; w < 4; ++w) {
    const auto bug = "b" + std::to_string(w);
    const std::int64_t t0 = kMonday + w * 7 * 86400 + 3600;
    content += report(bug, t0) + toss(bug, "d1", "d2", t0 + 10) + fix(bug, "d2", t0 + 20);
  }
  const auto log = parse_string(content);
  const auto series = build_snapshots(log, Granularity::Weekly, 1, 4);
  ASSERT_EQ(series.size(), 4u);
  for (std::size_t t = 0; t < 4; ++t) {
    const auto& s = series.snapshots[t];
    EXPECT_EQ(s.begin_ts, kMonday + static_cast<std::int64_t>(t) * 7 * 86400);
    EXPECT_EQ(s.end_ts - s.begin_ts, 7 * 86400);
    EXPECT_EQ(s.total_weight(), 1.0);
    if (t > 0) {
      EXPECT_EQ(s.begin_ts, series.snapshots[t - 1].end_ts);
    }
  }
  EXPECT_THROW(build_snapshots(log, Granularity::Weekly, 1, 5), ValidationError);
  EXPECT_THROW(build_snapshots(log, Granularity::Weekly, 2, 3), ValidationError);
  EXPECT_NO_THROW(build_snapshots(log, Granularity::Weekly, 2, 2));
}

TEST(BuildSnapshots, EmptyLogIsRejected) {
  EXPECT_THROW(build_snapshots(EventLog{}, Granularity::Daily, 1, 1), ValidationError);
}

TEST(BuildSnapshots, FullWindowEqualsTossCountMatrix) {
  SyntheticConfig cfg;
  cfg.weeks = 3;
  const auto log = filter_inactive(generate_synthetic(cfg, 11), 2);
  const auto series = build_snapshots(log, Granularity::Weekly, 3, 1);
  const auto& s = series.snapshots[0];
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> expected;
  for (const auto& e : log.events) {
    if (e.kind == EventKind::Toss) {
      expected[{*series.index_of(*e.from_dev), *series.index_of(*e.to_dev)}] += 1;
    }
  }
  std::size_t edges = 0;
  for (std::uint32_t i = 0; i < s.num_nodes(); ++i) {
    for (const auto& e : s.out_edges[i]) {
      EXPECT_EQ(e.weight, expected.at({i, e.dst}));
      EXPECT_GT(e.weight, 0.0);
      ++edges;
    }
  }
  EXPECT_EQ(edges, expected.size());
}

TEST(BuildSnapshots, WeightSumMatchesTossesInCoveredSpan) {
  SyntheticConfig cfg;
  cfg.weeks = 8;
  const auto log = filter_inactive(generate_synthetic(cfg, 5), 2);
  for (auto g : {Granularity::Hourly, Granularity::Daily, Granularity::Weekly}) {
    const auto series = build_snapshots(log, g, 2, 3);
    double total = 0.0;
    for (const auto& s : series.snapshots) {
      total += s.total_weight();
      for (std::uint32_t i = 0; i < s.num_nodes(); ++i) {
        std::uint32_t in = 0;
        for (std::uint32_t j = 0; j < s.num_nodes(); ++j) in += s.weight(j, i) > 0 ? 1 : 0;
        EXPECT_EQ(in, s.in_degree[i]);
        EXPECT_EQ(s.out_degree[i], s.out_edges[i].size());
      }
    }
    const auto begin = series.snapshots.front().begin_ts;
    const auto end = series.snapshots.back().end_ts;
    double expected = 0.0;
    for (const auto& e : log.events) {
      if (e.kind == EventKind::Toss && e.timestamp >= begin && e.timestamp < end) expected += 1.0;
    }
    EXPECT_EQ(total, expected) << to_string(g);
  }
}

TEST(Synthetic, DeterministicBytes) {
  SyntheticConfig cfg;
  std::ostringstream a;
  std::ostringstream b;
  write_events_jsonl(generate_synthetic(cfg, 1), a);
  write_events_jsonl(generate_synthetic(cfg, 1), b);
  EXPECT_EQ(a.str(), b.str());
  std::ostringstream c;
  write_events_jsonl(generate_synthetic(cfg, 2), c);
  EXPECT_NE(a.str(), c.str());
}

TEST(Synthetic, RoundTripsThroughJsonl) {
  TempDir dir;
  const auto log = generate_synthetic(SyntheticConfig{}, 3);
  write_events_jsonl(log, dir / "events.jsonl");
  ParseStats stats;
  EXPECT_EQ(parse_events(dir / "events.jsonl", &stats), log);
  EXPECT_EQ(stats.malformed, 0u);
}

TEST(Synthetic, FlatProfilePassesKolmogorovSmirnov) {
  SyntheticConfig cfg;
  cfg.n_bugs = 30000;
  cfg.weeks = 104;
  cfg.intensity_profile.assign(168, 1.0);
  const auto log = generate_synthetic(cfg, 9);
  ASSERT_GE(log.events.size(), 100000u);
  std::vector<double> pos;
  for (const auto& e : log.events)
    pos.push_back(static_cast<double>((e.timestamp - cfg.start_ts) % (7 * 86400)) / (7.0 * 86400.0));
  std::sort(pos.begin(), pos.end());
  const double n = static_cast<double>(pos.size());
  double d = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - pos[i], pos[i] - static_cast<double>(i) / n});
  }
  // Asymptotic KS critical value at alpha = 0.01.
  EXPECT_LT(d, 1.628 / std::sqrt(n));
}

TEST(Synthetic, ZeroWeekendIntensityMeansNoWeekendEvents) {
  SyntheticConfig cfg;
  cfg.n_bugs = 2000;
  for (int h = 5 * 24; h < 168; ++h) cfg.intensity_profile[static_cast<std::size_t>(h)] = 0.0;
  const auto log = generate_synthetic(cfg, 4);
  for (const auto& e : log.events) {
    const auto day = ((e.timestamp - cfg.start_ts) % (7 * 86400)) / 86400;
    ASSERT_LT(day, 5) << e.bug_id;
  }
}

TEST(Synthetic, PlantedStructure) {
  SyntheticConfig cfg;
  const auto log = generate_synthetic(cfg, 1);
  EXPECT_EQ(log.reports.size(), static_cast<std::size_t>(cfg.n_bugs));
  std::size_t in_component = 0;
  for (const auto& [bug, r] : log.reports) {
    EXPECT_EQ(r.fixer, r.holder_sequence.back());
    const int dev = std::stoi(r.fixer.substr(3));
    if ("comp" + std::to_string(dev % cfg.n_components) == r.component) ++in_component;
  }
  EXPECT_GT(static_cast<double>(in_component) / cfg.n_bugs, 0.8);
}

TEST(Synthetic, InvalidConfigRejected) {
  SyntheticConfig cfg;
  cfg.n_devs = 0;
  EXPECT_THROW(generate_synthetic(cfg, 1), ValidationError);
  TempDir dir;
  EXPECT_THROW(parse_synthetic_config(dir.write("bad.cfg", "n_devs = 2\n")), ValidationError);
  EXPECT_THROW(parse_synthetic_config(dir.write("bad2.cfg", "colour = red\n")), ValidationError);
  const auto cfg2 = parse_synthetic_config(
      dir.write("ok.cfg", "# desk\nn_devs = 12\nn_bugs=40\nn_components = 2\nweeks = 3\nintensity_profile = default\n"));
  EXPECT_EQ(cfg2.n_devs, 12);
  EXPECT_EQ(cfg2.intensity_profile.size(), 168u);
}

TEST(SnapshotCsv, HeaderAndRows) {
  const auto log = parse_string(report("b1", kMonday) + toss("b1", "d1", "d2", kMonday + 5) +
                                fix("b1", "d2", kMonday + 9));
  std::ostringstream out;
  write_snapshots_csv(build_snapshots(log, Granularity::Weekly, 1, 1), out);
  EXPECT_EQ(out.str(), "t,src,dst,weight\n0,d1,d2,1\n");
}

}  // namespace
}  // namespace stdgnn
