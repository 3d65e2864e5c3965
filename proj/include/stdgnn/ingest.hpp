#pragma once

// Event-log ingestion: JSON-lines parsing, inactive-developer filtering,
// time-sliced snapshot construction and a synthetic log generator with
// planted component structure.

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stdgnn/alias.hpp"
#include "stdgnn/common.hpp"
#include "stdgnn/io.hpp"
#include "stdgnn/stopwords.hpp"

namespace stdgnn {

enum class EventKind { Report = 0, Toss = 1, Fix = 2 };

inline std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::Report: return "report";
    case EventKind::Toss: return "toss";
    case EventKind::Fix: return "fix";
  }
  return "?";
}

struct Event {
  std::string bug_id;
  EventKind kind = EventKind::Report;
  std::optional<std::string> from_dev;  // tosser; absent for Report/Fix
  std::optional<std::string> to_dev;    // toss target, fixer, or initial assignee
  std::int64_t timestamp = 0;           // seconds since epoch, UTC

  friend bool operator==(const Event&, const Event&) = default;
};

/// Total order used for sorting; ties on timestamp resolve report < toss < fix.
inline bool event_before(const Event& a, const Event& b) {
  const auto key = [](const Event& e) {
    return std::tie(e.timestamp, e.kind, e.bug_id, e.from_dev, e.to_dev);
  };
  return key(a) < key(b);
}

struct BugReportText {
  std::string bug_id;
  std::string text;
  std::vector<std::string> tokens;
  std::string component;  // empty when the log carries none
  std::string fixer;
  std::vector<std::string> holder_sequence;
  std::int64_t reported_at = 0;

  friend bool operator==(const BugReportText&, const BugReportText&) = default;
};

struct EventLog {
  std::vector<Event> events;
  std::map<std::string, BugReportText> reports;

  /// Sorted unique developer ids appearing in any event.
  std::vector<std::string> developers() const {
    std::set<std::string> devs;
    for (const auto& e : events) {
      if (e.from_dev) devs.insert(*e.from_dev);
      if (e.to_dev) devs.insert(*e.to_dev);
    }
    return {devs.begin(), devs.end()};
  }

  std::size_t count(EventKind k) const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [k](const Event& e) { return e.kind == k; }));
  }

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

struct ParseStats {
  std::size_t lines = 0;
  std::size_t blank = 0;
  std::size_t malformed = 0;
  std::size_t bugs_without_report = 0;
  std::size_t bugs_without_fixer = 0;
  std::size_t bugs_with_multiple_fixes = 0;
  std::size_t bugs_with_empty_text = 0;
};

/// Lowercase, split on non-alphanumerics, drop tokens shorter than two
/// characters and stop words.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  const auto flush = [&] {
    if (cur.size() >= 2 && !is_stop_word(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

namespace detail {

struct ReportInfo {
  std::string text;
  std::string component;
};

inline void push_holder(std::vector<std::string>& seq, const std::string& dev) {
  if (seq.empty() || seq.back() != dev) seq.push_back(dev);
}

/// Sorts events, drops bugs that lack a report or a definite fixer, and
/// derives each bug's holder sequence from its events.
inline EventLog assemble_log(std::vector<Event> events,
                             const std::map<std::string, ReportInfo>& infos,
                             ParseStats* stats = nullptr) {
  std::sort(events.begin(), events.end(), event_before);

  struct BugTally {
    std::size_t reports = 0;
    std::size_t fixes = 0;
  };
  std::map<std::string, BugTally> tally;
  for (const auto& e : events) {
    auto& t = tally[e.bug_id];
    if (e.kind == EventKind::Report) ++t.reports;
    if (e.kind == EventKind::Fix) ++t.fixes;
  }

  std::map<std::string, std::vector<std::string>> tokens;
  std::set<std::string> keep;
  for (const auto& [bug, t] : tally) {
    const auto info = infos.find(bug);
    if (t.reports == 0 || info == infos.end()) {
      if (stats) ++stats->bugs_without_report;
      continue;
    }
    if (t.fixes == 0) {
      if (stats) ++stats->bugs_without_fixer;
      continue;
    }
    if (t.fixes > 1) {
      if (stats) ++stats->bugs_with_multiple_fixes;
      continue;
    }
    auto toks = tokenize(info->second.text);
    if (toks.empty()) {
      if (stats) ++stats->bugs_with_empty_text;
      continue;
    }
    tokens.emplace(bug, std::move(toks));
    keep.insert(bug);
  }

  EventLog log;
  std::set<std::string> seen_report;
  for (auto& e : events) {
    if (!keep.count(e.bug_id)) continue;
    if (e.kind == EventKind::Report) {
      if (!seen_report.insert(e.bug_id).second) continue;  // duplicate report line
      const auto& info = infos.at(e.bug_id);
      BugReportText r;
      r.bug_id = e.bug_id;
      r.text = info.text;
      r.component = info.component;
      r.tokens = std::move(tokens.at(e.bug_id));
      r.reported_at = e.timestamp;
      if (e.to_dev) r.holder_sequence.push_back(*e.to_dev);
      log.reports.emplace(e.bug_id, std::move(r));
    }
    log.events.push_back(e);
  }
  // Holder paths are built in time order, independent of where the report
  // line sorts relative to tosses.
  for (const auto& e : log.events) {
    auto& r = log.reports.at(e.bug_id);
    if (e.kind == EventKind::Toss) {
      push_holder(r.holder_sequence, *e.from_dev);
      push_holder(r.holder_sequence, *e.to_dev);
    } else if (e.kind == EventKind::Fix) {
      push_holder(r.holder_sequence, *e.to_dev);
      r.fixer = *e.to_dev;
    }
  }
  return log;
}

inline std::map<std::string, ReportInfo> report_infos(const EventLog& log) {
  std::map<std::string, ReportInfo> infos;
  for (const auto& [bug, r] : log.reports) infos.emplace(bug, ReportInfo{r.text, r.component});
  return infos;
}

inline std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw std::invalid_argument(std::string("field ") + key + " is not a string");
  return it->get<std::string>();
}

/// Parses one JSON-lines record. Throws std::invalid_argument on a malformed
/// record.
inline Event parse_record(const std::string& line, std::map<std::string, ReportInfo>& infos) {
  const auto obj = nlohmann::json::parse(line);
  if (!obj.is_object()) throw std::invalid_argument("record is not an object");
  Event e;
  const auto bug = optional_string(obj, "bug");
  if (!bug || bug->empty()) throw std::invalid_argument("missing bug");
  e.bug_id = *bug;
  const auto kind = optional_string(obj, "kind");
  if (!kind) throw std::invalid_argument("missing kind");
  if (*kind == "report") {
    e.kind = EventKind::Report;
  } else if (*kind == "toss") {
    e.kind = EventKind::Toss;
  } else if (*kind == "fix") {
    e.kind = EventKind::Fix;
  } else {
    throw std::invalid_argument("unknown kind " + *kind);
  }
  const auto ts = obj.find("ts");
  if (ts == obj.end() || !ts->is_number_integer()) throw std::invalid_argument("missing ts");
  e.timestamp = ts->get<std::int64_t>();
  if (e.timestamp < 0) throw std::invalid_argument("negative ts");
  e.from_dev = optional_string(obj, "from");
  e.to_dev = optional_string(obj, "to");

  switch (e.kind) {
    case EventKind::Report: {
      if (e.from_dev) throw std::invalid_argument("report with from");
      const auto text = optional_string(obj, "text");
      if (!text) throw std::invalid_argument("report without text");
      auto component = optional_string(obj, "component").value_or("");
      infos.try_emplace(e.bug_id, ReportInfo{*text, std::move(component)});
      break;
    }
    case EventKind::Toss:
      if (!e.from_dev || !e.to_dev) throw std::invalid_argument("toss without endpoints");
      if (*e.from_dev == *e.to_dev) throw std::invalid_argument("self toss");
      break;
    case EventKind::Fix:
      if (!e.to_dev) throw std::invalid_argument("fix without fixer");
      e.from_dev.reset();
      break;
  }
  return e;
}

}  // namespace detail

/// Parses a JSON-lines event log. Malformed records are skipped and counted;
/// more than 10% malformed records means the file is not an event log.
inline EventLog parse_events(const std::filesystem::path& path, ParseStats* stats_out = nullptr) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot read event log " + path.string());
  ParseStats stats;
  std::vector<Event> events;
  std::map<std::string, detail::ReportInfo> infos;
  std::string line;
  while (std::getline(in, line)) {
    ++stats.lines;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      ++stats.blank;
      continue;
    }
    try {
      events.push_back(detail::parse_record(line, infos));
    } catch (const std::exception&) {
      ++stats.malformed;
    }
  }
  const std::size_t records = stats.lines - stats.blank;
  if (records > 0 && static_cast<double>(stats.malformed) > 0.1 * static_cast<double>(records)) {
    throw RuntimeFailure(path.string() + ": " + std::to_string(stats.malformed) + " of " +
                         std::to_string(records) + " records malformed; not an event log?");
  }
  auto log = detail::assemble_log(std::move(events), infos, &stats);
  if (stats_out) *stats_out = stats;
  return log;
}

inline void write_events_jsonl(const EventLog& log, std::ostream& out) {
  for (const auto& e : log.events) {
    nlohmann::ordered_json j;
    j["bug"] = e.bug_id;
    j["kind"] = to_string(e.kind);
    j["from"] = e.from_dev ? nlohmann::ordered_json(*e.from_dev) : nlohmann::ordered_json(nullptr);
    j["to"] = e.to_dev ? nlohmann::ordered_json(*e.to_dev) : nlohmann::ordered_json(nullptr);
    j["ts"] = e.timestamp;
    if (e.kind == EventKind::Report) {
      const auto& r = log.reports.at(e.bug_id);
      j["text"] = r.text;
      if (!r.component.empty()) j["component"] = r.component;
    }
    out << j.dump() << '\n';
  }
}

inline void write_events_jsonl(const EventLog& log, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_events_jsonl(log, out);
}

inline int utc_year(std::int64_t ts) {
  using namespace std::chrono;
  const sys_seconds s{seconds{ts}};
  return static_cast<int>(year_month_day{floor<days>(s)}.year());
}

struct FilterStats {
  std::vector<std::string> removed_developers;
  std::size_t dropped_bugs = 0;
  std::size_t dropped_tosses = 0;
};

/// Removes developers who never fixed more than `min_fixes_per_year` bugs in
/// any single calendar year, along with tosses touching them and bugs they
/// fixed.
inline EventLog filter_inactive(const EventLog& log, int min_fixes_per_year = 5,
                                FilterStats* stats_out = nullptr) {
  std::map<std::string, std::map<int, int>> fixes;
  for (const auto& e : log.events) {
    if (e.kind == EventKind::Fix) ++fixes[*e.to_dev][utc_year(e.timestamp)];
  }
  std::set<std::string> active;
  for (const auto& [dev, per_year] : fixes) {
    for (const auto& [year, n] : per_year) {
      if (n > min_fixes_per_year) {
        active.insert(dev);
        break;
      }
    }
  }
  FilterStats stats;
  for (const auto& dev : log.developers()) {
    if (!active.count(dev)) stats.removed_developers.push_back(dev);
  }
  std::set<std::string> dropped_bugs;
  for (const auto& [bug, r] : log.reports) {
    if (!active.count(r.fixer)) dropped_bugs.insert(bug);
  }
  stats.dropped_bugs = dropped_bugs.size();

  std::vector<Event> kept;
  kept.reserve(log.events.size());
  for (auto e : log.events) {
    if (dropped_bugs.count(e.bug_id)) continue;
    if (e.kind == EventKind::Toss && (!active.count(*e.from_dev) || !active.count(*e.to_dev))) {
      ++stats.dropped_tosses;
      continue;
    }
    if (e.kind == EventKind::Report && e.to_dev && !active.count(*e.to_dev)) e.to_dev.reset();
    kept.push_back(std::move(e));
  }
  auto infos = detail::report_infos(log);
  if (stats_out) *stats_out = std::move(stats);
  return detail::assemble_log(std::move(kept), infos);
}

// ---------------------------------------------------------------------------
// Snapshots

enum class Granularity { Hourly, Daily, Weekly };

inline std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::Hourly: return "hour";
    case Granularity::Daily: return "day";
    case Granularity::Weekly: return "week";
  }
  return "?";
}

inline std::int64_t bin_seconds(Granularity g) {
  switch (g) {
    case Granularity::Hourly: return 3600;
    case Granularity::Daily: return 86400;
    case Granularity::Weekly: return 7 * 86400;
  }
  return 0;
}

// Weekly bins start on Monday 00:00 UTC (1970-01-05).
inline std::int64_t bin_origin(Granularity g) {
  return g == Granularity::Weekly ? 4 * 86400 : 0;
}

inline std::int64_t bin_of(Granularity g, std::int64_t ts) {
  const auto size = bin_seconds(g);
  const auto shifted = ts - bin_origin(g);
  return shifted >= 0 ? shifted / size : -((-shifted + size - 1) / size);
}

struct Edge {
  std::uint32_t dst = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

using Vocabulary = std::vector<std::string>;

struct Snapshot {
  std::size_t index = 0;
  std::int64_t begin_ts = 0;  // inclusive
  std::int64_t end_ts = 0;    // exclusive
  std::shared_ptr<const Vocabulary> node_ids;
  std::vector<std::vector<Edge>> out_edges;  // sorted by dst
  std::vector<std::uint32_t> out_degree;
  std::vector<std::uint32_t> in_degree;

  std::size_t num_nodes() const { return out_edges.size(); }

  double weight(std::uint32_t src, std::uint32_t dst) const {
    const auto& row = out_edges.at(src);
    const auto it = std::lower_bound(row.begin(), row.end(), dst,
                                     [](const Edge& e, std::uint32_t d) { return e.dst < d; });
    return it != row.end() && it->dst == dst ? it->weight : 0.0;
  }

  std::uint32_t total_degree(std::uint32_t n) const { return out_degree[n] + in_degree[n]; }

  double total_weight() const {
    double s = 0.0;
    for (const auto& row : out_edges)
      for (const auto& e : row) s += e.weight;
    return s;
  }
};

struct SnapshotSeries {
  Granularity granularity = Granularity::Weekly;
  int window_len = 1;
  std::shared_ptr<const Vocabulary> node_ids;
  std::vector<Snapshot> snapshots;

  std::size_t num_nodes() const { return node_ids ? node_ids->size() : 0; }
  std::size_t size() const { return snapshots.size(); }

  std::optional<std::uint32_t> index_of(const std::string& dev) const {
    const auto it = std::lower_bound(node_ids->begin(), node_ids->end(), dev);
    if (it == node_ids->end() || *it != dev) return std::nullopt;
    return static_cast<std::uint32_t>(it - node_ids->begin());
  }
};

/// Cuts the last `T` windows of `window_len` bins out of the log and builds
/// one weighted adjacency structure per window. The node vocabulary is every
/// developer in the log, shared by all snapshots.
inline SnapshotSeries build_snapshots(const EventLog& log, Granularity granularity,
                                      int window_len, int T) {
  if (T < 1) throw ValidationError("build_snapshots: T must be >= 1");
  if (window_len < 1) throw ValidationError("build_snapshots: window_len must be >= 1");
  if (log.events.empty()) throw ValidationError("build_snapshots: empty event log");

  const auto size = bin_seconds(granularity);
  const auto first_bin = bin_of(granularity, log.events.front().timestamp);
  const auto last_bin = bin_of(granularity, log.events.back().timestamp);
  const std::int64_t needed_bins = static_cast<std::int64_t>(T) * window_len;
  const std::int64_t start_bin = last_bin - needed_bins + 1;
  if (first_bin > start_bin) {
    const auto have = (last_bin - first_bin + 1 + window_len - 1) / window_len;
    throw ValidationError("build_snapshots: log spans " + std::to_string(have) + " " +
                          to_string(granularity) + " window(s) of " + std::to_string(window_len) +
                          " bin(s); " + std::to_string(T) + " required");
  }

  SnapshotSeries series;
  series.granularity = granularity;
  series.window_len = window_len;
  series.node_ids = std::make_shared<const Vocabulary>(log.developers());
  const auto n = series.node_ids->size();

  std::vector<std::map<std::pair<std::uint32_t, std::uint32_t>, double>> counts(
      static_cast<std::size_t>(T));
  for (const auto& e : log.events) {
    if (e.kind != EventKind::Toss) continue;
    const auto bin = bin_of(granularity, e.timestamp);
    if (bin < start_bin) continue;
    const auto slice = static_cast<std::size_t>((bin - start_bin) / window_len);
    const auto src = *series.index_of(*e.from_dev);
    const auto dst = *series.index_of(*e.to_dev);
    counts[slice][{src, dst}] += 1.0;
  }

  for (int t = 0; t < T; ++t) {
    Snapshot s;
    s.index = static_cast<std::size_t>(t);
    s.begin_ts = (start_bin + static_cast<std::int64_t>(t) * window_len) * size + bin_origin(granularity);
    s.end_ts = s.begin_ts + static_cast<std::int64_t>(window_len) * size;
    s.node_ids = series.node_ids;
    s.out_edges.assign(n, {});
    s.out_degree.assign(n, 0);
    s.in_degree.assign(n, 0);
    for (const auto& [key, w] : counts[static_cast<std::size_t>(t)]) {
      s.out_edges[key.first].push_back(Edge{key.second, w});
      ++s.out_degree[key.first];
      ++s.in_degree[key.second];
    }
    series.snapshots.push_back(std::move(s));
  }
  return series;
}

/// Snapshot over nodes 0..n-1 from (src, dst, weight) triples; duplicate
/// pairs accumulate. Node ids are the decimal indices.
inline Snapshot make_snapshot(std::size_t n,
                              const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>& edges) {
  auto vocab = std::make_shared<Vocabulary>();
  for (std::size_t i = 0; i < n; ++i) vocab->push_back(std::to_string(i));
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> acc;
  for (const auto& [src, dst, w] : edges) {
    if (src >= n || dst >= n || !(w > 0.0)) throw ValidationError("make_snapshot: bad edge");
    acc[{src, dst}] += w;
  }
  Snapshot s;
  s.node_ids = std::move(vocab);
  s.out_edges.assign(n, {});
  s.out_degree.assign(n, 0);
  s.in_degree.assign(n, 0);
  for (const auto& [key, w] : acc) {
    s.out_edges[key.first].push_back(Edge{key.second, w});
    ++s.out_degree[key.first];
    ++s.in_degree[key.second];
  }
  return s;
}

inline void write_snapshots_csv(const SnapshotSeries& series, std::ostream& out) {
  out << "t,src,dst,weight\n";
  for (const auto& s : series.snapshots) {
    for (std::size_t i = 0; i < s.num_nodes(); ++i) {
      for (const auto& e : s.out_edges[i]) {
        out << s.index << ',' << (*series.node_ids)[i] << ',' << (*series.node_ids)[e.dst] << ','
            << format_double(e.weight) << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Synthetic logs

/// Default hour-of-week intensity, Monday 00:00 first: workday peak,
/// evening shoulder, night and weekend trough.
inline std::vector<double> default_intensity_profile() {
  std::vector<double> p(168);
  for (int h = 0; h < 168; ++h) {
    const int day = h / 24;
    const int hour = h % 24;
    const bool weekend = day >= 5;
    double v;
    if (hour >= 9 && hour < 18) {
      v = 1.0;
    } else if ((hour >= 7 && hour < 9) || (hour >= 18 && hour < 22)) {
      v = 0.4;
    } else {
      v = 0.05;
    }
    p[static_cast<std::size_t>(h)] = weekend ? v * 0.15 : v;
  }
  return p;
}

struct SyntheticConfig {
  int n_devs = 30;
  int n_bugs = 500;
  int n_components = 3;
  int weeks = 8;
  std::vector<double> intensity_profile = default_intensity_profile();
  std::int64_t start_ts = 1609718400;  // Monday 2021-01-04 00:00 UTC
  double reputation_exponent = 1.0;    // reputation of rank k is (k+1)^-exponent
  double in_component_fix = 0.85;      // chance the fixer is from the bug's component
  double in_component_assign = 0.6;    // chance the first assignee is from the bug's component
  double direct_toss = 0.5;            // chance a toss goes straight to the fixer
  int max_tosses = 4;
  double mean_delay_hours = 6.0;
  int words_per_component = 30;
  int shared_words = 30;
  double topical_share = 0.7;
  int min_words = 10;
  int max_words = 20;

  void validate() const {
    if (n_devs < 3) throw ValidationError("synthetic config: n_devs must be >= 3");
    if (n_bugs < 1) throw ValidationError("synthetic config: n_bugs must be >= 1");
    if (n_components < 1) throw ValidationError("synthetic config: n_components must be >= 1");
    if (n_components > n_devs) throw ValidationError("synthetic config: n_components > n_devs");
    if (weeks < 1) throw ValidationError("synthetic config: weeks must be >= 1");
    if (intensity_profile.size() != 168)
      throw ValidationError("synthetic config: intensity_profile needs 168 values");
    double total = 0.0;
    for (double v : intensity_profile) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ValidationError("synthetic config: intensity values must be finite and >= 0");
      total += v;
    }
    if (!(total > 0.0)) throw ValidationError("synthetic config: intensity profile is all zero");
    if (max_tosses < 1 || min_words < 1 || max_words < min_words || mean_delay_hours <= 0.0)
      throw ValidationError("synthetic config: invalid generator knobs");
  }
};

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key " + key + ": expected an integer, got '" + value + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key " + key + ": expected a number, got '" + value + "'");
  }
}

/// Applies one key to a synthetic config. Returns false for unknown keys.
inline bool set_synthetic_key(SyntheticConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "n_devs") {
    cfg.n_devs = parse_int(key, value);
  } else if (key == "n_bugs") {
    cfg.n_bugs = parse_int(key, value);
  } else if (key == "n_components") {
    cfg.n_components = parse_int(key, value);
  } else if (key == "weeks") {
    cfg.weeks = parse_int(key, value);
  } else if (key == "intensity_profile") {
    if (trim(value) == "default") {
      cfg.intensity_profile = default_intensity_profile();
    } else {
      cfg.intensity_profile.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) cfg.intensity_profile.push_back(parse_double(key, trim(item)));
    }
  } else if (key == "start_ts") {
    cfg.start_ts = std::stoll(value);
  } else if (key == "reputation_exponent") {
    cfg.reputation_exponent = parse_double(key, value);
  } else if (key == "in_component_fix") {
    cfg.in_component_fix = parse_double(key, value);
  } else if (key == "direct_toss") {
    cfg.direct_toss = parse_double(key, value);
  } else if (key == "max_tosses") {
    cfg.max_tosses = parse_int(key, value);
  } else {
    return false;
  }
  return true;
}

/// Reads a key = value synthetic config file ('#' starts a comment).
inline SyntheticConfig parse_synthetic_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read synthetic config " + path.string());
  SyntheticConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("synthetic config: bad line '" + line + "'");
    const auto key = trim(line.substr(0, eq));
    if (!set_synthetic_key(cfg, key, trim(line.substr(eq + 1))))
      throw ValidationError("synthetic config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

namespace detail {

inline std::string synthetic_word(int group, int index) {
  static constexpr std::array<const char*, 16> kSyllables = {
      "ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "be", "da", "fu", "go", "ha", "ji", "pe", "zo"};
  // Group and index are encoded in base 16 syllables; groups never collide.
  const int code = group * 4096 + index;
  std::string w;
  for (int d = 0; d < 4; ++d) w += kSyllables[static_cast<std::size_t>((code >> (4 * d)) & 15)];
  return w;
}

inline std::string padded_id(const char* prefix, int value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

}  // namespace detail

/// Generates a log with planted structure: developers belong to a home
/// component with a rank-based reputation; bugs are filed against a
/// component, tossed toward same-component high-reputation developers and
/// fixed by a component member with probability `in_component_fix`. Event
/// times follow the hour-of-week intensity profile.
inline EventLog generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, 0x5157));

  const int dev_width = static_cast<int>(std::to_string(cfg.n_devs - 1).size());
  const int bug_width = static_cast<int>(std::to_string(cfg.n_bugs - 1).size());
  std::vector<std::string> devs;
  std::vector<std::vector<int>> members(static_cast<std::size_t>(cfg.n_components));
  std::vector<double> reputation;
  for (int i = 0; i < cfg.n_devs; ++i) {
    devs.push_back(detail::padded_id("dev", i, dev_width));
    members[static_cast<std::size_t>(i % cfg.n_components)].push_back(i);
    const int rank = i / cfg.n_components;
    reputation.push_back(std::pow(static_cast<double>(rank + 1), -cfg.reputation_exponent));
  }
  const auto weighted = [&](const std::vector<int>& pool) {
    std::vector<double> w;
    for (int d : pool) w.push_back(reputation[static_cast<std::size_t>(d)]);
    return AliasTable::build(w);
  };
  std::vector<int> everyone(static_cast<std::size_t>(cfg.n_devs));
  for (int i = 0; i < cfg.n_devs; ++i) everyone[static_cast<std::size_t>(i)] = i;
  const auto any_dev = weighted(everyone);
  std::vector<AliasTable> component_dev;
  for (const auto& m : members) component_dev.push_back(weighted(m));

  const std::int64_t horizon_hours = static_cast<std::int64_t>(cfg.weeks) * 168;
  const double peak = *std::max_element(cfg.intensity_profile.begin(), cfg.intensity_profile.end());
  const double mean_intensity =
      std::accumulate(cfg.intensity_profile.begin(), cfg.intensity_profile.end(), 0.0) / 168.0;
  std::vector<double> hour_weights(static_cast<std::size_t>(horizon_hours));
  for (std::int64_t h = 0; h < horizon_hours; ++h)
    hour_weights[static_cast<std::size_t>(h)] = cfg.intensity_profile[static_cast<std::size_t>(h % 168)];
  const auto hour_table = AliasTable::build(hour_weights);
  const auto intensity_at = [&](double hours) {
    return cfg.intensity_profile[static_cast<std::size_t>(static_cast<std::int64_t>(hours) % 168)];
  };
  // Thinning: candidate gaps at the peak rate, accepted in proportion to
  // the local intensity.
  const auto next_time = [&](double hours) {
    for (;;) {
      hours += -std::log(1.0 - uniform01(rng)) * cfg.mean_delay_hours * mean_intensity / peak;
      if (hours >= static_cast<double>(horizon_hours)) return hours;
      if (uniform01(rng) * peak < intensity_at(hours)) return hours;
    }
  };

  std::vector<Event> events;
  std::map<std::string, detail::ReportInfo> infos;
  for (int b = 0; b < cfg.n_bugs; ++b) {
    const std::string bug = detail::padded_id("bug", b, bug_width);
    const int component = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.n_components)));
    const auto& pool = members[static_cast<std::size_t>(component)];
    const auto pick_in_component = [&] {
      return pool[component_dev[static_cast<std::size_t>(component)].sample(rng)];
    };
    const int fixer = uniform01(rng) < cfg.in_component_fix ? pick_in_component()
                                                            : static_cast<int>(any_dev.sample(rng));
    const int assignee = uniform01(rng) < cfg.in_component_assign
                             ? pick_in_component()
                             : static_cast<int>(any_dev.sample(rng));
    std::vector<int> path{assignee};
    while (path.back() != fixer) {
      const bool last = static_cast<int>(path.size()) >= cfg.max_tosses;
      int next = fixer;
      if (!last && uniform01(rng) >= cfg.direct_toss) {
        next = pick_in_component();
        if (next == path.back()) next = fixer;
      }
      path.push_back(next);
    }

    // Event times; a chain that would run past the horizon is redrawn.
    std::vector<double> times;
    for (;;) {
      times.clear();
      double t = static_cast<double>(hour_table.sample(rng)) + uniform01(rng);
      times.push_back(t);
      bool overflow = false;
      for (std::size_t k = 1; k <= path.size(); ++k) {  // tosses plus the fix
        t = next_time(t);
        if (t >= static_cast<double>(horizon_hours)) {
          overflow = true;
          break;
        }
        times.push_back(t);
      }
      if (!overflow) break;
    }
    const auto ts = [&](std::size_t k) {
      return cfg.start_ts + static_cast<std::int64_t>(std::floor(times[k] * 3600.0));
    };

    std::vector<std::string> words;
    const int n_words = cfg.min_words + static_cast<int>(uniform_index(
                                            rng, static_cast<std::uint64_t>(cfg.max_words - cfg.min_words + 1)));
    for (int w = 0; w < n_words; ++w) {
      if (uniform01(rng) < cfg.topical_share) {
        words.push_back(detail::synthetic_word(
            component + 1, static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.words_per_component)))));
      } else {
        words.push_back(detail::synthetic_word(
            0, static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.shared_words)))));
      }
    }
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;

    events.push_back(Event{bug, EventKind::Report, std::nullopt,
                           devs[static_cast<std::size_t>(assignee)], ts(0)});
    for (std::size_t k = 1; k < path.size(); ++k) {
      events.push_back(Event{bug, EventKind::Toss, devs[static_cast<std::size_t>(path[k - 1])],
                             devs[static_cast<std::size_t>(path[k])], ts(k)});
    }
    events.push_back(Event{bug, EventKind::Fix, std::nullopt, devs[static_cast<std::size_t>(fixer)],
                           ts(path.size())});
    infos.emplace(bug, detail::ReportInfo{text, "comp" + std::to_string(component)});
  }
  return detail::assemble_log(std::move(events), infos);
}

}  // namespace stdgnn
