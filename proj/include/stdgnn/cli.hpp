#pragma once

// Command-line front end: layered run configuration and the synth, build,
// train, eval and sweep subcommands.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stdgnn/checkpoint.hpp"
#include "stdgnn/eval.hpp"
#include "stdgnn/ingest.hpp"
#include "stdgnn/io.hpp"
#include "stdgnn/pipeline.hpp"
#include "stdgnn/tasks.hpp"
#include "stdgnn/textfeat.hpp"

namespace stdgnn {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Run configuration

inline constexpr const char* kEnvPrefix = "STDGNN_";

/// Every configurable key with its desk-profile default. The JSON type of
/// the default fixes the type of the key.
inline Json desk_defaults() {
  return Json{
      {"profile", "desk"},
      {"seed", 1},
      {"threads", 1},
      {"events", ""},
      {"workdir", "stdgnn_out"},
      {"synth_config", ""},
      {"synth_n_devs", 30},
      {"synth_n_bugs", 500},
      {"synth_n_components", 3},
      {"synth_weeks", 8},
      {"min_fixes_per_year", 5},
      {"window_len", 1},
      {"walk_l", 12},
      {"walk_r", 4},
      {"walk_alpha", 0.7},
      {"components", "hour,day,week"},
      {"T_hour", 6},
      {"T_day", 3},
      {"T_week", 2},
      {"K1", 8},
      {"K2", 8},
      {"H", 16},
      {"fc", 32},
      {"dropout", 0.5},
      {"lr", 0.01},
      {"max_epoch", 100},
      {"patience", 10},
      {"batch_size", 32},
      {"attention", true},
      {"standard_lstm", false},
      {"renormalize", false},
      {"encoding", "onehot"},
      {"embed_dim", 32},
      {"lda_topics", 10},
      {"lda_iterations", 500},
      {"lda_infer_iterations", 100},
      {"task", "bfp"},
      {"min_fixer_count", 5},
      {"topk", ""},
      {"train_frac", 0.7},
      {"val_frac", 0.1},
      {"repeats", 10},
      {"shuffle_labels", false},
      {"sweep_parameter", "alpha"},
      {"sweep_grid", "0:1:0.1"},
  };
}

inline Json profile_defaults(const std::string& profile) {
  auto j = desk_defaults();
  if (profile == "desk") return j;
  if (profile != "paper") throw ValidationError("unknown profile '" + profile + "' (expected paper or desk)");
  j["profile"] = "paper";
  j["walk_l"] = 90;
  j["walk_r"] = 35;
  j["K1"] = 64;
  j["K2"] = 64;
  j["H"] = 256;
  j["fc"] = 2048;
  j["T_hour"] = 24;
  j["T_day"] = 7;
  j["T_week"] = 4;
  j["lda_topics"] = 200;
  return j;
}

namespace detail {

inline std::string env_name(const std::string& key) {
  std::string s = kEnvPrefix;
  for (char c : key) s += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

/// Converts text to the JSON type of `like`.
inline Json parse_as(const Json& like, const std::string& key, const std::string& text) {
  const auto fail = [&] { throw ValidationError("config " + key + ": cannot parse '" + text + "'"); };
  if (like.is_string()) return text;
  if (like.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    fail();
  }
  try {
    std::size_t pos = 0;
    if (like.is_number_integer()) {
      const long long v = std::stoll(text, &pos);
      if (pos != text.size()) fail();
      return v;
    }
    const double v = std::stod(text, &pos);
    if (pos != text.size() || !std::isfinite(v)) fail();
    return v;
  } catch (const std::logic_error&) {
    fail();
  }
  return {};
}

/// Checks that `value` fits the type of `like`; integral floats are
/// accepted for integer keys and integers for float keys.
inline Json coerce(const Json& like, const std::string& key, const Json& value) {
  const auto fail = [&] { throw ValidationError("config " + key + ": expected a value like " + like.dump()); };
  if (like.is_string()) {
    if (!value.is_string()) fail();
    return value;
  }
  if (like.is_boolean()) {
    if (!value.is_boolean()) fail();
    return value;
  }
  if (!value.is_number()) fail();
  if (like.is_number_integer()) {
    const double d = value.get<double>();
    if (d != std::floor(d)) fail();
    return static_cast<long long>(d);
  }
  return value.get<double>();
}

inline void overlay(Json& base, const Json& over, const std::string& source) {
  for (const auto& [key, value] : over.items()) {
    if (!base.contains(key)) throw ValidationError(source + ": unknown config key '" + key + "'");
    base[key] = coerce(base[key], key, value);
  }
}

}  // namespace detail

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

/// Resolution order, lowest to highest: profile defaults, config file,
/// STDGNN_* environment variables, command-line flags. The profile itself is
/// taken from the highest layer that names it.
inline Json resolve_config(const Json& file, const EnvLookup& env, const std::map<std::string, std::string>& flags) {
  std::string profile = "desk";
  if (file.contains("profile")) profile = file.at("profile").get<std::string>();
  if (auto v = env(detail::env_name("profile"))) profile = *v;
  if (auto it = flags.find("profile"); it != flags.end()) profile = it->second;
  Json cfg = profile_defaults(profile);
  detail::overlay(cfg, file, "config file");
  for (const auto& [key, like] : cfg.items()) {
    if (auto v = env(detail::env_name(key))) cfg[key] = detail::parse_as(like, key, *v);
  }
  for (const auto& [key, text] : flags) {
    if (!cfg.contains(key)) throw ValidationError("unknown config key '" + key + "'");
    cfg[key] = detail::parse_as(cfg[key], key, text);
  }
  cfg["profile"] = profile;
  if (cfg["topk"].get<std::string>().empty()) cfg["topk"] = cfg["task"] == "dap" ? "1" : "1,3,5";
  return cfg;
}

inline Json load_config_file(const std::filesystem::path& path) {
  if (path.empty()) return Json::object();
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError(path.string() + ": config must be a JSON object");
  return j;
}

// Typed views of a resolved configuration.

inline std::vector<std::size_t> parse_topk(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto v = detail::parse_as(Json(1), "topk", item).get<long long>();
    if (v < 1) throw ValidationError("topk entries must be >= 1");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ValidationError("topk list is empty");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::array<bool, kNumComponents> parse_components(const std::string& text) {
  std::array<bool, kNumComponents> active{false, false, false};
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    bool found = false;
    for (auto g : kComponents) {
      if (item == to_string(g) || item == "all") {
        active[component_index(g)] = true;
        found = true;
      }
    }
    if (!found) throw ValidationError("unknown component '" + item + "' (expected hour, day, week)");
  }
  if (!active[0] && !active[1] && !active[2]) throw ValidationError("no component selected");
  return active;
}

inline WalkParams walk_params(const Json& cfg) {
  WalkParams w;
  w.l = cfg.at("walk_l").get<int>();
  w.r = cfg.at("walk_r").get<int>();
  w.alpha = cfg.at("walk_alpha").get<double>();
  if (w.l < 1 || w.r < 1) throw ValidationError("walk_l and walk_r must be >= 1");
  if (!(w.alpha >= 0.0 && w.alpha <= 1.0)) throw ValidationError("walk_alpha must lie in [0, 1]");
  return w;
}

inline GrcnnConfig model_config(const Json& cfg, std::size_t num_nodes) {
  GrcnnConfig m;
  const auto size = [&](const char* key) {
    const auto v = cfg.at(key).get<long long>();
    if (v < 1) throw ValidationError(std::string(key) + " must be >= 1");
    return static_cast<std::size_t>(v);
  };
  m.K1 = size("K1");
  m.K2 = size("K2");
  m.H = size("H");
  m.fc1 = m.fc2 = size("fc");
  m.dropout = cfg.at("dropout").get<double>();
  m.lr = cfg.at("lr").get<double>();
  m.max_epoch = cfg.at("max_epoch").get<int>();
  m.patience = cfg.at("patience").get<int>();
  m.batch_size = size("batch_size");
  m.T = {size("T_hour"), size("T_day"), size("T_week")};
  m.active = parse_components(cfg.at("components").get<std::string>());
  m.attention = cfg.at("attention").get<bool>();
  m.standard_lstm = cfg.at("standard_lstm").get<bool>();
  m.renormalize = cfg.at("renormalize").get<bool>();
  const auto enc = cfg.at("encoding").get<std::string>();
  if (enc == "onehot") {
    m.encoding = Encoding::OneHot;
    m.a_v = num_nodes;
  } else if (enc == "embedding") {
    m.encoding = Encoding::EmbeddingIndex;
    m.a_v = size("embed_dim");
  } else {
    throw ValidationError("unknown encoding '" + enc + "' (expected onehot or embedding)");
  }
  m.num_nodes = num_nodes;
  return m;
}

inline SyntheticConfig synthetic_config(const Json& cfg) {
  const auto path = cfg.at("synth_config").get<std::string>();
  SyntheticConfig s = path.empty() ? SyntheticConfig{} : parse_synthetic_config(path);
  s.n_devs = cfg.at("synth_n_devs").get<int>();
  s.n_bugs = cfg.at("synth_n_bugs").get<int>();
  s.n_components = cfg.at("synth_n_components").get<int>();
  s.weeks = cfg.at("synth_weeks").get<int>();
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Commands

struct CliContext {
  Json cfg;
  std::ostream& out;
  std::ostream& err;

  std::filesystem::path workdir() const { return cfg.at("workdir").get<std::string>(); }
  std::uint64_t seed() const { return cfg.at("seed").get<std::uint64_t>(); }
  unsigned threads() const {
    const auto t = cfg.at("threads").get<long long>();
    if (t < 1) throw ValidationError("threads must be >= 1");
    return static_cast<unsigned>(t);
  }
};

inline void write_json(const std::filesystem::path& path, const Json& j) {
  auto f = open_output(path);
  f << j.dump(2) << '\n';
}

inline void dump_resolved(const CliContext& ctx, const std::string& name = "resolved_config.json") {
  write_json(ctx.workdir() / name, ctx.cfg);
}

inline std::filesystem::path events_path(const CliContext& ctx) {
  auto p = ctx.cfg.at("events").get<std::string>();
  if (p.empty()) return ctx.workdir() / "events.jsonl";
  return p;
}

inline void cmd_synth(const CliContext& ctx, const std::string& out_path) {
  const auto sc = synthetic_config(ctx.cfg);
  const std::filesystem::path path = out_path.empty() ? events_path(ctx) : std::filesystem::path(out_path);
  const auto log = generate_synthetic(sc, ctx.seed());
  write_events_jsonl(log, path);
  dump_resolved(ctx, "resolved_config.synth.json");
  ctx.out << "wrote " << log.events.size() << " events for " << log.reports.size() << " bugs to " << path.string()
          << '\n';
}

/// Parsed, filtered log plus the series of the active components.
struct PreparedData {
  EventLog log;
  ParseStats parse;
  FilterStats filter;
  SeriesSet series;
  GrcnnConfig model;
};

inline PreparedData prepare_data(const CliContext& ctx) {
  PreparedData d;
  const auto raw = parse_events(events_path(ctx), &d.parse);
  if (raw.events.empty()) throw ValidationError(events_path(ctx).string() + ": no usable events");
  d.log = filter_inactive(raw, ctx.cfg.at("min_fixes_per_year").get<int>(), &d.filter);
  if (d.log.events.empty()) throw ValidationError("no events left after removing inactive developers");
  auto m = model_config(ctx.cfg, 1);
  d.series = build_series(d.log, m.T, m.active, ctx.cfg.at("window_len").get<int>());
  d.model = model_config(ctx.cfg, series_vocabulary(d.series).size());
  return d;
}

inline void cmd_build(const CliContext& ctx) {
  const auto d = prepare_data(ctx);
  const auto dir = ctx.workdir();
  Json stats;
  stats["events"] = d.log.events.size();
  stats["bugs"] = d.log.reports.size();
  stats["developers"] = series_vocabulary(d.series).size();
  stats["parse"] = Json{{"lines", d.parse.lines},
                        {"blank", d.parse.blank},
                        {"malformed", d.parse.malformed},
                        {"bugs_without_report", d.parse.bugs_without_report},
                        {"bugs_without_fixer", d.parse.bugs_without_fixer},
                        {"bugs_with_multiple_fixes", d.parse.bugs_with_multiple_fixes},
                        {"bugs_with_empty_text", d.parse.bugs_with_empty_text}};
  stats["inactive_filter"] = Json{{"min_fixes_per_year", ctx.cfg.at("min_fixes_per_year")},
                                  {"removed_developers", d.filter.removed_developers},
                                  {"dropped_bugs", d.filter.dropped_bugs},
                                  {"dropped_tosses", d.filter.dropped_tosses}};
  Json slices = Json::object();
  for (auto g : kComponents) {
    const auto& s = d.series[component_index(g)];
    if (!s) continue;
    auto f = open_output(dir / ("snapshots_" + to_string(g) + ".csv"));
    write_snapshots_csv(*s, f);
    Json per = Json::array();
    for (const auto& snap : s->snapshots) {
      per.push_back(Json{{"t", snap.index}, {"begin_ts", snap.begin_ts}, {"end_ts", snap.end_ts},
                         {"total_weight", snap.total_weight()}});
    }
    slices[to_string(g)] = per;
  }
  stats["slices"] = slices;
  const auto bfp = build_bfp_dataset(d.log, d.series);
  {
    auto f = open_output(dir / "bfp_dataset.jsonl");
    write_bfp_jsonl(bfp, f);
  }
  stats["bfp_instances"] = bfp.instances.size();
  try {
    const auto dap = build_dap_dataset(d.log, series_vocabulary(d.series));
    auto f = open_output(dir / "dap_dataset.jsonl");
    write_dap_jsonl(dap, f);
    stats["dap_instances"] = dap.instances.size();
    stats["dap_excluded_no_fix"] = dap.excluded_no_fix;
    stats["dap_ties"] = dap.ties;
  } catch (const ValidationError& e) {
    warn(std::string("no DAP dataset: ") + e.what());
  }
  write_json(dir / "stats.json", stats);
  dump_resolved(ctx, "resolved_config.build.json");
  ctx.out << "built " << d.log.events.size() << " events, " << series_vocabulary(d.series).size()
          << " developers; removed " << d.filter.removed_developers.size() << " inactive developer(s)\n";
}

inline ExperimentSettings experiment_settings(const CliContext& ctx, const GrcnnConfig& model) {
  ExperimentSettings st;
  st.model = model;
  st.plan.train_frac = ctx.cfg.at("train_frac").get<double>();
  st.plan.val_frac = ctx.cfg.at("val_frac").get<double>();
  st.plan.repeats = ctx.cfg.at("repeats").get<int>();
  st.plan.seed = derive_seed(ctx.seed(), 0x5b1);
  st.topk = parse_topk(ctx.cfg.at("topk").get<std::string>());
  st.lda_topics = static_cast<std::size_t>(ctx.cfg.at("lda_topics").get<long long>());
  st.lda_iterations = ctx.cfg.at("lda_iterations").get<int>();
  st.lda_infer_iterations = ctx.cfg.at("lda_infer_iterations").get<int>();
  st.min_fixer_count = static_cast<std::size_t>(ctx.cfg.at("min_fixer_count").get<long long>());
  st.shuffle_labels = ctx.cfg.at("shuffle_labels").get<bool>();
  st.threads = ctx.threads();
  st.seed = ctx.seed();
  return st;
}

inline ExperimentReport run_task(const CliContext& ctx, const PreparedData& d, const ModelInputs& in,
                                 ExperimentSettings st) {
  const auto task = parse_task(ctx.cfg.at("task").get<std::string>());
  st.on_repeat_start = [&ctx, n = st.plan.repeats](int k) {
    if (!quiet_flag()) ctx.err << "repeat " << (k + 1) << "/" << n << '\n';
  };
  ExperimentReport rep = task == Task::Dap
                             ? run_experiment(build_dap_dataset(d.log, series_vocabulary(d.series)), d.series, in, st)
                             : run_experiment(build_bfp_dataset(d.log, d.series), in, st);
  rep.config = ctx.cfg;
  return rep;
}

inline void print_summary(const CliContext& ctx, const ExperimentReport& rep) {
  for (const auto& [k, s] : rep.acc) {
    ctx.out << to_string(rep.task) << ' ' << rep.plan.label() << " acc@" << k << " = " << format_double(s.mean)
            << " +- " << format_double(s.sd) << " (baseline " << format_double(rep.baseline.at(k).mean) << ")\n";
  }
}

inline void write_predictions(const std::filesystem::path& path, const RepeatResult& r) {
  auto f = open_output(path);
  write_predictions_csv(r.test_ids, r.test_truth, r.predictions, r.classes, f);
}

inline void cmd_train(const CliContext& ctx) {
  const auto d = prepare_data(ctx);
  const auto dir = ctx.workdir();
  const auto in = build_inputs(d.series, walk_params(ctx.cfg), d.model.encoding, d.model.a_v,
                               derive_seed(ctx.seed(), 0x3a1c), ctx.threads());
  auto st = experiment_settings(ctx, d.model);
  st.plan.repeats = 1;
  st.keep_predictions = true;
  const auto task = ctx.cfg.at("task").get<std::string>();
  st.on_trained = [&](int, Grcnn& model, const std::vector<std::string>& classes) {
    save_params(dir / ("model_" + task + ".bin"), model.params(), Json{{"config", ctx.cfg}, {"classes", classes}});
  };
  st.on_lda = [&](int, const LdaModel& lda) { save_lda(dir / "lda.bin", lda); };
  const auto rep = run_task(ctx, d, in, st);
  const auto& r = rep.repeats.front();
  if (r.failed) throw RuntimeFailure("training failed: " + r.error);
  {
    auto f = open_output(dir / ("loss_curve_" + task + ".csv"));
    write_loss_curve_csv(r.training, f);
  }
  write_predictions(dir / ("predictions_" + task + ".csv"), r);
  write_json(dir / ("train_report_" + task + ".json"), report_json(rep));
  write_json(dir / ("timing_train_" + task + ".json"), timing_json(rep));
  dump_resolved(ctx, "resolved_config.train.json");
  ctx.out << "trained " << task << " for " << r.epochs_run << " epoch(s), best epoch " << r.best_epoch << '\n';
  print_summary(ctx, rep);
}

inline void cmd_eval(const CliContext& ctx) {
  const auto d = prepare_data(ctx);
  const auto dir = ctx.workdir();
  const auto in = build_inputs(d.series, walk_params(ctx.cfg), d.model.encoding, d.model.a_v,
                               derive_seed(ctx.seed(), 0x3a1c), ctx.threads());
  auto st = experiment_settings(ctx, d.model);
  st.keep_predictions = true;
  const auto rep = run_task(ctx, d, in, st);
  const auto task = to_string(rep.task);
  write_json(dir / ("report_" + task + ".json"), report_json(rep));
  {
    auto f = open_output(dir / ("report_" + task + ".csv"));
    write_report_csv(rep, f);
  }
  for (const auto& r : rep.repeats) {
    if (!r.failed) write_predictions(dir / ("predictions_" + task + "_r" + std::to_string(r.repeat) + ".csv"), r);
  }
  write_json(dir / ("timing_" + task + ".json"), timing_json(rep));
  dump_resolved(ctx, "resolved_config.eval.json");
  print_summary(ctx, rep);
}

inline void cmd_sweep(const CliContext& ctx) {
  const auto param = parse_sweep_parameter(ctx.cfg.at("sweep_parameter").get<std::string>());
  const auto grid = parse_grid(ctx.cfg.at("sweep_grid").get<std::string>());
  validate_grid(param, grid);
  const auto d = prepare_data(ctx);
  auto st = experiment_settings(ctx, d.model);
  if (std::find(st.topk.begin(), st.topk.end(), std::size_t{1}) == st.topk.end()) st.topk.insert(st.topk.begin(), 1);
  const auto pts = sensitivity_sweep(param, grid, walk_params(ctx.cfg), [&](const WalkParams& wp) {
    ctx.err << to_string(param) << " = " << format_double(param == SweepParameter::Alpha ? wp.alpha
                                                          : param == SweepParameter::R   ? wp.r
                                                                                         : wp.l)
            << '\n';
    const auto in = build_inputs(d.series, wp, d.model.encoding, d.model.a_v, derive_seed(ctx.seed(), 0x3a1c),
                                 ctx.threads());
    return run_task(ctx, d, in, st);
  });
  const auto path = ctx.workdir() / ("sweep_" + to_string(param) + ".csv");
  {
    auto f = open_output(path);
    write_sweep_csv(pts, f);
  }
  dump_resolved(ctx, "resolved_config.sweep.json");
  ctx.out << "wrote " << pts.size() << " sweep point(s) to " << path.string() << '\n';
}

// ---------------------------------------------------------------------------
// Entry point

/// Runs the CLI; returns the process exit code (0 success, 2 usage or
/// validation error, 1 runtime failure).
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
                   const EnvLookup& env = process_env) {
  CLI::App app{"Spatio-temporal dynamic graph networks for bug triage"};
  app.require_subcommand(1);
  std::string config_path, profile, task, components, topk, out_path, events, workdir, parameter, grid;
  std::optional<long long> seed, threads, repeats;
  std::optional<double> train_frac;
  bool no_attention = false;
  bool quiet = false;
  std::vector<std::string> sets;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "Global seed");
    sub->add_option("--profile", profile, "paper or desk");
    sub->add_option("--threads", threads, "Worker cap; 1 runs fully sequentially");
    sub->add_option("--events", events, "Event log (JSON lines)");
    sub->add_option("--workdir", workdir, "Output directory");
    sub->add_option("--set", sets, "Override any config key: key=value");
    sub->add_flag("--quiet", quiet, "Suppress warnings and progress");
  };
  const auto model_flags = [&](CLI::App* sub) {
    sub->add_option("--task", task, "dap or bfp");
    sub->add_option("--components", components, "Comma list of hour, day, week");
    sub->add_flag("--no-attention", no_attention, "Mean-pool LSTM states instead of attention");
    sub->add_option("--topk", topk, "Comma list of k for top-k accuracy");
    sub->add_option("--repeats", repeats, "Monte Carlo repeats");
    sub->add_option("--train-frac", train_frac, "Training fraction (0.3, 0.5, 0.7)");
  };
  auto* synth = app.add_subcommand("synth", "Generate a synthetic event log");
  common(synth);
  synth->add_option("--out", out_path, "Output file (default <workdir>/events.jsonl)");
  auto* build = app.add_subcommand("build", "Filter the log, build snapshots and datasets");
  common(build);
  auto* trn = app.add_subcommand("train", "Train one model and save a checkpoint");
  common(trn);
  model_flags(trn);
  auto* evl = app.add_subcommand("eval", "Monte Carlo cross-validation report");
  common(evl);
  model_flags(evl);
  auto* swp = app.add_subcommand("sweep", "Sensitivity sweep over alpha, r or l");
  common(swp);
  model_flags(swp);
  swp->add_option("--parameter", parameter, "alpha, r or l");
  swp->add_option("--grid", grid, "start:stop:step or comma list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const bool previous_quiet = quiet_flag();
  quiet_flag() = quiet || previous_quiet;
  int code = 0;
  try {
    std::map<std::string, std::string> flags;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects key=value, got '" + s + "'");
      flags[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (seed) flags["seed"] = std::to_string(*seed);
    if (threads) flags["threads"] = std::to_string(*threads);
    if (repeats) flags["repeats"] = std::to_string(*repeats);
    if (train_frac) flags["train_frac"] = format_double(*train_frac);
    for (auto [key, value] : {std::pair{"profile", &profile}, {"task", &task}, {"components", &components},
                              {"topk", &topk}, {"events", &events}, {"workdir", &workdir},
                              {"sweep_parameter", &parameter}, {"sweep_grid", &grid}}) {
      if (!value->empty()) flags[key] = *value;
    }
    if (no_attention) flags["attention"] = "false";
    const CliContext ctx{resolve_config(load_config_file(config_path), env, flags), out, err};
    std::filesystem::create_directories(ctx.workdir());
    parse_task(ctx.cfg.at("task").get<std::string>());
    if (*synth) cmd_synth(ctx, out_path);
    if (*build) cmd_build(ctx);
    if (*trn) cmd_train(ctx);
    if (*evl) cmd_eval(ctx);
    if (*swp) cmd_sweep(ctx);
  } catch (const std::invalid_argument& e) {  // ValidationError, ShapeError
    err << "error: " << e.what() << '\n';
    code = 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = 1;
  }
  quiet_flag() = previous_quiet;
  return code;
}

}  // namespace stdgnn
