#pragma once

// Monte Carlo cross-validation: stratified splits, per-repeat training and
// scoring, a frequency baseline, reports and parameter sweeps.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "stdgnn/grcnn.hpp"
#include "stdgnn/io.hpp"
#include "stdgnn/tasks.hpp"
#include "stdgnn/textfeat.hpp"

namespace stdgnn {

struct SplitPlan {
  double train_frac = 0.7;
  double val_frac = 0.1;
  int repeats = 10;
  std::uint64_t seed = 0;

  double test_frac() const { return 1.0 - train_frac - val_frac; }

  void validate() const {
    if (!(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0)) {
      throw ValidationError("split plan: need train_frac > 0, val_frac >= 0 and train_frac + val_frac < 1");
    }
    if (repeats < 1) throw ValidationError("split plan: repeats must be >= 1");
  }

  /// Split label used in reports, e.g. "train0.7".
  std::string label() const { return "train" + format_double(train_frac); }
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Throws unless the three parts are disjoint and cover 0..n-1.
inline void check_split(const Split& s, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (auto i : *part) {
      if (i >= n || seen[i]++) throw RuntimeFailure("split: parts overlap or index out of range");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw RuntimeFailure("split: parts do not cover the data");
}

/// Stratified sampling without replacement. Repeat k shuffles each class
/// with stream derive_seed(seed, k); a class takes round(f * size) train and
/// val instances and leaves the rest to test. Classes with fewer than three
/// instances stay whole in train.
inline std::vector<Split> make_splits(std::span<const std::size_t> labels, const SplitPlan& plan) {
  plan.validate();
  if (labels.empty()) throw ValidationError("make_splits: no instances");
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& [c, members] : by_class) {
    if (members.size() < 3) {
      warn("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
           " instance(s); kept whole in train");
    }
  }
  std::vector<Split> out;
  for (int k = 0; k < plan.repeats; ++k) {
    Rng rng(derive_seed(plan.seed, static_cast<std::uint64_t>(k)));
    Split s;
    for (auto [c, members] : by_class) {
      const std::size_t n = members.size();
      if (n < 3) {
        s.train.insert(s.train.end(), members.begin(), members.end());
        continue;
      }
      shuffle_in_place(members, rng);
      const auto n_train = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::llround(plan.train_frac * static_cast<double>(n))), 1, n);
      const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(plan.val_frac * static_cast<double>(n))));
      const auto b = members.begin();
      s.train.insert(s.train.end(), b, b + static_cast<std::ptrdiff_t>(n_train));
      s.val.insert(s.val.end(), b + static_cast<std::ptrdiff_t>(n_train),
                   b + static_cast<std::ptrdiff_t>(n_train + n_val));
      s.test.insert(s.test.end(), b + static_cast<std::ptrdiff_t>(n_train + n_val), members.end());
    }
    for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
    check_split(s, labels.size());
    out.push_back(std::move(s));
  }
  return out;
}

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t n = 0;
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) {
    s.mean = s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

/// Ranks classes by training frequency (ties by index) and scores the same
/// ranking against every test label. `exclude` is left out of the ranking.
inline double frequency_baseline(std::span<const std::size_t> train_labels, std::span<const std::size_t> test_labels,
                                 std::size_t num_classes, std::size_t k,
                                 const std::optional<std::size_t>& exclude = std::nullopt) {
  if (train_labels.empty()) throw ValidationError("frequency_baseline: empty training labels");
  if (test_labels.empty()) return std::numeric_limits<double>::quiet_NaN();
  Vec freq(num_classes, 0.0);
  for (auto l : train_labels) freq.at(l) += 1.0;
  const auto ranking = make_prediction(freq).ranked;
  std::vector<bool> top(num_classes, false);
  std::size_t taken = 0;
  for (auto c : ranking) {
    if (taken == k) break;
    if (c == exclude) continue;
    top[c] = true;
    ++taken;
  }
  double hits = 0.0;
  for (auto l : test_labels) hits += top.at(l) ? 1.0 : 0.0;
  return hits / static_cast<double>(test_labels.size());
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentSettings {
  GrcnnConfig model = GrcnnConfig::desk();
  SplitPlan plan;
  std::vector<std::size_t> topk{1};
  std::size_t lda_topics = 10;
  int lda_iterations = 500;
  int lda_infer_iterations = 100;
  std::size_t min_fixer_count = 5;
  bool shuffle_labels = false;  // no-signal control
  unsigned threads = 1;
  std::uint64_t seed = 0;
  bool keep_predictions = false;
  std::function<void(int repeat)> on_repeat_start;  // may throw to fail the repeat
  std::function<void(int repeat, Grcnn& model, const std::vector<std::string>& classes)> on_trained;
  std::function<void(int repeat, const LdaModel& lda)> on_lda;
};

struct RepeatResult {
  int repeat = 0;
  bool failed = false;
  std::string error;
  std::size_t n_train = 0, n_val = 0, n_test = 0, n_scored = 0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::map<std::size_t, double> acc;       // top-k accuracy of the model
  std::map<std::size_t, double> baseline;  // top-k accuracy of the frequency baseline
  double seconds = 0.0;
  std::vector<std::string> classes;
  std::vector<std::string> test_ids;
  std::vector<std::size_t> test_truth;
  std::vector<Prediction> predictions;
  TrainResult training;
};

struct ExperimentReport {
  Task task = Task::Dap;
  SplitPlan plan;
  std::vector<std::size_t> topk;
  std::vector<RepeatResult> repeats;
  std::map<std::size_t, Summary> acc;
  std::map<std::size_t, Summary> baseline;
  std::size_t num_classes = 0;  // classes of the first successful repeat, "other" excluded
  nlohmann::ordered_json config;
  double wall_seconds = 0.0;

  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(repeats.begin(), repeats.end(), [](const RepeatResult& r) { return r.failed; }));
  }
};

namespace detail {

/// Everything one repeat needs once labels and features are fixed.
struct PreparedRepeat {
  std::vector<Instance> train, val, test;
  std::vector<std::string> test_ids;
  std::vector<std::string> classes;
  std::optional<std::size_t> other;
  std::size_t extra_dim = 0;
};

inline void fit_and_score(const PreparedRepeat& p, const ModelInputs& in, const ExperimentSettings& st,
                          RepeatResult& r) {
  auto cfg = st.model;
  cfg.num_classes = p.classes.size();
  cfg.extra_dim = p.extra_dim;
  Grcnn model(cfg, derive_seed(st.seed, static_cast<std::uint64_t>(r.repeat), 1));
  r.training = train(model, in, p.train, p.val, derive_seed(st.seed, static_cast<std::uint64_t>(r.repeat), 2));
  if (st.on_trained) st.on_trained(r.repeat, model, p.classes);
  r.best_epoch = r.training.best_epoch;
  r.epochs_run = static_cast<int>(r.training.curve.size());
  r.classes = p.classes;
  r.n_train = p.train.size();
  r.n_val = p.val.size();
  r.n_test = p.test.size();

  std::vector<std::size_t> train_labels, scored_labels;
  for (const auto& i : p.train) train_labels.push_back(i.label);
  std::map<std::size_t, double> hits;
  for (std::size_t t = 0; t < p.test.size(); ++t) {
    const auto& inst = p.test[t];
    auto pred = make_prediction(model.predict_scores(in, inst), p.other);
    if (inst.label != p.other) {
      scored_labels.push_back(inst.label);
      for (auto k : st.topk) hits[k] += topk_hit(pred, inst.label, k) ? 1.0 : 0.0;
    }
    if (st.keep_predictions) {
      r.test_ids.push_back(p.test_ids[t]);
      r.test_truth.push_back(inst.label);
      r.predictions.push_back(std::move(pred));
    }
  }
  r.n_scored = scored_labels.size();
  if (scored_labels.empty()) throw RuntimeFailure("no scorable test instances");
  for (auto k : st.topk) {
    r.acc[k] = hits[k] / static_cast<double>(scored_labels.size());
    r.baseline[k] = frequency_baseline(train_labels, scored_labels, p.classes.size(), k, p.other);
  }
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

inline std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5f1e));
  shuffle_in_place(perm, rng);
  return perm;
}

/// Runs `repeat_fn` for every repeat (in parallel when threads > 1),
/// applies the failed-repeat policy and aggregates.
inline ExperimentReport run_repeats(Task task, const ExperimentSettings& st,
                                    const std::function<void(int, RepeatResult&)>& repeat_fn) {
  st.plan.validate();
  if (st.topk.empty()) throw ValidationError("experiment: topk list is empty");
  for (auto k : st.topk) {
    if (k < 1) throw ValidationError("experiment: topk entries must be >= 1");
  }
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.task = task;
  rep.plan = st.plan;
  rep.topk = st.topk;
  rep.repeats.resize(static_cast<std::size_t>(st.plan.repeats));
  std::mutex error_mu;
  std::exception_ptr fatal;
  const auto one = [&](int k) {
    auto& r = rep.repeats[static_cast<std::size_t>(k)];
    r.repeat = k;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (st.on_repeat_start) st.on_repeat_start(k);
      repeat_fn(k, r);
    } catch (const std::runtime_error& e) {
      r.failed = true;
      r.error = e.what();
    } catch (...) {
      std::lock_guard lock(error_mu);
      if (!fatal) fatal = std::current_exception();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(st.threads, static_cast<unsigned>(st.plan.repeats)));
  if (workers == 1) {
    for (int k = 0; k < st.plan.repeats; ++k) one(k);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int k = next++; k < st.plan.repeats; k = next++) one(k);
      });
    }
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  for (const auto& r : rep.repeats) {
    if (r.failed) warn("repeat " + std::to_string(r.repeat) + " failed: " + r.error);
  }
  if (rep.failures() >= 3) {
    throw RuntimeFailure("experiment: " + std::to_string(rep.failures()) + " of " +
                         std::to_string(st.plan.repeats) + " repeats failed; first error: " +
                         std::find_if(rep.repeats.begin(), rep.repeats.end(), [](const RepeatResult& r) {
                           return r.failed;
                         })->error);
  }
  for (auto k : st.topk) {
    std::vector<double> a, b;
    for (const auto& r : rep.repeats) {
      if (r.failed) continue;
      a.push_back(r.acc.at(k));
      b.push_back(r.baseline.at(k));
    }
    rep.acc[k] = summarize(a);
    rep.baseline[k] = summarize(b);
  }
  for (const auto& r : rep.repeats) {
    if (r.failed) continue;
    const bool has_other = !r.classes.empty() && r.classes.back() == kOtherClass && task == Task::Bfp;
    rep.num_classes = r.classes.size() - (has_other ? 1 : 0);
    break;
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace detail

/// DAP experiment: instances are developers, labels their majority component.
inline ExperimentReport run_experiment(const DapDataset& ds, const SeriesSet& series, const ModelInputs& in,
                                       const ExperimentSettings& st) {
  if (ds.instances.empty()) throw ValidationError("dap: empty dataset");
  std::vector<std::size_t> labels;
  for (const auto& d : ds.instances) labels.push_back(d.label);
  if (st.shuffle_labels) labels = detail::pick(labels, detail::shuffled_order(labels.size(), st.seed));
  const auto splits = make_splits(labels, st.plan);
  std::vector<Instance> all;
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    auto inst = to_instance(ds.instances[i], series);
    inst.label = labels[i];
    all.push_back(std::move(inst));
  }
  return detail::run_repeats(Task::Dap, st, [&](int k, RepeatResult& r) {
    const auto& s = splits[static_cast<std::size_t>(k)];
    check_split(s, all.size());
    detail::PreparedRepeat p;
    p.train = detail::pick(all, s.train);
    p.val = detail::pick(all, s.val);
    p.test = detail::pick(all, s.test);
    for (auto i : s.test) p.test_ids.push_back(ds.instances[i].developer);
    p.classes = ds.classes;
    detail::fit_and_score(p, in, st, r);
  });
}

/// BFP experiment. Per repeat: fixer classes and the LDA model are fit on the
/// training split only; every report then receives its inferred topic vector.
inline ExperimentReport run_experiment(const BfpDataset& ds, const ModelInputs& in, const ExperimentSettings& st) {
  if (ds.instances.empty()) throw ValidationError("bfp: empty dataset");
  std::vector<std::string> fixers;
  for (const auto& b : ds.instances) fixers.push_back(b.fixer);
  if (st.shuffle_labels) fixers = detail::pick(fixers, detail::shuffled_order(fixers.size(), st.seed));
  // Stratify on fixer identity.
  std::vector<std::string> names(fixers);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<std::size_t> strata;
  for (const auto& f : fixers) {
    strata.push_back(static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), f) - names.begin()));
  }
  const auto splits = make_splits(strata, st.plan);
  const unsigned inner_threads = st.threads > 1 && st.plan.repeats > 1 ? 1 : st.threads;
  return detail::run_repeats(Task::Bfp, st, [&](int k, RepeatResult& r) {
    const auto& s = splits[static_cast<std::size_t>(k)];
    check_split(s, ds.instances.size());
    const auto classes = fit_fixer_classes(detail::pick(fixers, s.train), st.min_fixer_count);
    std::vector<Document> train_docs;
    for (auto i : s.train) train_docs.push_back(ds.instances[i].tokens);
    const auto lda_seed = derive_seed(st.seed, static_cast<std::uint64_t>(k), 3);
    const auto lda = fit_lda(train_docs, st.lda_topics, st.lda_iterations, lda_seed);
    if (st.on_lda) st.on_lda(k, lda);

    // Topic vectors depend on text only; infer each distinct document once.
    std::vector<Vec> z(ds.instances.size());
    {
      std::vector<std::thread> pool;
      const unsigned n = std::max(1u, inner_threads);
      for (unsigned w = 0; w < n; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t i = w; i < ds.instances.size(); i += n) {
            const auto& doc = ds.instances[i].tokens;
            z[i] = infer_topics(lda, doc, st.lda_infer_iterations, text_seed(lda_seed, doc)).z;
          }
        });
      }
      for (auto& t : pool) t.join();
    }

    detail::PreparedRepeat p;
    p.classes = classes.names;
    p.other = classes.other;
    p.extra_dim = st.lda_topics;
    std::size_t unseen = 0;
    const auto fill = [&](const std::vector<std::size_t>& idx, std::vector<Instance>& out, bool test) {
      for (auto i : idx) {
        const auto label = classes.label_of(fixers[i]);
        if (!label) {
          ++unseen;
          continue;
        }
        out.push_back(to_instance(ds.instances[i], z[i], *label));
        if (test) p.test_ids.push_back(ds.instances[i].bug_id);
      }
    };
    fill(s.train, p.train, false);
    fill(s.val, p.val, false);
    fill(s.test, p.test, true);
    if (unseen > 0) {
      warn("bfp repeat " + std::to_string(k) + ": " + std::to_string(unseen) +
           " instance(s) with fixers unseen in training excluded");
    }
    detail::fit_and_score(p, in, st, r);
  });
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::ordered_json report_json(const ExperimentReport& rep) {
  using J = nlohmann::ordered_json;
  J j;
  j["task"] = to_string(rep.task);
  j["split"] = rep.plan.label();
  j["plan"] = J{{"train_frac", rep.plan.train_frac},
                {"val_frac", rep.plan.val_frac},
                {"test_frac", rep.plan.test_frac()},
                {"repeats", rep.plan.repeats}};
  j["num_classes"] = rep.num_classes;
  J repeats = J::array();
  for (const auto& r : rep.repeats) {
    J x;
    x["repeat"] = r.repeat;
    x["failed"] = r.failed;
    if (r.failed) {
      x["error"] = r.error;
    } else {
      x["n_train"] = r.n_train;
      x["n_val"] = r.n_val;
      x["n_test"] = r.n_test;
      x["n_scored"] = r.n_scored;
      x["best_epoch"] = r.best_epoch;
      x["epochs_run"] = r.epochs_run;
      for (const auto& [k, v] : r.acc) x["acc@" + std::to_string(k)] = v;
      for (const auto& [k, v] : r.baseline) x["baseline_acc@" + std::to_string(k)] = v;
    }
    repeats.push_back(x);
  }
  j["repeats"] = repeats;
  J summary;
  for (const auto& [k, s] : rep.acc) summary["acc@" + std::to_string(k)] = J{{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}};
  for (const auto& [k, s] : rep.baseline) {
    summary["baseline_acc@" + std::to_string(k)] = J{{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}};
  }
  j["summary"] = summary;
  j["failed_repeats"] = rep.failures();
  j["config"] = rep.config;
  return j;
}

/// Wall-clock times, kept apart from the report so reports are reproducible.
inline nlohmann::ordered_json timing_json(const ExperimentReport& rep) {
  nlohmann::ordered_json j;
  j["wall_seconds"] = rep.wall_seconds;
  auto per = nlohmann::ordered_json::array();
  for (const auto& r : rep.repeats) per.push_back(r.seconds);
  j["repeat_seconds"] = per;
  return j;
}

/// "task,split,repeat,metric,value" with per-repeat rows, then mean and sd rows.
inline void write_report_csv(const ExperimentReport& rep, std::ostream& out) {
  const auto task = to_string(rep.task);
  const auto split = rep.plan.label();
  out << "task,split,repeat,metric,value\n";
  const auto row = [&](const std::string& repeat, const std::string& metric, double v) {
    out << task << ',' << split << ',' << repeat << ',' << metric << ',' << format_double(v) << '\n';
  };
  for (const auto& r : rep.repeats) {
    if (r.failed) continue;
    for (const auto& [k, v] : r.acc) row(std::to_string(r.repeat), "acc@" + std::to_string(k), v);
    for (const auto& [k, v] : r.baseline) row(std::to_string(r.repeat), "baseline_acc@" + std::to_string(k), v);
  }
  for (const auto& [k, s] : rep.acc) {
    row("mean", "acc@" + std::to_string(k), s.mean);
    row("sd", "acc@" + std::to_string(k), s.sd);
  }
  for (const auto& [k, s] : rep.baseline) {
    row("mean", "baseline_acc@" + std::to_string(k), s.mean);
    row("sd", "baseline_acc@" + std::to_string(k), s.sd);
  }
}

// ---------------------------------------------------------------------------
// Sensitivity sweeps

enum class SweepParameter { Alpha, R, L };

inline SweepParameter parse_sweep_parameter(const std::string& s) {
  if (s == "alpha") return SweepParameter::Alpha;
  if (s == "r") return SweepParameter::R;
  if (s == "l") return SweepParameter::L;
  throw ValidationError("unknown sweep parameter '" + s + "' (expected alpha, r or l)");
}

inline std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::Alpha: return "alpha";
    case SweepParameter::R: return "r";
    case SweepParameter::L: return "l";
  }
  return "?";
}

/// Grid from "start:stop:step" (inclusive, tolerant to rounding) or a comma
/// list. "0:1:0.1" gives 11 points.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  const auto num = [&](const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("grid: bad number '" + s + "' in '" + text + "'");
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw ValidationError("grid: expected start:stop:step, got '" + text + "'");
    const double a = num(parts[0]), b = num(parts[1]), step = num(parts[2]);
    if (!(step > 0.0) || b < a) throw ValidationError("grid: need step > 0 and stop >= start in '" + text + "'");
    const auto n = static_cast<long long>(std::floor((b - a) / step + 1e-9));
    for (long long i = 0; i <= n; ++i) {
      // Round to 12 significant digits so 0.1 * 3 prints as 0.3.
      const double v = a + static_cast<double>(i) * step;
      out.push_back(std::stod(format_double(std::round(v * 1e12) / 1e12)));
    }
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(num(p));
  }
  if (out.empty()) throw ValidationError("grid: empty grid");
  return out;
}

inline void validate_grid(SweepParameter p, const std::vector<double>& grid) {
  if (grid.empty()) throw ValidationError("sweep: empty grid");
  for (double v : grid) {
    if (p == SweepParameter::Alpha && !(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("sweep: alpha values must lie in [0, 1]");
    }
    if (p != SweepParameter::Alpha && (v < 1.0 || v != std::floor(v))) {
      throw ValidationError("sweep: " + to_string(p) + " values must be positive integers");
    }
  }
}

inline WalkParams with_value(WalkParams w, SweepParameter p, double v) {
  switch (p) {
    case SweepParameter::Alpha: w.alpha = v; break;
    case SweepParameter::R: w.r = static_cast<int>(v); break;
    case SweepParameter::L: w.l = static_cast<int>(v); break;
  }
  return w;
}

struct SweepPoint {
  double value = 0.0;
  Summary acc;
};

/// Runs `experiment` once per grid value with only the swept walk parameter
/// changed, recording top-1 accuracy.
inline std::vector<SweepPoint> sensitivity_sweep(SweepParameter p, const std::vector<double>& grid,
                                                 const WalkParams& base,
                                                 const std::function<ExperimentReport(const WalkParams&)>& experiment) {
  validate_grid(p, grid);
  std::vector<SweepPoint> out;
  for (double v : grid) {
    const auto rep = experiment(with_value(base, p, v));
    out.push_back(SweepPoint{v, rep.acc.at(1)});
  }
  return out;
}

/// "value,mean_acc,sd".
inline void write_sweep_csv(const std::vector<SweepPoint>& pts, std::ostream& out) {
  out << "value,mean_acc,sd\n";
  for (const auto& p : pts) {
    out << format_double(p.value) << ',' << format_double(p.acc.mean) << ',' << format_double(p.acc.sd) << '\n';
  }
}

}  // namespace stdgnn
