#pragma once

// Developer attribute prediction (DAP) and bug fixer prediction (BFP)
// datasets, the generic model input, and top-k ranking.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stdgnn/pipeline.hpp"
#include "stdgnn/textfeat.hpp"

namespace stdgnn {

enum class Task { Dap, Bfp };

inline std::string to_string(Task t) { return t == Task::Dap ? "dap" : "bfp"; }

inline Task parse_task(const std::string& s) {
  if (s == "dap") return Task::Dap;
  if (s == "bfp") return Task::Bfp;
  throw ValidationError("unknown task '" + s + "' (expected dap or bfp)");
}

// ---------------------------------------------------------------------------
// DAP

struct DapInstance {
  std::string developer;
  NodeId node = 0;
  std::size_t label = 0;
  bool tie = false;  // majority was tied; the lower component id won
};

struct DapDataset {
  std::vector<std::string> classes;  // component names, sorted
  std::vector<DapInstance> instances;
  std::size_t excluded_no_fix = 0;
  std::size_t ties = 0;
};

/// One instance per developer with at least one fixed bug. The label is the
/// developer's most frequent component among their fixed bugs.
inline DapDataset build_dap_dataset(const EventLog& log, const Vocabulary& vocab) {
  std::map<std::string, std::map<std::string, int>> counts;  // developer -> component -> fixes
  std::set<std::string> components;
  for (const auto& [id, r] : log.reports) {
    if (r.component.empty()) continue;
    ++counts[r.fixer][r.component];
    components.insert(r.component);
  }
  if (components.empty()) throw ValidationError("dap: the event log carries no bug components");
  DapDataset ds;
  std::map<std::string, std::size_t> labelled;  // component -> developers holding it as label
  std::vector<std::pair<std::string, std::string>> picks;
  std::vector<bool> ties;
  for (std::size_t n = 0; n < vocab.size(); ++n) {
    const auto it = counts.find(vocab[n]);
    if (it == counts.end()) {
      ++ds.excluded_no_fix;
      continue;
    }
    // std::map iterates components in id order, so strict > keeps the lower id on ties.
    std::string best;
    int best_count = -1;
    bool tie = false;
    for (const auto& [comp, c] : it->second) {
      if (c > best_count) {
        best = comp;
        best_count = c;
        tie = false;
      } else if (c == best_count) {
        tie = true;
      }
    }
    picks.emplace_back(vocab[n], best);
    ties.push_back(tie);
    ++labelled[best];
  }
  for (const auto& [comp, n] : labelled) ds.classes.push_back(comp);
  for (std::size_t k = 0; k < picks.size(); ++k) {
    DapInstance inst;
    inst.developer = picks[k].first;
    inst.node = static_cast<NodeId>(std::lower_bound(vocab.begin(), vocab.end(), inst.developer) - vocab.begin());
    inst.label = static_cast<std::size_t>(
        std::lower_bound(ds.classes.begin(), ds.classes.end(), picks[k].second) - ds.classes.begin());
    inst.tie = ties[k];
    ds.ties += ties[k];
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// BFP

struct BfpInstance {
  std::string bug_id;
  std::array<std::vector<NodeId>, kNumComponents> holders;  // per component, per slice
  std::vector<std::string> tokens;
  std::string fixer;
};

struct BfpDataset {
  std::vector<BfpInstance> instances;
  std::size_t dropped_no_holder = 0;
};

/// Developer holding `bug` at the end of a slice: the last holder change
/// strictly before `end_ts`, or the first holder if the bug starts later.
/// `changes` holds (timestamp, developer) in time order.
inline const std::string& holder_at(const std::vector<std::pair<std::int64_t, std::string>>& changes,
                                    std::int64_t end_ts) {
  const std::string* h = &changes.front().second;
  for (const auto& [ts, dev] : changes) {
    if (ts >= end_ts) break;
    h = &dev;
  }
  return *h;
}

inline BfpDataset build_bfp_dataset(const EventLog& log, const SeriesSet& series) {
  std::map<std::string, std::vector<std::pair<std::int64_t, std::string>>> changes;
  for (const auto& e : log.events) {  // events are in time order
    if (e.to_dev) changes[e.bug_id].emplace_back(e.timestamp, *e.to_dev);
  }
  BfpDataset ds;
  for (const auto& [id, r] : log.reports) {
    const auto it = changes.find(id);
    if (r.holder_sequence.empty() || it == changes.end()) {
      ++ds.dropped_no_holder;
      continue;
    }
    BfpInstance inst;
    inst.bug_id = id;
    inst.tokens = r.tokens;
    inst.fixer = r.fixer;
    for (std::size_t c = 0; c < kNumComponents; ++c) {
      if (!series[c]) continue;
      for (const auto& snap : series[c]->snapshots) {
        const auto& dev = holder_at(it->second, snap.end_ts);
        const auto node = series[c]->index_of(dev);
        if (!node) throw ValidationError("bfp: holder " + dev + " of " + id + " is not in the vocabulary");
        inst.holders[c].push_back(*node);
      }
    }
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

/// Fixer classes fit on training instances: developers with at least
/// `min_fixer_count` training fixes, sorted, plus a trailing "other" class
/// when some training fixer falls below the threshold.
struct FixerClasses {
  std::vector<std::string> names;
  std::optional<std::size_t> other;

  std::size_t size() const { return names.size(); }

  /// Class of `fixer`; rare or unseen fixers map to "other" when it
  /// exists, otherwise to nothing.
  std::optional<std::size_t> label_of(const std::string& fixer) const {
    const auto end = other ? names.begin() + static_cast<std::ptrdiff_t>(*other) : names.end();
    const auto it = std::lower_bound(names.begin(), end, fixer);
    if (it != end && *it == fixer) return static_cast<std::size_t>(it - names.begin());
    return other;
  }
};

inline constexpr const char* kOtherClass = "other";

inline FixerClasses fit_fixer_classes(const std::vector<std::string>& train_fixers, std::size_t min_fixer_count) {
  std::map<std::string, std::size_t> n;
  for (const auto& f : train_fixers) ++n[f];
  FixerClasses fc;
  bool rare = false;
  for (const auto& [dev, c] : n) {
    if (c >= min_fixer_count) {
      fc.names.push_back(dev);
    } else {
      rare = true;
    }
  }
  if (fc.names.empty()) throw ValidationError("bfp: no developer has enough training fixes to form a class");
  if (rare) {
    fc.other = fc.names.size();
    fc.names.push_back(kOtherClass);
  }
  return fc;
}

/// Seed for topic inference of one document, a function of its text only,
/// so identical reports receive identical topic vectors.
inline std::uint64_t text_seed(std::uint64_t seed, const Document& doc) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const auto& t : doc) {
    for (unsigned char ch : t) h = (h ^ ch) * 1099511628211ULL;
    h = (h ^ 0x1f) * 1099511628211ULL;
  }
  return derive_seed(seed, h);
}

// ---------------------------------------------------------------------------
// Generic input and model instances

/// DAP: mu = g. BFP: mu = concat(g, z).
inline Vec make_mu(Task task, const Vec& g, const std::optional<Vec>& z = std::nullopt) {
  if (task == Task::Dap) return g;
  if (!z) throw ValidationError("make_mu: BFP requires a topic vector");
  Vec mu = g;
  mu.insert(mu.end(), z->begin(), z->end());
  return mu;
}

inline Instance to_instance(const DapInstance& d, const SeriesSet& series) {
  Instance inst;
  for (std::size_t c = 0; c < kNumComponents; ++c) {
    if (series[c]) inst.nodes[c].assign(series[c]->size(), d.node);
  }
  inst.label = d.label;
  return inst;
}

inline Instance to_instance(const BfpInstance& b, Vec z, std::size_t label) {
  Instance inst;
  inst.nodes = b.holders;
  inst.z = std::move(z);
  inst.label = label;
  return inst;
}

// ---------------------------------------------------------------------------
// Predictions

struct Prediction {
  Vec scores;                       // fused output per class
  std::vector<std::size_t> ranked;  // classes by descending score, ties by index
};

/// Ranks by the pre-sigmoid fused scores `s` (same order as sigmoid(s)).
/// Classes in `exclude` are left out of the ranking.
inline Prediction make_prediction(const Scores& s, const std::optional<std::size_t>& exclude = std::nullopt) {
  Prediction p;
  p.scores = sigmoid_of(s);
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k != exclude) p.ranked.push_back(k);
  }
  std::stable_sort(p.ranked.begin(), p.ranked.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  return p;
}

inline Prediction make_prediction(const Vec& scores) {
  return make_prediction(Scores(scores.begin(), scores.end()));
}

inline std::vector<std::size_t> predict_topk(const Prediction& p, std::size_t k) {
  if (k < 1) throw ValidationError("predict_topk: k must be >= 1");
  k = std::min(k, p.ranked.size());
  return {p.ranked.begin(), p.ranked.begin() + static_cast<std::ptrdiff_t>(k)};
}

inline bool topk_hit(const Prediction& p, std::size_t truth, std::size_t k) {
  const auto top = predict_topk(p, k);
  return std::find(top.begin(), top.end(), truth) != top.end();
}

// ---------------------------------------------------------------------------
// Dumps

inline void write_dap_jsonl(const DapDataset& ds, std::ostream& out) {
  for (const auto& d : ds.instances) {
    nlohmann::ordered_json j;
    j["instance_id"] = d.developer;
    j["node"] = d.node;
    j["label"] = d.label;
    j["class"] = ds.classes[d.label];
    j["tie"] = d.tie;
    out << j.dump() << '\n';
  }
}

/// `labels` and `z` are optional per-instance extras (empty to omit).
inline void write_bfp_jsonl(const BfpDataset& ds, std::ostream& out, const std::vector<std::size_t>& labels = {},
                            const std::vector<Vec>& z = {}) {
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    const auto& b = ds.instances[i];
    nlohmann::ordered_json j;
    j["instance_id"] = b.bug_id;
    nlohmann::ordered_json holders = nlohmann::ordered_json::object();
    for (auto g : kComponents) {
      const auto c = component_index(g);
      if (!b.holders[c].empty()) holders[to_string(g)] = b.holders[c];
    }
    j["holders"] = holders;
    j["fixer"] = b.fixer;
    if (i < labels.size()) j["label"] = labels[i];
    if (i < z.size()) j["z"] = z[i];
    out << j.dump() << '\n';
  }
}

/// "instance_id,true,rank1,...,rank5"; cells past the class count stay empty.
inline void write_predictions_csv(const std::vector<std::string>& ids, const std::vector<std::size_t>& truth,
                                  const std::vector<Prediction>& preds, const std::vector<std::string>& classes,
                                  std::ostream& out) {
  if (ids.size() != truth.size() || ids.size() != preds.size()) {
    throw ValidationError("predictions: column lengths differ");
  }
  out << "instance_id,true,rank1,rank2,rank3,rank4,rank5\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << ',' << classes.at(truth[i]);
    for (std::size_t k = 0; k < 5; ++k) {
      out << ',';
      if (k < preds[i].ranked.size()) out << classes.at(preds[i].ranked[k]);
    }
    out << '\n';
  }
}

}  // namespace stdgnn
