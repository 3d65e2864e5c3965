#pragma once

// Graph recurrent convolutional network. Each periodic component (hour,
// day, week) runs conv -> conv -> average pool per slice, an LSTM across
// slices and attention pooling, then an FC head. Component heads are fused
// by a weighted sigmoid.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "stdgnn/common.hpp"
#include "stdgnn/ingest.hpp"
#include "stdgnn/io.hpp"
#include "stdgnn/jrwalk.hpp"
#include "stdgnn/layers.hpp"
#include "stdgnn/optim.hpp"
#include "stdgnn/tensor.hpp"

namespace stdgnn {

inline constexpr std::array<Granularity, 3> kComponents{Granularity::Hourly, Granularity::Daily,
                                                        Granularity::Weekly};
inline constexpr std::size_t kNumComponents = kComponents.size();

inline std::size_t component_index(Granularity g) { return static_cast<std::size_t>(g); }

struct GrcnnConfig {
  std::size_t K1 = 64;
  std::size_t K2 = 64;
  std::size_t H = 256;
  std::size_t fc1 = 2048;
  std::size_t fc2 = 2048;
  double dropout = 0.5;
  double lr = 0.01;
  int max_epoch = 100;
  int patience = 10;
  std::size_t batch_size = 32;
  std::array<std::size_t, kNumComponents> T{24, 7, 4};
  std::array<bool, kNumComponents> active{true, true, true};
  bool attention = true;
  bool standard_lstm = false;
  bool renormalize = false;  // normalize the fused output before the loss
  Encoding encoding = Encoding::OneHot;
  std::size_t a_v = 0;  // input width; must equal num_nodes for OneHot
  std::size_t num_nodes = 0;
  std::size_t num_classes = 0;
  std::size_t extra_dim = 0;  // per-instance features appended to g

  static GrcnnConfig desk() {
    GrcnnConfig c;
    c.K1 = c.K2 = 8;
    c.H = 16;
    c.fc1 = c.fc2 = 32;
    c.T = {6, 3, 2};
    return c;
  }

  bool is_active(Granularity g) const { return active[component_index(g)]; }
  std::size_t slices(Granularity g) const { return T[component_index(g)]; }

  void validate() const {
    for (auto [name, v] : {std::pair{"K1", K1}, {"K2", K2}, {"H", H}, {"fc1", fc1}, {"fc2", fc2},
                           {"batch_size", batch_size}, {"num_classes", num_classes}, {"a_v", a_v},
                           {"num_nodes", num_nodes}}) {
      if (v < 1) throw ValidationError(std::string("grcnn: ") + name + " must be >= 1");
    }
    if (!active[0] && !active[1] && !active[2]) throw ValidationError("grcnn: no active component");
    for (auto g : kComponents) {
      if (is_active(g) && slices(g) < 1) throw ValidationError("grcnn: T_" + to_string(g) + " must be >= 1");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("grcnn: dropout must lie in [0, 1)");
    if (!(lr > 0.0)) throw ValidationError("grcnn: lr must be > 0");
    if (max_epoch < 1 || patience < 1) throw ValidationError("grcnn: max_epoch and patience must be >= 1");
    if (encoding == Encoding::OneHot && a_v != num_nodes) {
      throw ValidationError("grcnn: one-hot input width must equal the node count");
    }
  }
};

/// Walk tensors of every slice, per component. slices[c][t] is slice t of
/// component c, oldest first.
struct ModelInputs {
  std::array<std::vector<WalkTensor>, kNumComponents> slices;
};

/// One sample: the node to read in each slice of each component, optional
/// extra features, and the class label.
struct Instance {
  std::array<std::vector<NodeId>, kNumComponents> nodes;
  Vec z;
  std::size_t label = 0;
};

struct ComponentParams {
  Embedding embedding;
  ConvLayer conv1;
  ConvLayer conv2;
  LstmCell lstm;
  AttentionHead attention;
  DenseLayer fc1;
  DenseLayer fc2;
  DenseLayer out;
  Param fusion;  // elementwise fusion weights, length C
};

/// Output of one component for one instance.
struct ComponentOutput {
  Vec g;
  std::vector<Vec> h_seq;
  Vec betas;
  Vec y_hat;
};

using Scores = std::vector<long double>;

/// Pre-sigmoid fused scores s = sum_c w_c * y_c, accumulated in extended
/// precision.
inline Scores fused_scores(const std::vector<Vec>& heads, const std::vector<Vec>& weights) {
  if (heads.empty() || heads.size() != weights.size()) throw ShapeError("fuse: heads and weights differ in count");
  const std::size_t C = heads[0].size();
  Scores s(C, 0.0L);
  for (std::size_t c = 0; c < heads.size(); ++c) {
    if (heads[c].size() != C || weights[c].size() != C) throw ShapeError("fuse: length mismatch");
    for (std::size_t j = 0; j < C; ++j) s[j] += static_cast<long double>(weights[c][j]) * heads[c][j];
  }
  return s;
}

inline long double sigmoid_ext(long double x) {
  if (x >= 0.0L) return 1.0L / (1.0L + std::exp(-x));
  const long double e = std::exp(x);
  return e / (1.0L + e);
}

inline long double softplus(long double x) {
  return x > 0.0L ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline Vec sigmoid_of(const Scores& s) {
  Vec y(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) y[j] = static_cast<double>(sigmoid_ext(s[j]));
  return y;
}

/// sigmoid(sum_c w_c * y_c).
inline Vec fuse(const std::vector<Vec>& heads, const std::vector<Vec>& weights) {
  return sigmoid_of(fused_scores(heads, weights));
}

/// -log of the fused output at `label` (clamped at 1e-12), computed from
/// the scores: -log sigmoid(s) = softplus(-s). With `renormalize` the fused
/// output is divided by its sum first. `ds` receives d loss / d s.
inline long double fused_loss(std::span<const long double> s, std::size_t label, bool renormalize,
                              Vec* ds = nullptr) {
  const std::size_t C = s.size();
  if (label >= C) throw ValidationError("label " + std::to_string(label) + " out of range");
  const long double cap = -std::log(static_cast<long double>(kProbClamp));
  if (ds) ds->assign(C, 0.0);
  if (!renormalize) {
    const long double l = softplus(-s[label]);
    if (l >= cap) return cap;
    if (ds) (*ds)[label] = -static_cast<double>(sigmoid_ext(-s[label]));
    return l;
  }
  long double total = 0.0L;
  for (auto v : s) total += sigmoid_ext(v);
  const long double l = softplus(-s[label]) + std::log(total);
  if (l >= cap) return cap;
  if (ds) {
    for (std::size_t j = 0; j < C; ++j) {
      (*ds)[j] = static_cast<double>(sigmoid_ext(s[j]) * sigmoid_ext(-s[j]) / total);
    }
    (*ds)[label] -= static_cast<double>(sigmoid_ext(-s[label]));
  }
  return l;
}

class Grcnn {
 public:
  Grcnn() = default;

  Grcnn(const GrcnnConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(seed, 1));
    for (auto g : kComponents) {
      if (!cfg_.is_active(g)) continue;
      const auto name = to_string(g);
      auto& p = comp_[component_index(g)];
      if (cfg_.encoding == Encoding::EmbeddingIndex) {
        p.embedding = Embedding(cfg_.num_nodes, cfg_.a_v, name + ".embedding");
        p.embedding.init(rng);
      }
      p.conv1 = ConvLayer(cfg_.a_v, cfg_.K1, name + ".conv1");
      p.conv2 = ConvLayer(cfg_.K1, cfg_.K2, name + ".conv2");
      p.lstm = LstmCell(cfg_.K2, cfg_.H, name + ".lstm", cfg_.standard_lstm);
      p.attention = AttentionHead(cfg_.H, cfg_.H, name + ".attention");
      p.fc1 = DenseLayer(cfg_.H + cfg_.extra_dim, cfg_.fc1, Activation::ReLU, name + ".fc1");
      p.fc2 = DenseLayer(cfg_.fc1, cfg_.fc2, Activation::ReLU, name + ".fc2");
      p.out = DenseLayer(cfg_.fc2, cfg_.num_classes, Activation::Softmax, name + ".out");
      p.fusion = Param(name + ".fusion", {cfg_.num_classes});
      p.conv1.init(rng);
      p.conv2.init(rng);
      p.lstm.init(rng);
      p.attention.init(rng);
      p.fc1.init(rng);
      p.fc2.init(rng);
      p.out.init(rng);
      p.fusion.value.fill(1.0);
    }
  }

  const GrcnnConfig& config() const { return cfg_; }
  ComponentParams& component(Granularity g) { return comp_[component_index(g)]; }
  const ComponentParams& component(Granularity g) const { return comp_[component_index(g)]; }

  /// Trainable parameters in a fixed order (component order, then layer order).
  ParamList params() {
    ParamList out;
    for (auto g : kComponents) {
      if (!cfg_.is_active(g)) continue;
      auto& p = comp_[component_index(g)];
      const auto add = [&](ParamList l) { out.insert(out.end(), l.begin(), l.end()); };
      if (cfg_.encoding == Encoding::EmbeddingIndex) add(p.embedding.params());
      add(p.conv1.params());
      add(p.conv2.params());
      add(p.lstm.params());
      if (cfg_.attention) add(p.attention.params());
      add(p.fc1.params());
      add(p.fc2.params());
      add(p.out.params());
      out.push_back(&p.fusion);
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->value.size();
    return n;
  }

  /// Component forward for a node that may change from slice to slice.
  ComponentOutput component_forward(Granularity g, std::span<const WalkTensor> slices, std::span<const NodeId> nodes,
                                    std::span<const double> z = {}) const {
    Trace tr;
    run_component(g, slices, nodes, z, nullptr, tr);
    return {tr.g, tr.h_seq, tr.betas, tr.y_hat};
  }

  /// Component forward for a node that is fixed across slices.
  ComponentOutput component_forward(Granularity g, std::span<const WalkTensor> slices, NodeId node,
                                    std::span<const double> z = {}) const {
    const std::vector<NodeId> nodes(slices.size(), node);
    return component_forward(g, slices, nodes, z);
  }

  /// Pre-sigmoid fused scores (eval mode).
  Scores predict_scores(const ModelInputs& in, const Instance& inst) const {
    std::vector<Vec> heads, weights;
    for (auto g : kComponents) {
      if (!cfg_.is_active(g)) continue;
      Trace tr;
      run_component(g, in.slices[component_index(g)], inst.nodes[component_index(g)], inst.z, nullptr, tr);
      heads.push_back(std::move(tr.y_hat));
      weights.push_back(comp_[component_index(g)].fusion.value.storage());
    }
    return fused_scores(heads, weights);
  }

  /// Fused output (eval mode).
  Vec predict(const ModelInputs& in, const Instance& inst) const { return sigmoid_of(predict_scores(in, inst)); }

  long double loss(const ModelInputs& in, const Instance& inst) const {
    return fused_loss(predict_scores(in, inst), inst.label, cfg_.renormalize);
  }

  /// Forward and backward for one instance. Gradients accumulate into the
  /// parameters; `dropout_rng` enables train-mode dropout.
  double accumulate_gradients(const ModelInputs& in, const Instance& inst, Rng* dropout_rng = nullptr) {
    std::vector<Trace> traces;
    std::vector<Granularity> order;
    std::vector<Vec> heads, weights;
    for (auto g : kComponents) {
      if (!cfg_.is_active(g)) continue;
      traces.emplace_back();
      run_component(g, in.slices[component_index(g)], inst.nodes[component_index(g)], inst.z, dropout_rng,
                    traces.back());
      order.push_back(g);
      heads.push_back(traces.back().y_hat);
      weights.push_back(comp_[component_index(g)].fusion.value.storage());
    }
    Vec ds;
    const auto l = static_cast<double>(fused_loss(fused_scores(heads, weights), inst.label, cfg_.renormalize, &ds));
    for (std::size_t c = 0; c < order.size(); ++c) {
      auto& p = comp_[component_index(order[c])];
      Vec d_head(ds.size());
      for (std::size_t j = 0; j < ds.size(); ++j) {
        p.fusion.grad[j] += ds[j] * heads[c][j];
        d_head[j] = ds[j] * weights[c][j];
      }
      backward_component(order[c], traces[c], d_head);
    }
    return l;
  }

 private:
  struct Trace {
    std::vector<std::span<const NodeId>> idx;
    std::vector<Tensor> embedded;
    std::vector<ConvLayer::Cache> c1, c2;
    std::vector<LstmCell::Step> steps;
    AttentionHead::Cache att;
    std::vector<Vec> h_seq;
    Vec g, betas;
    DenseLayer::Cache f1, f2, o;
    DropoutMask m1, m2;
    Vec y_hat;
  };

  void run_component(Granularity g, std::span<const WalkTensor> slices, std::span<const NodeId> nodes,
                     std::span<const double> z, Rng* dropout_rng, Trace& tr) const {
    const auto& p = comp_[component_index(g)];
    const std::size_t T = cfg_.slices(g);
    if (slices.size() != T || nodes.size() != T) {
      throw ShapeError("grcnn " + to_string(g) + ": expected " + std::to_string(T) + " slices, got " +
                       std::to_string(slices.size()) + " walk tensors and " + std::to_string(nodes.size()) +
                       " nodes");
    }
    if (z.size() != cfg_.extra_dim) {
      throw ShapeError("grcnn: expected " + std::to_string(cfg_.extra_dim) + " extra features, got " +
                       std::to_string(z.size()));
    }
    const bool one_hot = cfg_.encoding == Encoding::OneHot;
    tr.idx.resize(T);
    tr.c1.resize(T);
    tr.c2.resize(T);
    if (!one_hot) tr.embedded.resize(T);
    Vec h(cfg_.H, 0.0), c(cfg_.H, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& wt = slices[t];
      if (wt.num_nodes() != cfg_.num_nodes || nodes[t] >= wt.num_nodes()) {
        throw ShapeError("grcnn: walk tensor or node index inconsistent with the configured node count");
      }
      tr.idx[t] = wt.node_indices(nodes[t]);
      Tensor x1;
      if (one_hot) {
        x1 = p.conv1.forward_one_hot(tr.idx[t], &tr.c1[t]);
      } else {
        tr.embedded[t] = p.embedding.forward(tr.idx[t]);
        x1 = p.conv1.forward(tr.embedded[t], &tr.c1[t]);
      }
      const Tensor x2 = p.conv2.forward(x1, &tr.c2[t]);
      Vec pooled(cfg_.K2, 0.0);
      for (std::size_t r = 0; r < x2.dim(0); ++r) {
        for (std::size_t k = 0; k < cfg_.K2; ++k) pooled[k] += x2(r, k);
      }
      for (auto& v : pooled) v /= static_cast<double>(x2.dim(0));
      tr.steps.push_back(p.lstm.forward(pooled, h, c));
      h = tr.steps.back().h;
      c = tr.steps.back().c;
      tr.h_seq.push_back(h);
    }
    if (cfg_.attention) {
      auto res = p.attention.forward(tr.h_seq, &tr.att);
      tr.g = std::move(res.g);
      tr.betas = std::move(res.betas);
    } else {
      tr.g.assign(cfg_.H, 0.0);
      for (const auto& ht : tr.h_seq) {
        for (std::size_t k = 0; k < cfg_.H; ++k) tr.g[k] += ht[k];
      }
      for (auto& v : tr.g) v /= static_cast<double>(T);
      tr.betas.assign(T, 1.0 / static_cast<double>(T));
    }
    Vec mu = tr.g;
    mu.insert(mu.end(), z.begin(), z.end());
    Vec a1 = p.fc1.forward(mu, &tr.f1);
    tr.m1 = make_dropout_mask(a1.size(), cfg_.dropout, dropout_rng);
    tr.m1.apply(a1);
    Vec a2 = p.fc2.forward(a1, &tr.f2);
    tr.m2 = make_dropout_mask(a2.size(), cfg_.dropout, dropout_rng);
    tr.m2.apply(a2);
    tr.y_hat = p.out.forward(a2, &tr.o);
  }

  void backward_component(Granularity g, const Trace& tr, std::span<const double> d_head) {
    auto& p = comp_[component_index(g)];
    const std::size_t T = tr.steps.size();
    Vec d = p.out.backward(tr.o, d_head);
    tr.m2.apply(d);
    d = p.fc2.backward(tr.f2, d);
    tr.m1.apply(d);
    d = p.fc1.backward(tr.f1, d);
    const std::span<const double> dg(d.data(), cfg_.H);

    std::vector<Vec> dh_seq;
    if (cfg_.attention) {
      dh_seq = p.attention.backward(tr.att, dg);
    } else {
      Vec share(dg.begin(), dg.end());
      for (auto& v : share) v /= static_cast<double>(T);
      dh_seq.assign(T, share);
    }

    Vec dh(cfg_.H, 0.0), dc(cfg_.H, 0.0);
    for (std::size_t t = T; t-- > 0;) {
      for (std::size_t k = 0; k < cfg_.H; ++k) dh[k] += dh_seq[t][k];
      auto sg = p.lstm.backward(tr.steps[t], dh, dc);
      dh = std::move(sg.dh_prev);
      dc = std::move(sg.dc_prev);
      const std::size_t rows = tr.c2[t].output.dim(0);
      Tensor dx2({rows, cfg_.K2});
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < cfg_.K2; ++k) dx2(r, k) = sg.dx[k] / static_cast<double>(rows);
      }
      const Tensor dx1 = p.conv2.backward(tr.c2[t], dx2);
      if (cfg_.encoding == Encoding::OneHot) {
        p.conv1.backward_one_hot(tr.c1[t], tr.idx[t], dx1);
      } else {
        const Tensor de = p.conv1.backward(tr.c1[t], dx1);
        p.embedding.backward(tr.idx[t], de);
      }
    }
  }

  GrcnnConfig cfg_;
  std::array<ComponentParams, kNumComponents> comp_;
};

// ---------------------------------------------------------------------------

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_acc = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<EpochStats> curve;
  int best_epoch = 0;
  double best_val_acc = std::numeric_limits<double>::quiet_NaN();
};

/// Returns true to keep training.
using EpochCallback = std::function<bool(const EpochStats&)>;

template <class T>
std::size_t argmax(std::span<const T> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline std::size_t argmax(const Vec& v) { return argmax(std::span<const double>(v)); }

/// Top-1 accuracy and mean loss in eval mode.
inline std::pair<double, double> evaluate(const Grcnn& model, const ModelInputs& in,
                                          std::span<const Instance> data) {
  if (data.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double correct = 0.0;
  double loss = 0.0;
  for (const auto& inst : data) {
    const auto s = model.predict_scores(in, inst);
    if (argmax(std::span<const long double>(s)) == inst.label) correct += 1.0;
    loss += static_cast<double>(fused_loss(s, inst.label, model.config().renormalize));
  }
  const auto n = static_cast<double>(data.size());
  return {correct / n, loss / n};
}

/// Mini-batch Adam training. With a validation set, training stops after
/// `patience` epochs without a validation accuracy improvement and the
/// best parameters are restored.
inline TrainResult train(Grcnn& model, const ModelInputs& in, std::span<const Instance> train_set,
                         std::span<const Instance> val_set, std::uint64_t seed,
                         const EpochCallback& on_epoch = {}) {
  if (train_set.empty()) throw ValidationError("train: empty training set");
  const auto& cfg = model.config();
  Rng rng(derive_seed(seed, 2));
  AdamState adam;
  adam.lr = cfg.lr;
  auto params = model.params();
  std::vector<Tensor> best;
  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= cfg.max_epoch; ++epoch) {
    shuffle_in_place(order, rng);
    double total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      zero_grads(params);
      for (std::size_t k = b; k < e; ++k) total += model.accumulate_gradients(in, train_set[order[k]], &rng);
      const double scale = 1.0 / static_cast<double>(e - b);
      for (auto* p : params) {
        for (auto& g : p->grad.storage()) g *= scale;
      }
      if (!std::isfinite(total)) throw RuntimeFailure("train: loss diverged at epoch " + std::to_string(epoch));
      adam_update(adam, params);
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = total / static_cast<double>(order.size());
    if (!val_set.empty()) std::tie(st.val_acc, st.val_loss) = evaluate(model, in, val_set);
    result.curve.push_back(st);
    bool keep_going = !on_epoch || on_epoch(st);
    if (!val_set.empty()) {
      if (result.best_epoch == 0 || st.val_acc > result.best_val_acc) {
        result.best_epoch = epoch;
        result.best_val_acc = st.val_acc;
        best.clear();
        for (auto* p : params) best.push_back(p->value);
      } else if (epoch - result.best_epoch >= cfg.patience) {
        keep_going = false;
      }
    } else {
      result.best_epoch = epoch;
    }
    if (!keep_going) break;
  }
  if (!best.empty()) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best[k];
  }
  return result;
}

inline void write_loss_curve_csv(const TrainResult& r, std::ostream& out) {
  out << "epoch,train_loss,val_loss,val_acc\n";
  for (const auto& e : r.curve) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
        << format_double(e.val_acc) << '\n';
  }
}

// ---------------------------------------------------------------------------

/// Per-node representations g_i of one component, nodes fixed across slices.
struct NodeEmbedding {
  Tensor g;                        // (N, H)
  std::vector<Vec> betas;          // per node, length T
};

inline NodeEmbedding embed_nodes(const Grcnn& model, Granularity g, std::span<const WalkTensor> slices,
                                 unsigned threads = 1) {
  const auto& cfg = model.config();
  if (!cfg.is_active(g)) throw ValidationError("embed_nodes: component " + to_string(g) + " is inactive");
  const std::size_t n = cfg.num_nodes;
  NodeEmbedding out;
  out.g = Tensor({n, cfg.H});
  out.betas.resize(n);
  const Vec z(cfg.extra_dim, 0.0);
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto res = model.component_forward(g, slices, static_cast<NodeId>(i), z);
      std::copy(res.g.begin(), res.g.end(), out.g.row(i).begin());
      out.betas[i] = std::move(res.betas);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    work(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t b = std::min(n, t * chunk);
    pool.emplace_back(work, b, std::min(n, b + chunk));
  }
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace stdgnn
