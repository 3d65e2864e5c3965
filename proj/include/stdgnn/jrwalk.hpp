#pragma once

// Joint random walks over one snapshot. At each step a biased coin picks
// between an edge-weight transition and a neighbor-degree transition; both
// are sampled in O(1) from per-node alias tables.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "stdgnn/alias.hpp"
#include "stdgnn/common.hpp"
#include "stdgnn/ingest.hpp"
#include "stdgnn/tensor.hpp"

namespace stdgnn {

using NodeId = std::uint32_t;

struct NodeTransitions {
  std::vector<NodeId> neighbors;
  std::vector<double> edge_probs;    // w_ij / sum_p w_ip
  std::vector<double> degree_probs;  // d_j / sum_{p in N(i)} d_p
  AliasTable edge_alias;
  AliasTable degree_alias;

  bool is_sink() const { return neighbors.empty(); }
};

struct TransitionTables {
  std::vector<NodeTransitions> nodes;

  std::size_t num_nodes() const { return nodes.size(); }
  /// Reserved index one past the vocabulary.
  NodeId pad() const { return static_cast<NodeId>(nodes.size()); }
};

/// Per-node edge-preference and degree-preference distributions over
/// out-neighbors. Degree is the unweighted in+out edge count.
inline TransitionTables build_transition(const Snapshot& snap) {
  TransitionTables tables;
  tables.nodes.resize(snap.num_nodes());
  for (std::size_t i = 0; i < snap.num_nodes(); ++i) {
    auto& node = tables.nodes[i];
    const auto& row = snap.out_edges[i];
    if (row.empty()) continue;
    double weight_sum = 0.0;
    double degree_sum = 0.0;
    for (const auto& e : row) {
      node.neighbors.push_back(e.dst);
      weight_sum += e.weight;
      degree_sum += static_cast<double>(snap.total_degree(e.dst));
    }
    for (const auto& e : row) {
      node.edge_probs.push_back(e.weight / weight_sum);
      node.degree_probs.push_back(static_cast<double>(snap.total_degree(e.dst)) / degree_sum);
    }
    node.edge_alias = AliasTable::build(node.edge_probs);
    node.degree_alias = AliasTable::build(node.degree_probs);
  }
  return tables;
}

struct WalkSet {
  NodeId start = 0;
  std::vector<std::vector<NodeId>> walks;  // r walks of exactly l entries

  friend bool operator==(const WalkSet&, const WalkSet&) = default;
};

/// `r` walks of length `l` from `start`. With probability `alpha` a step
/// follows the edge-preference table, otherwise the degree-preference table
/// of the current node. Walks stop at sinks and are padded with the PAD index.
inline WalkSet jrwalk(const TransitionTables& tables, NodeId start, int r, int l, double alpha, Rng& rng) {
  if (start >= tables.num_nodes()) {
    throw ValidationError("jrwalk: unknown start node " + std::to_string(start));
  }
  if (r < 1 || l < 1) throw ValidationError("jrwalk: r and l must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("jrwalk: alpha must lie in [0, 1]");

  WalkSet out;
  out.start = start;
  out.walks.reserve(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j) {
    std::vector<NodeId> walk(static_cast<std::size_t>(l), tables.pad());
    walk[0] = start;
    NodeId cur = start;
    for (std::size_t k = 1; k < walk.size(); ++k) {
      const auto& node = tables.nodes[cur];
      if (node.is_sink()) break;
      const bool edge_step = alpha > uniform01(rng);
      const auto pick = edge_step ? node.edge_alias.sample(rng) : node.degree_alias.sample(rng);
      cur = node.neighbors[pick];
      walk[k] = cur;
    }
    out.walks.push_back(std::move(walk));
  }
  return out;
}

struct WalkParams {
  int r = 4;
  int l = 12;
  double alpha = 0.7;
};

/// Walks for every node. Node n draws from its own stream
/// derive_seed(seed, n), so the result does not depend on `threads`.
inline std::vector<WalkSet> generate_walks(const TransitionTables& tables, const WalkParams& params,
                                           std::uint64_t seed, unsigned threads = 1) {
  const std::size_t n = tables.num_nodes();
  std::vector<WalkSet> out(n);
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(derive_seed(seed, i));
      out[i] = jrwalk(tables, static_cast<NodeId>(i), params.r, params.l, params.alpha, rng);
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
    const std::size_t e = std::min(n, b + chunk);
    pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return out;
}

enum class Encoding { OneHot, EmbeddingIndex };

/// Walks of all nodes in one snapshot, flattened to (N, l*r) node indices.
/// OneHot views expand index k to e_k and PAD to the zero vector, giving the
/// (N, l*r, a_v) tensor; EmbeddingIndex leaves the lookup to the model.
class WalkTensor {
 public:
  WalkTensor() = default;
  WalkTensor(std::size_t nodes, std::size_t steps, std::size_t a_v, Encoding encoding,
             std::vector<NodeId> indices)
      : nodes_(nodes), steps_(steps), a_v_(a_v), encoding_(encoding), indices_(std::move(indices)) {}

  std::size_t num_nodes() const { return nodes_; }
  std::size_t steps() const { return steps_; }
  std::size_t width() const { return a_v_; }
  Encoding encoding() const { return encoding_; }
  NodeId pad() const { return static_cast<NodeId>(nodes_); }
  std::vector<std::size_t> shape() const { return {nodes_, steps_, a_v_}; }

  std::span<const NodeId> node_indices(std::size_t n) const {
    return {indices_.data() + n * steps_, steps_};
  }

  /// (l*r, a_v) one-hot block of node n.
  Tensor node_block(std::size_t n) const {
    Tensor block({steps_, a_v_});
    const auto idx = node_indices(n);
    for (std::size_t s = 0; s < steps_; ++s) {
      if (idx[s] != pad()) block(s, idx[s]) = 1.0;
    }
    return block;
  }

  Tensor dense() const {
    Tensor t({nodes_, steps_, a_v_});
    for (std::size_t n = 0; n < nodes_; ++n) {
      const auto idx = node_indices(n);
      for (std::size_t s = 0; s < steps_; ++s) {
        if (idx[s] != pad()) t(n, s, idx[s]) = 1.0;
      }
    }
    return t;
  }

  friend bool operator==(const WalkTensor&, const WalkTensor&) = default;

 private:
  std::size_t nodes_ = 0;
  std::size_t steps_ = 0;
  std::size_t a_v_ = 0;
  Encoding encoding_ = Encoding::OneHot;
  std::vector<NodeId> indices_;
};

/// Concatenates each node's r walks along the step axis.
inline WalkTensor walks_to_tensor(std::span<const WalkSet> all_walks, Encoding encoding, std::size_t a_v) {
  const std::size_t n = all_walks.size();
  if (n == 0) throw ValidationError("walks_to_tensor: no walk sets");
  const std::size_t r = all_walks[0].walks.size();
  const std::size_t l = r ? all_walks[0].walks[0].size() : 0;
  if (r == 0 || l == 0) throw ValidationError("walks_to_tensor: empty walks");
  if (encoding == Encoding::OneHot && a_v != n) {
    throw ValidationError("walks_to_tensor: one-hot width must equal node count");
  }
  std::vector<NodeId> indices;
  indices.reserve(n * r * l);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ws = all_walks[i];
    if (ws.walks.size() != r) throw ValidationError("walks_to_tensor: inconsistent walks per node");
    for (const auto& w : ws.walks) {
      if (w.size() != l) throw ValidationError("walks_to_tensor: inconsistent walk length");
      for (auto v : w) {
        if (v > n) throw ValidationError("walks_to_tensor: node index out of range");
        indices.push_back(v);
      }
    }
  }
  return WalkTensor(n, r * l, a_v, encoding, std::move(indices));
}

/// Debug dump: "node,walk_idx,step,visited" with PAD written as -1.
inline void write_walks_csv(std::span<const WalkSet> all_walks, NodeId pad, std::ostream& out) {
  out << "node,walk_idx,step,visited\n";
  for (const auto& ws : all_walks) {
    for (std::size_t j = 0; j < ws.walks.size(); ++j) {
      for (std::size_t k = 0; k < ws.walks[j].size(); ++k) {
        const auto v = ws.walks[j][k];
        out << ws.start << ',' << j << ',' << k << ',';
        if (v == pad) {
          out << -1;
        } else {
          out << v;
        }
        out << '\n';
      }
    }
  }
}

}  // namespace stdgnn
