#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stdgnn/common.hpp"

namespace stdgnn {

/// Walker/Vose alias table: O(n) construction, O(1) sampling.
///
/// Index k is drawn by picking a column uniformly and keeping it with
/// probability prob[k], otherwise jumping to alias[k].
class AliasTable {
 public:
  AliasTable() = default;

  /// Builds a table from nonnegative weights. Weights are normalized by
  /// their sum, so a probability vector is reproduced as given.
  static AliasTable build(std::span<const double> p) {
    if (p.empty()) throw ValidationError("alias table: empty distribution");
    double total = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!(p[k] >= 0.0) || !std::isfinite(p[k])) {
        throw ValidationError("alias table: entry " + std::to_string(k) +
                              " is negative or non-finite");
      }
      total += p[k];
    }
    if (!(total > 0.0)) throw ValidationError("alias table: weights sum to zero");

    const std::size_t n = p.size();
    AliasTable t;
    t.prob_.assign(n, 0.0);
    t.alias_.resize(n);
    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small;
    std::vector<std::uint32_t> large;
    small.reserve(n);
    large.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      scaled[k] = p[k] / total * static_cast<double>(n);
      t.alias_[k] = static_cast<std::uint32_t>(k);
      (scaled[k] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(k));
    }
    while (!small.empty() && !large.empty()) {
      const auto s = small.back();
      small.pop_back();
      const auto g = large.back();
      t.prob_[s] = scaled[s];
      t.alias_[s] = g;
      // Subtract in this order to keep rounding error on the donor column.
      scaled[g] = (scaled[g] + scaled[s]) - 1.0;
      if (scaled[g] < 1.0) {
        large.pop_back();
        small.push_back(g);
      }
    }
    // Leftovers are 1 up to rounding.
    for (auto k : large) t.prob_[k] = 1.0;
    for (auto k : small) t.prob_[k] = 1.0;
    return t;
  }

  std::uint32_t sample(Rng& rng) const {
    const auto column = static_cast<std::uint32_t>(uniform_index(rng, prob_.size()));
    return uniform01(rng) < prob_[column] ? column : alias_[column];
  }

  /// Probability mass implied by the table, for verification.
  std::vector<double> reconstruct() const {
    const double n = static_cast<double>(prob_.size());
    std::vector<double> out(prob_.size(), 0.0);
    for (std::size_t k = 0; k < prob_.size(); ++k) {
      out[k] += prob_[k] / n;
      out[alias_[k]] += (1.0 - prob_[k]) / n;
    }
    return out;
  }

  std::size_t size() const { return prob_.size(); }
  const std::vector<double>& prob() const { return prob_; }
  const std::vector<std::uint32_t>& alias() const { return alias_; }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

}  // namespace stdgnn
