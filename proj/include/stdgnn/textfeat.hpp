#pragma once

// Latent Dirichlet allocation by collapsed Gibbs sampling, with fold-in
// inference of topic proportions for new documents.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stdgnn/checkpoint.hpp"
#include "stdgnn/common.hpp"
#include "stdgnn/io.hpp"

namespace stdgnn {

using Document = std::vector<std::string>;

class LdaModel {
 public:
  std::size_t K = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<std::string> vocab;
  std::unordered_map<std::string, std::uint32_t> word_index;

  // Sampler state over the training corpus.
  std::vector<std::vector<std::uint32_t>> docs;  // word ids
  std::vector<std::vector<std::uint32_t>> z;     // topic per token
  std::vector<std::int64_t> nwk;                 // (V, K) word-topic counts
  std::vector<std::int64_t> nk;                  // (K) topic totals
  std::vector<std::int64_t> ndk;                 // (D, K) document-topic counts

  std::size_t V() const { return vocab.size(); }
  std::size_t D() const { return docs.size(); }

  std::int64_t total_tokens() const {
    std::int64_t n = 0;
    for (const auto& d : docs) n += static_cast<std::int64_t>(d.size());
    return n;
  }

  /// phi_kw = (n_wk + beta) / (n_k + V beta).
  double phi(std::size_t k, std::uint32_t w) const {
    return (static_cast<double>(nwk[w * K + k]) + beta) /
           (static_cast<double>(nk[k]) + static_cast<double>(V()) * beta);
  }

  /// (K, V) topic-word distributions.
  std::vector<std::vector<double>> topic_word() const {
    std::vector<std::vector<double>> out(K, std::vector<double>(V()));
    for (std::size_t k = 0; k < K; ++k) {
      for (std::uint32_t w = 0; w < V(); ++w) out[k][w] = phi(k, w);
    }
    return out;
  }

  /// Smoothed topic proportions of training document d.
  std::vector<double> doc_topics(std::size_t d) const {
    std::vector<double> theta(K);
    const double n = static_cast<double>(docs[d].size());
    for (std::size_t k = 0; k < K; ++k) {
      theta[k] = (static_cast<double>(ndk[d * K + k]) + alpha) / (n + static_cast<double>(K) * alpha);
    }
    return theta;
  }

  /// One collapsed Gibbs sweep over every token.
  void sweep(Rng& rng) {
    std::vector<double> p(K);
    const double vbeta = static_cast<double>(V()) * beta;
    for (std::size_t d = 0; d < D(); ++d) {
      std::int64_t* nd = ndk.data() + d * K;
      for (std::size_t i = 0; i < docs[d].size(); ++i) {
        const auto w = docs[d][i];
        std::int64_t* nw = nwk.data() + static_cast<std::size_t>(w) * K;
        auto k = z[d][i];
        --nd[k];
        --nw[k];
        --nk[k];
        double total = 0.0;
        for (std::size_t t = 0; t < K; ++t) {
          total += (static_cast<double>(nd[t]) + alpha) * (static_cast<double>(nw[t]) + beta) /
                   (static_cast<double>(nk[t]) + vbeta);
          p[t] = total;
        }
        k = sample_cumulative(p, total, rng);
        z[d][i] = static_cast<std::uint32_t>(k);
        ++nd[k];
        ++nw[k];
        ++nk[k];
      }
    }
  }

  /// True iff all count matrices are nonnegative and agree with the topic
  /// assignments, so the token total is conserved.
  bool counts_consistent() const {
    std::vector<std::int64_t> wk(V() * K, 0), tk(K, 0), dk(D() * K, 0);
    for (std::size_t d = 0; d < D(); ++d) {
      for (std::size_t i = 0; i < docs[d].size(); ++i) {
        ++wk[docs[d][i] * K + z[d][i]];
        ++tk[z[d][i]];
        ++dk[d * K + z[d][i]];
      }
    }
    const auto nonneg = [](const std::vector<std::int64_t>& v) {
      return std::all_of(v.begin(), v.end(), [](std::int64_t x) { return x >= 0; });
    };
    return wk == nwk && tk == nk && dk == ndk && nonneg(nwk) && nonneg(nk) && nonneg(ndk);
  }

  /// Word ids of in-vocabulary tokens.
  std::vector<std::uint32_t> encode(const Document& doc) const {
    std::vector<std::uint32_t> ids;
    for (const auto& t : doc) {
      const auto it = word_index.find(t);
      if (it != word_index.end()) ids.push_back(it->second);
    }
    return ids;
  }

  static std::size_t sample_cumulative(const std::vector<double>& cumulative, double total, Rng& rng) {
    const double u = uniform01(rng) * total;
    std::size_t k = 0;
    while (k + 1 < cumulative.size() && cumulative[k] <= u) ++k;
    return k;
  }
};

/// Fits LDA with symmetric priors alpha = beta = 1/K. `on_sweep` is called
/// after every sweep with the 1-based sweep index.
inline LdaModel fit_lda(const std::vector<Document>& corpus, std::size_t K, int iterations, std::uint64_t seed,
                        const std::function<void(int, const LdaModel&)>& on_sweep = {}) {
  if (K < 2) throw ValidationError("lda: K must be >= 2");
  if (iterations < 0) throw ValidationError("lda: iterations must be >= 0");
  LdaModel m;
  m.K = K;
  m.alpha = m.beta = 1.0 / static_cast<double>(K);
  std::map<std::string, std::uint32_t> sorted;
  for (const auto& doc : corpus) {
    for (const auto& t : doc) sorted.emplace(t, 0);
  }
  if (sorted.empty()) throw ValidationError("lda: empty corpus");
  for (auto& [word, id] : sorted) {
    id = static_cast<std::uint32_t>(m.vocab.size());
    m.vocab.push_back(word);
    m.word_index.emplace(word, id);
  }
  Rng rng(derive_seed(seed, 0x1da));
  m.nwk.assign(m.V() * K, 0);
  m.nk.assign(K, 0);
  m.ndk.assign(corpus.size() * K, 0);
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    m.docs.push_back(m.encode(corpus[d]));
    auto& zd = m.z.emplace_back();
    for (auto w : m.docs.back()) {
      const auto k = static_cast<std::uint32_t>(uniform_index(rng, K));
      zd.push_back(k);
      ++m.nwk[w * K + k];
      ++m.nk[k];
      ++m.ndk[d * K + k];
    }
  }
  for (int it = 1; it <= iterations; ++it) {
    m.sweep(rng);
    if (on_sweep) on_sweep(it, m);
  }
  return m;
}

struct TopicVector {
  std::vector<double> z;
  bool flagged = false;  // no in-vocabulary tokens; z is uniform
};

/// Fold-in Gibbs sampling with the topic-word counts frozen. Returns the
/// smoothed proportions (n_dk + alpha) / (n_d + K alpha) averaged over the
/// last min(50, iterations) sweeps.
inline TopicVector infer_topics(const LdaModel& m, const Document& doc, int iterations = 100,
                                std::uint64_t seed = 0) {
  if (iterations < 1) throw ValidationError("lda: inference needs at least one sweep");
  TopicVector out;
  const std::size_t K = m.K;
  const auto ids = m.encode(doc);
  if (ids.empty()) {
    out.z.assign(K, 1.0 / static_cast<double>(K));
    out.flagged = true;
    return out;
  }
  Rng rng(seed);
  std::vector<std::int64_t> nd(K, 0);
  std::vector<std::uint32_t> zt(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    zt[i] = static_cast<std::uint32_t>(uniform_index(rng, K));
    ++nd[zt[i]];
  }
  // phi is fixed during fold-in.
  std::vector<double> phi_w(ids.size() * K);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t k = 0; k < K; ++k) phi_w[i * K + k] = m.phi(k, ids[i]);
  }
  const int averaged = std::min(iterations, 50);
  out.z.assign(K, 0.0);
  std::vector<double> p(K);
  const double denom = static_cast<double>(ids.size()) + static_cast<double>(K) * m.alpha;
  for (int it = 1; it <= iterations; ++it) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      --nd[zt[i]];
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        total += (static_cast<double>(nd[k]) + m.alpha) * phi_w[i * K + k];
        p[k] = total;
      }
      zt[i] = static_cast<std::uint32_t>(LdaModel::sample_cumulative(p, total, rng));
      ++nd[zt[i]];
    }
    if (it > iterations - averaged) {
      for (std::size_t k = 0; k < K; ++k) out.z[k] += (static_cast<double>(nd[k]) + m.alpha) / denom;
    }
  }
  double s = 0.0;
  for (auto& v : out.z) s += v /= static_cast<double>(averaged);
  // Remove the accumulated rounding so the vector sums to 1 to machine precision.
  for (auto& v : out.z) v /= s;
  return out;
}

/// Topic vectors for many documents; document i uses seed derive_seed(seed, i).
inline std::vector<TopicVector> infer_all(const LdaModel& m, const std::vector<Document>& docs, int iterations,
                                          std::uint64_t seed, unsigned threads = 1) {
  std::vector<TopicVector> out(docs.size());
  const auto work = [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out[i] = infer_topics(m, docs[i], iterations, derive_seed(seed, i));
  };
  const std::size_t n = docs.size();
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

/// Held-out perplexity exp(-sum log p(w) / N) with document proportions
/// from fold-in inference. Unknown tokens are skipped.
inline double perplexity(const LdaModel& m, const std::vector<Document>& docs, int iterations = 50,
                         std::uint64_t seed = 0) {
  double log_lik = 0.0;
  std::size_t n = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto theta = infer_topics(m, docs[d], iterations, derive_seed(seed, d)).z;
    for (auto w : m.encode(docs[d])) {
      double p = 0.0;
      for (std::size_t k = 0; k < m.K; ++k) p += theta[k] * m.phi(k, w);
      log_lik += std::log(p);
      ++n;
    }
  }
  if (n == 0) throw ValidationError("perplexity: no in-vocabulary tokens");
  return std::exp(-log_lik / static_cast<double>(n));
}

/// Model dump: JSON header (K, priors, vocabulary) then int64 LE counts:
/// word-topic (V x K), topic totals (K), document-topic (D x K).
inline void save_lda(const std::filesystem::path& path, const LdaModel& m) {
  nlohmann::json header{{"kind", "lda"},       {"K", m.K},         {"alpha", m.alpha},
                        {"beta", m.beta},      {"vocabulary", m.vocab},
                        {"num_docs", m.D()},   {"layout", "nwk(V,K) int64, nk(K) int64, ndk(D,K) int64"}};
  std::string payload;
  for (auto v : m.nwk) detail::append_le<std::int64_t>(payload, v);
  for (auto v : m.nk) detail::append_le<std::int64_t>(payload, v);
  for (auto v : m.ndk) detail::append_le<std::int64_t>(payload, v);
  write_container(path, header, payload);
}

/// Restores a model usable for inference. Training tokens are not stored,
/// so `docs` and `z` stay empty while `ndk` is restored.
inline LdaModel load_lda(const std::filesystem::path& path) {
  const auto c = read_container(path);
  if (c.header.value("kind", "") != "lda") throw RuntimeFailure(path.string() + ": not an LDA dump");
  LdaModel m;
  m.K = c.header.at("K").get<std::size_t>();
  m.alpha = c.header.at("alpha").get<double>();
  m.beta = c.header.at("beta").get<double>();
  m.vocab = c.header.at("vocabulary").get<std::vector<std::string>>();
  for (std::uint32_t i = 0; i < m.vocab.size(); ++i) m.word_index.emplace(m.vocab[i], i);
  const auto num_docs = c.header.at("num_docs").get<std::size_t>();
  const std::size_t expected = (m.V() * m.K + m.K + num_docs * m.K) * 8;
  if (c.payload.size() != expected) throw RuntimeFailure(path.string() + ": payload size mismatch");
  std::size_t off = 0;
  const auto read = [&](std::vector<std::int64_t>& dst, std::size_t n) {
    dst.resize(n);
    for (auto& v : dst) {
      v = detail::read_le<std::int64_t>(c.payload.data() + off);
      off += 8;
    }
  };
  read(m.nwk, m.V() * m.K);
  read(m.nk, m.K);
  read(m.ndk, num_docs * m.K);
  return m;
}

/// "bug_id,t0,...,tK-1".
inline void write_topic_vectors_csv(const std::vector<std::string>& ids, const std::vector<TopicVector>& vecs,
                                    std::ostream& out) {
  if (ids.size() != vecs.size()) throw ValidationError("topic export: id and vector counts differ");
  out << "bug_id";
  const std::size_t K = vecs.empty() ? 0 : vecs[0].z.size();
  for (std::size_t k = 0; k < K; ++k) out << ",t" << k;
  out << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (double v : vecs[i].z) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace stdgnn
