#pragma once

// Layers with hand-written forward and backward passes. Forward methods are
// const and return a cache; backward methods accumulate into Param::grad and
// return the gradient with respect to the layer input.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stdgnn/common.hpp"
#include "stdgnn/tensor.hpp"

namespace stdgnn {

using Vec = std::vector<double>;

/// Glorot/Xavier uniform initialization.
inline void xavier_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.storage()) v = (2.0 * uniform01(rng) - 1.0) * bound;
}

// ---------------------------------------------------------------------------

/// Valid 1-D convolution along the row axis with a window of three rows,
/// followed by ReLU. Kernels are stored as (K, 1, 3, C_in).
struct ConvLayer {
  static constexpr std::size_t kWidth = 3;

  Param weight;
  Param bias;

  ConvLayer() = default;
  ConvLayer(std::size_t in_channels, std::size_t kernels, const std::string& name)
      : weight(name + ".weight", {kernels, 1, kWidth, in_channels}), bias(name + ".bias", {kernels}) {}

  std::size_t kernels() const { return weight.value.dim(0); }
  std::size_t in_channels() const { return weight.value.dim(3); }

  void init(Rng& rng) {
    xavier_uniform(weight.value, kWidth * in_channels(), kWidth * kernels(), rng);
    bias.value.fill(0.0);
  }

  ParamList params() { return {&weight, &bias}; }

  struct Cache {
    Tensor input;
    Tensor output;
  };

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const {
    if (x.rank() != 2 || x.dim(1) != in_channels()) {
      throw ShapeError("conv: expected (rows, " + std::to_string(in_channels()) + ") input, got " +
                       Tensor::shape_string(x.shape()));
    }
    if (x.dim(0) < kWidth) {
      throw ShapeError("conv: need at least 3 rows, got " + std::to_string(x.dim(0)));
    }
    const std::size_t rows = x.dim(0) - (kWidth - 1);
    const std::size_t k_count = kernels();
    const std::size_t c_in = in_channels();
    const std::size_t span_len = kWidth * c_in;
    Tensor y({rows, k_count});
    const double* w = weight.value.data();
    for (std::size_t r = 0; r < rows; ++r) {
      // Rows r..r+2 are contiguous, so the window is one flat span.
      const double* window = x.data() + r * c_in;
      for (std::size_t k = 0; k < k_count; ++k) {
        const double* wk = w + k * span_len;
        double acc = bias.value[k];
        for (std::size_t j = 0; j < span_len; ++j) {
          if (window[j] != 0.0) acc += wk[j] * window[j];
        }
        y(r, k) = acc > 0.0 ? acc : 0.0;
      }
    }
    if (cache) {
      cache->input = x;
      cache->output = y;
    }
    return y;
  }

  Tensor backward(const Cache& cache, const Tensor& dy, bool want_input_grad = true) {
    const auto& x = cache.input;
    const std::size_t rows = cache.output.dim(0);
    const std::size_t k_count = kernels();
    const std::size_t c_in = in_channels();
    const std::size_t span_len = kWidth * c_in;
    Tensor dx;
    if (want_input_grad) dx = Tensor(x.shape());
    double* gw = weight.grad.data();
    const double* w = weight.value.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* window = x.data() + r * c_in;
      double* dwindow = want_input_grad ? dx.data() + r * c_in : nullptr;
      for (std::size_t k = 0; k < k_count; ++k) {
        if (cache.output(r, k) <= 0.0) continue;  // ReLU gate
        const double g = dy(r, k);
        if (g == 0.0) continue;
        bias.grad[k] += g;
        double* gwk = gw + k * span_len;
        for (std::size_t j = 0; j < span_len; ++j) {
          if (window[j] != 0.0) gwk[j] += g * window[j];
        }
        if (dwindow) {
          const double* wk = w + k * span_len;
          for (std::size_t j = 0; j < span_len; ++j) dwindow[j] += g * wk[j];
        }
      }
    }
    return dx;
  }

  /// Same as forward() on the one-hot rows e_{idx[s]}, with indices
  /// >= in_channels() standing for all-zero rows. Costs O(rows * K).
  Tensor forward_one_hot(std::span<const std::uint32_t> idx, Cache* cache = nullptr) const {
    if (idx.size() < kWidth) throw ShapeError("conv: need at least 3 rows, got " + std::to_string(idx.size()));
    const std::size_t rows = idx.size() - (kWidth - 1);
    const std::size_t k_count = kernels();
    const std::size_t c_in = in_channels();
    Tensor y({rows, k_count});
    const double* w = weight.value.data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < k_count; ++k) {
        double acc = bias.value[k];
        for (std::size_t tap = 0; tap < kWidth; ++tap) {
          const std::size_t c = idx[r + tap];
          if (c < c_in) acc += w[(k * kWidth + tap) * c_in + c];
        }
        y(r, k) = acc > 0.0 ? acc : 0.0;
      }
    }
    if (cache) cache->output = y;
    return y;
  }

  void backward_one_hot(const Cache& cache, std::span<const std::uint32_t> idx, const Tensor& dy) {
    const std::size_t rows = cache.output.dim(0);
    const std::size_t k_count = kernels();
    const std::size_t c_in = in_channels();
    double* gw = weight.grad.data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < k_count; ++k) {
        if (cache.output(r, k) <= 0.0) continue;
        const double g = dy(r, k);
        if (g == 0.0) continue;
        bias.grad[k] += g;
        for (std::size_t tap = 0; tap < kWidth; ++tap) {
          const std::size_t c = idx[r + tap];
          if (c < c_in) gw[(k * kWidth + tap) * c_in + c] += g;
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------

/// LSTM cell. The input and output gates read the previous cell state
/// through their recurrent matrices; `standard` switches them to the
/// previous hidden state instead.
struct LstmCell {
  Param W_f, W_i, W_o, W_c;
  Param U_f, U_i, U_o, U_c;
  Param b_f, b_i, b_o, b_c;
  bool standard = false;

  LstmCell() = default;
  LstmCell(std::size_t input, std::size_t hidden, const std::string& name, bool standard_wiring = false)
      : W_f(name + ".W_f", {hidden, input}),
        W_i(name + ".W_i", {hidden, input}),
        W_o(name + ".W_o", {hidden, input}),
        W_c(name + ".W_c", {hidden, input}),
        U_f(name + ".U_f", {hidden, hidden}),
        U_i(name + ".U_i", {hidden, hidden}),
        U_o(name + ".U_o", {hidden, hidden}),
        U_c(name + ".U_c", {hidden, hidden}),
        b_f(name + ".b_f", {hidden}),
        b_i(name + ".b_i", {hidden}),
        b_o(name + ".b_o", {hidden}),
        b_c(name + ".b_c", {hidden}),
        standard(standard_wiring) {}

  std::size_t hidden() const { return b_f.value.size(); }
  std::size_t input() const { return W_f.value.dim(1); }

  void init(Rng& rng) {
    for (auto* w : {&W_f, &W_i, &W_o, &W_c}) xavier_uniform(w->value, input(), hidden(), rng);
    for (auto* u : {&U_f, &U_i, &U_o, &U_c}) xavier_uniform(u->value, hidden(), hidden(), rng);
    for (auto* b : {&b_i, &b_o, &b_c}) b->value.fill(0.0);
    b_f.value.fill(1.0);
  }

  ParamList params() {
    return {&W_f, &W_i, &W_o, &W_c, &U_f, &U_i, &U_o, &U_c, &b_f, &b_i, &b_o, &b_c};
  }

  struct Step {
    Vec x, h_prev, c_prev;
    Vec f, i, o, g;  // gates and candidate
    Vec c, h, tanh_c;
  };

  Step forward(std::span<const double> x, std::span<const double> h_prev, std::span<const double> c_prev) const {
    const std::size_t H = hidden();
    expect_length(x, input(), "lstm input");
    expect_length(h_prev, H, "lstm h_prev");
    expect_length(c_prev, H, "lstm c_prev");
    Step s;
    s.x.assign(x.begin(), x.end());
    s.h_prev.assign(h_prev.begin(), h_prev.end());
    s.c_prev.assign(c_prev.begin(), c_prev.end());
    const std::span<const double> gate_state = standard ? h_prev : c_prev;

    const auto affine = [&](const Param& W, const Param& U, const Param& b, std::span<const double> r) {
      Vec a(b.value.storage());
      gemv_add(W.value, x, a);
      gemv_add(U.value, r, a);
      return a;
    };
    s.f = affine(W_f, U_f, b_f, h_prev);
    s.i = affine(W_i, U_i, b_i, gate_state);
    s.o = affine(W_o, U_o, b_o, gate_state);
    s.g = affine(W_c, U_c, b_c, h_prev);
    s.c.resize(H);
    s.h.resize(H);
    s.tanh_c.resize(H);
    for (std::size_t k = 0; k < H; ++k) {
      s.f[k] = sigmoid(s.f[k]);
      s.i[k] = sigmoid(s.i[k]);
      s.o[k] = sigmoid(s.o[k]);
      s.g[k] = std::tanh(s.g[k]);
      s.c[k] = s.f[k] * c_prev[k] + s.i[k] * s.g[k];
      s.tanh_c[k] = std::tanh(s.c[k]);
      s.h[k] = s.o[k] * s.tanh_c[k];
    }
    return s;
  }

  struct StepGrad {
    Vec dx, dh_prev, dc_prev;
  };

  /// `dh` and `dc` are the total gradients flowing into h_t and c_t.
  StepGrad backward(const Step& s, std::span<const double> dh, std::span<const double> dc) {
    const std::size_t H = hidden();
    Vec da_f(H), da_i(H), da_o(H), da_c(H);
    StepGrad out;
    out.dc_prev.assign(H, 0.0);
    out.dh_prev.assign(H, 0.0);
    out.dx.assign(input(), 0.0);
    for (std::size_t k = 0; k < H; ++k) {
      const double dct = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
      da_o[k] = dh[k] * s.tanh_c[k] * s.o[k] * (1.0 - s.o[k]);
      da_f[k] = dct * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
      da_i[k] = dct * s.g[k] * s.i[k] * (1.0 - s.i[k]);
      da_c[k] = dct * s.i[k] * (1.0 - s.g[k] * s.g[k]);
      out.dc_prev[k] = dct * s.f[k];
    }
    const Vec& gate_state = standard ? s.h_prev : s.c_prev;
    Vec& d_gate_state = standard ? out.dh_prev : out.dc_prev;

    const auto accumulate = [&](Param& W, Param& U, Param& b, const Vec& da, const Vec& r, Vec& dr) {
      outer_add(W.grad, da, s.x);
      outer_add(U.grad, da, r);
      for (std::size_t k = 0; k < H; ++k) b.grad[k] += da[k];
      gemv_t_add(W.value, da, out.dx);
      gemv_t_add(U.value, da, dr);
    };
    accumulate(W_f, U_f, b_f, da_f, s.h_prev, out.dh_prev);
    accumulate(W_i, U_i, b_i, da_i, gate_state, d_gate_state);
    accumulate(W_o, U_o, b_o, da_o, gate_state, d_gate_state);
    accumulate(W_c, U_c, b_c, da_c, s.h_prev, out.dh_prev);
    return out;
  }
};

/// Single LSTM step returning (h_t, c_t).
inline std::pair<Vec, Vec> lstm_step(const LstmCell& cell, std::span<const double> x,
                                     std::span<const double> h_prev, std::span<const double> c_prev) {
  auto s = cell.forward(x, h_prev, c_prev);
  return {std::move(s.h), std::move(s.c)};
}

// ---------------------------------------------------------------------------

/// Additive attention pooling: e_t = v^T tanh(W h_t + b), beta = softmax(e),
/// g = sum_t beta_t h_t.
struct AttentionHead {
  Param W_e;  // (A, H)
  Param b_e;  // (A)
  Param v_e;  // (A)

  AttentionHead() = default;
  AttentionHead(std::size_t hidden, std::size_t width, const std::string& name)
      : W_e(name + ".W_e", {width, hidden}), b_e(name + ".b_e", {width}), v_e(name + ".v_e", {width}) {}

  std::size_t width() const { return b_e.value.size(); }
  std::size_t hidden() const { return W_e.value.dim(1); }

  void init(Rng& rng) {
    xavier_uniform(W_e.value, hidden(), width(), rng);
    b_e.value.fill(0.0);
    xavier_uniform(v_e.value, width(), 1, rng);
  }

  ParamList params() { return {&W_e, &b_e, &v_e}; }

  struct Result {
    Vec g;
    Vec betas;
    Vec scores;
  };

  struct Cache {
    std::vector<Vec> h;
    std::vector<Vec> a;  // tanh activations
    Vec betas;
  };

  Result forward(const std::vector<Vec>& h_seq, Cache* cache = nullptr) const {
    if (h_seq.empty()) throw ShapeError("attention: empty sequence");
    const std::size_t H = hidden();
    const std::size_t A = width();
    Result res;
    std::vector<Vec> acts;
    for (const auto& h : h_seq) {
      expect_length(h, H, "attention h_t");
      Vec u(b_e.value.storage());
      gemv_add(W_e.value, h, u);
      double e = 0.0;
      for (std::size_t k = 0; k < A; ++k) {
        u[k] = std::tanh(u[k]);
        e += v_e.value[k] * u[k];
      }
      res.scores.push_back(e);
      acts.push_back(std::move(u));
    }
    res.betas = softmax(res.scores);
    res.g.assign(H, 0.0);
    for (std::size_t t = 0; t < h_seq.size(); ++t) {
      for (std::size_t k = 0; k < H; ++k) res.g[k] += res.betas[t] * h_seq[t][k];
    }
    if (cache) {
      cache->h = h_seq;
      cache->a = std::move(acts);
      cache->betas = res.betas;
    }
    return res;
  }

  std::vector<Vec> backward(const Cache& cache, std::span<const double> dg) {
    const std::size_t T = cache.h.size();
    const std::size_t H = hidden();
    const std::size_t A = width();
    Vec dbeta(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < H; ++k) dbeta[t] += dg[k] * cache.h[t][k];
    }
    double weighted = 0.0;
    for (std::size_t t = 0; t < T; ++t) weighted += cache.betas[t] * dbeta[t];
    std::vector<Vec> dh(T, Vec(H, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < H; ++k) dh[t][k] = cache.betas[t] * dg[k];
      const double de = cache.betas[t] * (dbeta[t] - weighted);
      if (de == 0.0) continue;
      Vec du(A);
      for (std::size_t k = 0; k < A; ++k) {
        v_e.grad[k] += de * cache.a[t][k];
        du[k] = de * v_e.value[k] * (1.0 - cache.a[t][k] * cache.a[t][k]);
        b_e.grad[k] += du[k];
      }
      outer_add(W_e.grad, du, cache.h[t]);
      gemv_t_add(W_e.value, du, dh[t]);
    }
    return dh;
  }
};

// ---------------------------------------------------------------------------

enum class Activation { None, Softmax, Sigmoid, ReLU };

/// y = activation(W x + b).
struct DenseLayer {
  Param W;  // (out, in)
  Param b;  // (out)
  Activation activation = Activation::None;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act, const std::string& name)
      : W(name + ".W", {out, in}), b(name + ".b", {out}), activation(act) {}

  std::size_t in() const { return W.value.dim(1); }
  std::size_t out() const { return W.value.dim(0); }

  void init(Rng& rng) {
    xavier_uniform(W.value, in(), out(), rng);
    b.value.fill(0.0);
  }

  ParamList params() { return {&W, &b}; }

  struct Cache {
    Vec x;
    Vec y;
  };

  Vec forward(std::span<const double> x, Cache* cache = nullptr) const {
    expect_length(x, in(), "dense input");
    Vec z(b.value.storage());
    gemv_add(W.value, x, z);
    switch (activation) {
      case Activation::None: break;
      case Activation::Softmax: z = softmax(z); break;
      case Activation::Sigmoid:
        for (auto& v : z) v = sigmoid(v);
        break;
      case Activation::ReLU:
        for (auto& v : z) v = v > 0.0 ? v : 0.0;
        break;
    }
    if (cache) {
      cache->x.assign(x.begin(), x.end());
      cache->y = z;
    }
    return z;
  }

  Vec backward(const Cache& cache, std::span<const double> dy) {
    const std::size_t n = out();
    Vec dz(dy.begin(), dy.end());
    switch (activation) {
      case Activation::None: break;
      case Activation::Softmax: {
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k) dot += dy[k] * cache.y[k];
        for (std::size_t k = 0; k < n; ++k) dz[k] = cache.y[k] * (dy[k] - dot);
        break;
      }
      case Activation::Sigmoid:
        for (std::size_t k = 0; k < n; ++k) dz[k] *= cache.y[k] * (1.0 - cache.y[k]);
        break;
      case Activation::ReLU:
        for (std::size_t k = 0; k < n; ++k) dz[k] = cache.y[k] > 0.0 ? dz[k] : 0.0;
        break;
    }
    outer_add(W.grad, dz, cache.x);
    for (std::size_t k = 0; k < n; ++k) b.grad[k] += dz[k];
    Vec dx(in(), 0.0);
    gemv_t_add(W.value, dz, dx);
    return dx;
  }
};

// ---------------------------------------------------------------------------

/// Learned lookup table with a reserved, always-zero PAD row at index N.
struct Embedding {
  Param table;  // (N + 1, width)

  Embedding() = default;
  Embedding(std::size_t nodes, std::size_t width, const std::string& name)
      : table(name + ".table", {nodes + 1, width}) {}

  std::size_t pad() const { return table.value.dim(0) - 1; }
  std::size_t width() const { return table.value.dim(1); }

  void init(Rng& rng) {
    xavier_uniform(table.value, table.value.dim(0), width(), rng);
    for (auto& v : table.value.row(pad())) v = 0.0;
  }

  ParamList params() { return {&table}; }

  template <class Index>
  Tensor forward(std::span<const Index> indices) const {
    Tensor out({indices.size(), width()});
    for (std::size_t s = 0; s < indices.size(); ++s) {
      if (static_cast<std::size_t>(indices[s]) >= pad()) continue;
      const auto src = table.value.row(static_cast<std::size_t>(indices[s]));
      std::copy(src.begin(), src.end(), out.row(s).begin());
    }
    return out;
  }

  template <class Index>
  void backward(std::span<const Index> indices, const Tensor& dy) {
    for (std::size_t s = 0; s < indices.size(); ++s) {
      if (static_cast<std::size_t>(indices[s]) >= pad()) continue;
      auto dst = table.grad.row(static_cast<std::size_t>(indices[s]));
      const auto src = dy.row(s);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
};

// ---------------------------------------------------------------------------

/// Inverted dropout. Without an RNG (eval mode) the mask is all ones.
struct DropoutMask {
  Vec scale;

  void apply(Vec& x) const {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] *= scale[k];
  }
};

inline DropoutMask make_dropout_mask(std::size_t n, double rate, Rng* rng) {
  DropoutMask m;
  m.scale.assign(n, 1.0);
  if (rng == nullptr || rate <= 0.0) return m;
  const double keep = 1.0 - rate;
  for (auto& s : m.scale) s = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
  return m;
}

// ---------------------------------------------------------------------------

inline constexpr double kProbClamp = 1e-12;

inline void expect_one_hot(std::span<const double> y) {
  std::size_t ones = 0;
  for (double v : y) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      throw ValidationError("cross entropy: target is not one-hot");
    }
  }
  if (ones != 1) throw ValidationError("cross entropy: target is not one-hot");
}

/// -sum_j y_j log(clamp(p_j, 1e-12, 1)).
inline double cross_entropy(std::span<const double> pred, std::span<const double> target) {
  expect_length(pred, target.size(), "cross entropy");
  expect_one_hot(target);
  double loss = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (target[k] != 0.0) loss -= target[k] * std::log(std::clamp(pred[k], kProbClamp, 1.0));
  }
  return loss;
}

/// d loss / d pred; zero where the clamp is active.
inline Vec cross_entropy_grad(std::span<const double> pred, std::span<const double> target) {
  Vec g(pred.size(), 0.0);
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (target[k] != 0.0 && pred[k] > kProbClamp && pred[k] <= 1.0) g[k] = -target[k] / pred[k];
  }
  return g;
}

inline Vec one_hot(std::size_t n, std::size_t k) {
  Vec v(n, 0.0);
  v.at(k) = 1.0;
  return v;
}

}  // namespace stdgnn
