#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "stdgnn/nncore.hpp"
#include "test_helpers.hpp"

namespace stdgnn {
namespace {

Vec random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (auto& x : v) x = (2.0 * uniform01(rng) - 1.0) * scale;
  return v;
}

void randomize(Param& p, Rng& rng, double scale = 1.0) {
  for (auto& x : p.value.storage()) x = (2.0 * uniform01(rng) - 1.0) * scale;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// ---------------------------------------------------------------- conv

TEST(Conv, ZeroKernelsGiveZeroOutput) {
  ConvLayer conv(3, 4, "c");
  Tensor x({6, 3}, 1.5);
  const auto y = conv.forward(x);
  EXPECT_EQ(y.shape(), (std::vector<std::size_t>{4, 4}));
  for (double v : y.storage()) EXPECT_EQ(v, 0.0);
}

TEST(Conv, CenterTapReturnsRampInterior) {
  ConvLayer conv(2, 1, "c");
  // Kernel layout (K, 1, 3, C_in): tap 1, channel 0.
  conv.weight.value[1 * 2 + 0] = 1.0;
  Tensor x({5, 2});
  for (std::size_t r = 0; r < 5; ++r) x(r, 0) = static_cast<double>(r + 1);
  const auto y = conv.forward(x);
  ASSERT_EQ(y.dim(0), 3u);
  EXPECT_EQ(y(0, 0), 2.0);
  EXPECT_EQ(y(1, 0), 3.0);
  EXPECT_EQ(y(2, 0), 4.0);
}

TEST(Conv, OutputRowsAreInputMinusTwo) {
  ConvLayer conv(6, 8, "c");
  Rng rng(1);
  conv.init(rng);
  const std::size_t lr = 12 * 4;
  EXPECT_EQ(conv.forward(Tensor({lr, 6})).dim(0), lr - 2);
}

TEST(Conv, RejectsShortOrMisshapedInput) {
  ConvLayer conv(2, 1, "c");
  EXPECT_THROW(conv.forward(Tensor({2, 2})), ShapeError);
  EXPECT_THROW(conv.forward(Tensor({5, 3})), ShapeError);
}

TEST(Conv, ReluOutputsNonNegative) {
  ConvLayer conv(4, 5, "c");
  Rng rng(3);
  conv.init(rng);
  Tensor x({10, 4}, random_vec(40, rng));
  const auto y = conv.forward(x);
  for (double v : y.storage()) EXPECT_GE(v, 0.0);
}

// ---------------------------------------------------------------- lstm

TEST(Lstm, ZeroParameterFixedPoint) {
  LstmCell cell(3, 4, "l");
  const Vec x{0.3, -1.0, 2.0};
  const Vec zero(4, 0.0);
  const auto s = cell.forward(x, zero, zero);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(s.f[k], 0.5);
    EXPECT_EQ(s.i[k], 0.5);
    EXPECT_EQ(s.o[k], 0.5);
    EXPECT_EQ(s.g[k], 0.0);
    EXPECT_EQ(s.c[k], 0.0);
    EXPECT_EQ(s.h[k], 0.0);
  }
}

TEST(Lstm, ZeroParametersHalveCellState) {
  LstmCell cell(2, 3, "l");
  const Vec c_prev{1.0, -2.0, 0.4};
  const auto [h, c] = lstm_step(cell, Vec{1.0, 1.0}, Vec(3, 0.0), c_prev);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(c[k], 0.5 * c_prev[k]);
    EXPECT_DOUBLE_EQ(h[k], 0.5 * std::tanh(0.5 * c_prev[k]));
  }
}

TEST(Lstm, SaturatedGatesKeepMemory) {
  LstmCell cell(2, 3, "l");
  Rng rng(5);
  cell.init(rng);
  cell.b_f.value.fill(50.0);
  cell.b_i.value.fill(-50.0);
  const Vec c_prev{0.7, -0.2, 0.1};
  const auto s = cell.forward(Vec{0.5, -0.5}, Vec{0.1, 0.2, 0.3}, c_prev);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(s.c[k], c_prev[k], 1e-12);
}

TEST(Lstm, GatesReadCellStateUnlessStandard) {
  LstmCell printed(1, 1, "l");
  printed.U_i.value[0] = 1.0;
  const Vec x{0.0};
  const Vec h_prev{0.0};
  const Vec c_prev{2.0};
  EXPECT_DOUBLE_EQ(printed.forward(x, h_prev, c_prev).i[0], sigmoid(2.0));
  LstmCell standard = printed;
  standard.standard = true;
  EXPECT_DOUBLE_EQ(standard.forward(x, h_prev, c_prev).i[0], 0.5);
}

TEST(Lstm, InitSetsForgetBiasToOne) {
  LstmCell cell(3, 4, "l");
  Rng rng(1);
  cell.init(rng);
  for (double v : cell.b_f.value.storage()) EXPECT_EQ(v, 1.0);
  for (double v : cell.b_i.value.storage()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, ShapeMismatchIsFatal) {
  LstmCell cell(3, 4, "l");
  EXPECT_THROW(cell.forward(Vec(2), Vec(4), Vec(4)), ShapeError);
  EXPECT_THROW(cell.forward(Vec(3), Vec(3), Vec(4)), ShapeError);
}

TEST(Lstm, ActivationRanges) {
  LstmCell cell(4, 5, "l");
  Rng rng(9);
  cell.init(rng);
  const auto s = cell.forward(random_vec(4, rng, 3.0), random_vec(5, rng), random_vec(5, rng));
  for (std::size_t k = 0; k < 5; ++k) {
    for (double g : {s.f[k], s.i[k], s.o[k]}) {
      EXPECT_GT(g, 0.0);
      EXPECT_LT(g, 1.0);
    }
    EXPECT_GT(s.tanh_c[k], -1.0);
    EXPECT_LT(s.tanh_c[k], 1.0);
  }
}

// ---------------------------------------------------------------- attention

TEST(Attention, SingletonReturnsInput) {
  AttentionHead head(3, 3, "a");
  Rng rng(2);
  head.init(rng);
  const Vec h{0.1, -0.4, 0.9};
  const auto res = head.forward({h});
  ASSERT_EQ(res.betas.size(), 1u);
  EXPECT_EQ(res.betas[0], 1.0);
  EXPECT_EQ(res.g, h);
}

TEST(Attention, ZeroScoreVectorGivesMean) {
  AttentionHead head(2, 2, "a");
  Rng rng(2);
  head.init(rng);
  head.v_e.value.fill(0.0);
  const std::vector<Vec> hs{{1.0, 2.0}, {3.0, -2.0}, {2.0, 3.0}};
  const auto res = head.forward(hs);
  for (double b : res.betas) EXPECT_DOUBLE_EQ(b, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(res.g[0], 2.0);
  EXPECT_NEAR(res.g[1], 1.0, 1e-15);
}

TEST(Attention, ScoresLnThreeAndZero) {
  // One-unit head with W = 1, b = 0, so e_t = v * tanh(h_t). Choosing
  // h_1 = atanh(ln 3 / v) gives e_1 = ln 3 and h_2 = 0 gives e_2 = 0.
  AttentionHead head(1, 1, "a");
  head.W_e.value[0] = 1.0;
  head.v_e.value[0] = 2.0;
  const std::vector<Vec> hs{{std::atanh(std::log(3.0) / 2.0)}, {0.0}};
  const auto res = head.forward(hs);
  EXPECT_NEAR(res.scores[0], std::log(3.0), 1e-12);
  EXPECT_NEAR(res.betas[0], 0.75, 1e-12);
  EXPECT_NEAR(res.betas[1], 0.25, 1e-12);
}

TEST(Attention, BetasSumToOne) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    AttentionHead head(6, 6, "a");
    head.init(rng);
    randomize(head.v_e, rng, 5.0);
    std::vector<Vec> hs;
    const auto T = 1 + uniform_index(rng, 10);
    for (std::size_t t = 0; t < T; ++t) hs.push_back(random_vec(6, rng, 3.0));
    const auto res = head.forward(hs);
    EXPECT_NEAR(std::accumulate(res.betas.begin(), res.betas.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(Attention, EmptySequenceIsFatal) {
  AttentionHead head(2, 2, "a");
  EXPECT_THROW(head.forward({}), ShapeError);
}

// ---------------------------------------------------------------- dense / loss

TEST(Dense, ZeroSoftmaxIsUniform) {
  DenseLayer d(3, 4, Activation::Softmax, "d");
  for (double v : d.forward(Vec{1.0, 2.0, 3.0})) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Dense, IdentityPassesThrough) {
  DenseLayer d(3, 3, Activation::None, "d");
  for (std::size_t k = 0; k < 3; ++k) d.W.value(k, k) = 1.0;
  const Vec x{0.5, -1.0, 7.0};
  EXPECT_EQ(d.forward(x), x);
}

TEST(Dense, SoftmaxOfTwoZero) {
  const auto p = softmax(Vec{2.0, 0.0});
  EXPECT_NEAR(p[0], 0.8808, 1e-4);
  EXPECT_NEAR(p[1], 0.1192, 1e-4);
}

TEST(Dense, SoftmaxSumsToOneForLargeLogits) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = softmax(random_vec(1 + uniform_index(rng, 30), rng, 800.0));
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(Dense, ShapeMismatchIsFatal) {
  DenseLayer d(3, 2, Activation::None, "d");
  EXPECT_THROW(d.forward(Vec{1.0}), ShapeError);
}

TEST(CrossEntropy, PerfectPredictionIsZero) {
  EXPECT_EQ(cross_entropy(one_hot(3, 1), one_hot(3, 1)), 0.0);
}

TEST(CrossEntropy, UniformOverFour) {
  EXPECT_NEAR(cross_entropy(Vec(4, 0.25), one_hot(4, 2)), std::log(4.0), 1e-12);
  EXPECT_NEAR(std::log(4.0), 1.3863, 1e-4);
}

TEST(CrossEntropy, ClampKeepsLossFinite) {
  EXPECT_NEAR(cross_entropy(Vec{1e-12, 1.0}, one_hot(2, 0)), 27.631, 1e-3);
  EXPECT_NEAR(cross_entropy(Vec{0.0, 1.0}, one_hot(2, 0)), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, RejectsNonOneHotTarget) {
  EXPECT_THROW(cross_entropy(Vec{0.5, 0.5}, Vec{0.5, 0.5}), ValidationError);
  EXPECT_THROW(cross_entropy(Vec{0.5, 0.5}, Vec{1.0, 1.0}), ValidationError);
  EXPECT_THROW(cross_entropy(Vec{0.5, 0.5}, Vec{0.0, 0.0}), ValidationError);
}

// ---------------------------------------------------------------- dropout

TEST(Dropout, HalfRateZeroesAboutHalf) {
  Rng rng(17);
  const std::size_t n = 10000;
  const auto mask = make_dropout_mask(n, 0.5, &rng);
  std::size_t zeros = 0;
  for (double s : mask.scale) {
    if (s == 0.0) {
      ++zeros;
    } else {
      EXPECT_EQ(s, 2.0);
    }
  }
  // Binomial(10000, 0.5): sd = 50; allow 4 sd.
  EXPECT_NEAR(static_cast<double>(zeros), 5000.0, 200.0);
}

TEST(Dropout, EvalModeIsIdentity) {
  Vec x{1.0, 2.0, 3.0};
  make_dropout_mask(3, 0.5, nullptr).apply(x);
  EXPECT_EQ(x, (Vec{1.0, 2.0, 3.0}));
}

TEST(Dropout, SeededMasksRepeat) {
  Rng a(99);
  Rng b(99);
  EXPECT_EQ(make_dropout_mask(64, 0.5, &a).scale, make_dropout_mask(64, 0.5, &b).scale);
}

// ---------------------------------------------------------------- adam

TEST(Adam, ZeroGradientsLeaveParamsUnchanged) {
  Param p("p", {3});
  p.value.storage() = {1.0, -2.0, 3.0};
  AdamState st;
  adam_update(st, {&p});
  EXPECT_EQ(p.value.storage(), (Vec{1.0, -2.0, 3.0}));
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, ConstantGradientStepsByLearningRate) {
  Param p("p", {1});
  AdamState st;
  double prev = 0.0;
  for (int k = 0; k < 1000; ++k) {
    p.grad[0] = 0.3;
    adam_update(st, {&p});
    EXPECT_NEAR(prev - p.value[0], st.lr, 1e-6);
    prev = p.value[0];
  }
}

TEST(Adam, IdenticalGradientsGiveIdenticalUpdates) {
  Param a("a", {2});
  Param b("b", {2});
  AdamState st;
  for (int k = 0; k < 10; ++k) {
    a.grad.storage() = {0.1 * k, -0.5};
    b.grad.storage() = {0.1 * k, -0.5};
    adam_update(st, {&a, &b});
  }
  EXPECT_EQ(a.value, b.value);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Param p("layer.W", {2});
  p.grad[1] = std::nan("");
  AdamState st;
  try {
    adam_update(st, {&p});
    FAIL() << "expected failure";
  } catch (const RuntimeFailure& e) {
    EXPECT_NE(std::string(e.what()).find("layer.W"), std::string::npos);
  }
}

// ---------------------------------------------------------------- gradient checks

// Runs a check with `loss` defined on the current parameter values and
// `backward` that accumulates gradients after zeroing them.
GradCheckResult check(const ParamList& params, const std::function<double()>& loss,
                      const std::function<void()>& backward, std::uint64_t seed) {
  return grad_check(loss, [&] {
    zero_grads(params);
    backward();
  }, params, 200, seed);
}

TEST(GradCheck, DenseSoftmaxCrossEntropy) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    DenseLayer d(5, 4, Activation::Softmax, "d");
    d.init(rng);
    randomize(d.b, rng);
    Param x("x", {5});
    randomize(x, rng);
    const auto y = one_hot(4, seed % 4);
    ParamList params = d.params();
    params.push_back(&x);
    const auto res = check(
        params, [&] { return cross_entropy(d.forward(x.value.storage()), y); },
        [&] {
          DenseLayer::Cache cache;
          const auto p = d.forward(x.value.storage(), &cache);
          const auto dx = d.backward(cache, cross_entropy_grad(p, y));
          for (std::size_t k = 0; k < dx.size(); ++k) x.grad[k] += dx[k];
        },
        seed);
    EXPECT_LT(res.max_rel_error, 1e-6) << "seed " << seed << " worst " << res.worst;
  }
}

TEST(GradCheck, DenseActivations) {
  for (auto act : {Activation::None, Activation::Sigmoid, Activation::ReLU}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed + 100);
      DenseLayer d(6, 5, act, "d");
      d.init(rng);
      randomize(d.b, rng, 0.5);
      Param x("x", {6});
      randomize(x, rng);
      const auto r = random_vec(5, rng);
      ParamList params = d.params();
      params.push_back(&x);
      const auto res = check(
          params, [&] { return dot(d.forward(x.value.storage()), r); },
          [&] {
            DenseLayer::Cache cache;
            d.forward(x.value.storage(), &cache);
            const auto dx = d.backward(cache, r);
            for (std::size_t k = 0; k < dx.size(); ++k) x.grad[k] += dx[k];
          },
          seed);
      EXPECT_LT(res.max_rel_error, 1e-4) << "seed " << seed << " worst " << res.worst;
    }
  }
}

TEST(GradCheck, Conv) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 200);
    const std::size_t rows = 7;
    const std::size_t c_in = 3;
    ConvLayer conv(c_in, 4, "c");
    conv.init(rng);
    randomize(conv.bias, rng, 0.2);
    Param x("x", {rows, c_in});
    randomize(x, rng);
    const Tensor r({rows - 2, 4}, random_vec((rows - 2) * 4, rng));
    ParamList params = conv.params();
    params.push_back(&x);
    const auto loss = [&] { return dot(conv.forward(x.value).storage(), r.storage()); };
    const auto res = check(
        params, loss,
        [&] {
          ConvLayer::Cache cache;
          conv.forward(x.value, &cache);
          const auto dx = conv.backward(cache, r);
          for (std::size_t k = 0; k < dx.size(); ++k) x.grad[k] += dx[k];
        },
        seed);
    EXPECT_LT(res.max_rel_error, 1e-4) << "seed " << seed << " worst " << res.worst;
  }
}

void lstm_grad_check(bool standard) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + (standard ? 400 : 300));
    const std::size_t D = 3;
    const std::size_t H = 4;
    const std::size_t T = 3;
    LstmCell cell(D, H, "l", standard);
    cell.init(rng);
    std::vector<Param> xs;
    for (std::size_t t = 0; t < T; ++t) {
      xs.emplace_back("x" + std::to_string(t), std::vector<std::size_t>{D});
      randomize(xs.back(), rng);
    }
    std::vector<Vec> rs;
    for (std::size_t t = 0; t < T; ++t) rs.push_back(random_vec(H, rng));
    ParamList params = cell.params();
    for (auto& x : xs) params.push_back(&x);

    const auto loss = [&] {
      Vec h(H, 0.0), c(H, 0.0);
      double l = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        std::tie(h, c) = lstm_step(cell, xs[t].value.storage(), h, c);
        l += dot(h, rs[t]);
      }
      return l;
    };
    const auto backward = [&] {
      std::vector<LstmCell::Step> steps;
      Vec h(H, 0.0), c(H, 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        steps.push_back(cell.forward(xs[t].value.storage(), h, c));
        h = steps.back().h;
        c = steps.back().c;
      }
      Vec dh(H, 0.0), dc(H, 0.0);
      for (std::size_t t = T; t-- > 0;) {
        for (std::size_t k = 0; k < H; ++k) dh[k] += rs[t][k];
        auto g = cell.backward(steps[t], dh, dc);
        for (std::size_t k = 0; k < D; ++k) xs[t].grad[k] += g.dx[k];
        dh = std::move(g.dh_prev);
        dc = std::move(g.dc_prev);
      }
    };
    const auto res = check(params, loss, backward, seed);
    EXPECT_LT(res.max_rel_error, 1e-4) << "seed " << seed << " worst " << res.worst;
  }
}

TEST(GradCheck, LstmPrintedWiringThreeSteps) { lstm_grad_check(false); }
TEST(GradCheck, LstmStandardWiringThreeSteps) { lstm_grad_check(true); }

TEST(GradCheck, Attention) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 500);
    const std::size_t H = 4;
    const std::size_t T = 1 + seed % 5;
    AttentionHead head(H, H, "a");
    head.init(rng);
    randomize(head.b_e, rng, 0.3);
    std::vector<Param> hs;
    for (std::size_t t = 0; t < T; ++t) {
      hs.emplace_back("h" + std::to_string(t), std::vector<std::size_t>{H});
      randomize(hs.back(), rng);
    }
    const auto r = random_vec(H, rng);
    ParamList params = head.params();
    for (auto& h : hs) params.push_back(&h);
    const auto seq = [&] {
      std::vector<Vec> s;
      for (auto& h : hs) s.push_back(h.value.storage());
      return s;
    };
    const auto res = check(
        params, [&] { return dot(head.forward(seq()).g, r); },
        [&] {
          AttentionHead::Cache cache;
          head.forward(seq(), &cache);
          const auto dh = head.backward(cache, r);
          for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t k = 0; k < H; ++k) hs[t].grad[k] += dh[t][k];
          }
        },
        seed);
    EXPECT_LT(res.max_rel_error, 1e-4) << "seed " << seed << " worst " << res.worst;
  }
}

TEST(GradCheck, Embedding) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 600);
    Embedding emb(5, 3, "e");
    emb.init(rng);
    std::vector<std::uint32_t> idx{0, 4, 5, 2, 2, 5, 1};
    const Tensor r({idx.size(), 3}, random_vec(idx.size() * 3, rng));
    const std::span<const std::uint32_t> s(idx);
    const auto res = check(
        emb.params(), [&] { return dot(emb.forward(s).storage(), r.storage()); },
        [&] { emb.backward(s, r); }, seed);
    EXPECT_LT(res.max_rel_error, 1e-4) << "seed " << seed << " worst " << res.worst;
  }
}

TEST(Embedding, PadRowIsZero) {
  Embedding emb(4, 3, "e");
  Rng rng(1);
  emb.init(rng);
  const std::vector<std::uint32_t> idx{4, 1};
  const auto out = emb.forward(std::span<const std::uint32_t>(idx));
  for (double v : out.row(0)) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(std::vector<double>(out.row(1).begin(), out.row(1).end()),
            std::vector<double>(emb.table.value.row(1).begin(), emb.table.value.row(1).end()));
}

TEST(GradCheck, ReportsWorstCoordinate) {
  Param p("p", {2});
  p.value.storage() = {1.0, 2.0};
  const auto res = grad_check([&] { return p.value[0] * p.value[0] + p.value[1]; },
                              [&] {
                                p.zero_grad();
                                p.grad[0] = 2.0 * p.value[0];
                                p.grad[1] = 5.0;  // deliberately wrong
                              },
                              {&p});
  EXPECT_EQ(res.coords, 2u);
  EXPECT_EQ(res.worst, "p[1]");
  EXPECT_NEAR(res.max_rel_error, 4.0 / 6.0, 1e-8);
}

// ---------------------------------------------------------------- checkpoint

TEST(Checkpoint, RoundTripsValuesAndMeta) {
  testing::TempDir dir;
  DenseLayer d(3, 2, Activation::Softmax, "d");
  Rng rng(8);
  d.init(rng);
  randomize(d.b, rng);
  save_params(dir / "m.ckpt", d.params(), {{"seed", 8}});
  DenseLayer e(3, 2, Activation::Softmax, "d");
  const auto meta = load_params(dir / "m.ckpt", e.params());
  EXPECT_EQ(e.W.value, d.W.value);
  EXPECT_EQ(e.b.value, d.b.value);
  EXPECT_EQ(meta.at("seed"), 8);
  const auto raw = testing::slurp(dir / "m.ckpt");
  EXPECT_EQ(raw.substr(0, 8), "STDGNN01");
}

TEST(Checkpoint, RejectsMismatchedModel) {
  testing::TempDir dir;
  DenseLayer d(3, 2, Activation::None, "d");
  save_params(dir / "m.ckpt", d.params(), {});
  DenseLayer wrong(4, 2, Activation::None, "d");
  EXPECT_THROW(load_params(dir / "m.ckpt", wrong.params()), ValidationError);
  EXPECT_THROW(load_params(dir.write("bad", "not a checkpoint at all"), d.params()), RuntimeFailure);
}

}  // namespace
}  // namespace stdgnn
