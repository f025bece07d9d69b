#include <gtest/gtest.h>

#include <cmath>

#include "conjointnet/numcore/gradcheck.hpp"
#include "conjointnet/numcore/losses.hpp"
#include "conjointnet/numcore/network.hpp"
#include "conjointnet/numcore/optimizer.hpp"
#include "conjointnet/numcore/serialize.hpp"
#include "test_util.hpp"

using namespace conjointnet;
using conjointnet::testing::dot;
using conjointnet::testing::random_matrix;

namespace {

// Checks d/dx and d/dparams of sum(layer(x) * probe).
template <class L>
double layer_grad_error(L& layer, const Matrix& x0, Rng& rng) {
  Parameter input("input", x0);
  const Matrix probe = random_matrix(x0.rows(), layer.out_dim(), rng);
  std::vector<Parameter*> params{&input};
  layer.collect(params);
  auto objective = [&](bool accumulate) {
    const Matrix y = layer.forward(input.value, Mode::Train);
    const double loss = dot(y, probe);
    if (accumulate) {
      const Matrix dx = layer.backward(probe);
      for (std::size_t i = 0; i < dx.size(); ++i) input.grad.data()[i] += dx.data()[i];
    } else {
      layer.reset_cache();
    }
    return loss;
  };
  return grad_check(params, objective);
}

}  // namespace

TEST(Matrix, ShapeAndAccess) {
  Matrix m(2, 3);
  EXPECT_EQ(m.size(), 6u);
  m(1, 2) = 4.0;
  EXPECT_EQ(m.data()[5], 4.0);
  EXPECT_THROW(Matrix::from_rows({{1, 2}, {3}}), ShapeError);
}

TEST(Matrix, ProductsAgreeWithNaiveLoops) {
  Rng rng(1);
  const Matrix a = random_matrix(4, 3, rng), b = random_matrix(3, 5, rng), c = random_matrix(4, 5, rng);
  const Matrix ab = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(ab(i, j), s, 1e-12);
    }
  const Matrix atc = matmul_tn(a, c);
  const Matrix cbt = matmul_nt(c, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a(k, i) * c(k, j);
      EXPECT_NEAR(atc(i, j), s, 1e-12);
    }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) s += c(i, k) * b(j, k);
      EXPECT_NEAR(cbt(i, j), s, 1e-12);
    }
  EXPECT_THROW(matmul(a, a), ShapeError);
}

TEST(Matrix, StackAndSlice) {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5, 6}});
  const Matrix parts[] = {a, b};
  const Matrix v = vstack(parts);
  EXPECT_EQ(v.rows(), 3u);
  EXPECT_EQ(slice_rows(v, 2, 1), b);
  const Matrix h_parts[] = {a, a};
  const Matrix h = hstack(h_parts);
  EXPECT_EQ(h.cols(), 4u);
  EXPECT_EQ(slice_cols(h, 2, 2), a);
  const std::size_t idx[] = {1, 0};
  EXPECT_EQ(take_rows(a, idx), Matrix::from_rows({{3, 4}, {1, 2}}));
}

TEST(Layers, DenseIdentity) {
  Dense d(2, 2, false);
  d.weight().value = Matrix::from_rows({{1, 0}, {0, 1}});
  EXPECT_EQ(d.infer(Matrix::from_rows({{1, 2}})), Matrix::from_rows({{1, 2}}));
}

TEST(Layers, ReluAndSigmoidDefinitions) {
  ReLU r(3);
  EXPECT_EQ(r.infer(Matrix::from_rows({{-1.0, 0.0, 3.5}})), Matrix::from_rows({{0.0, 0.0, 3.5}}));
  Sigmoid s(1);
  EXPECT_EQ(s.infer(Matrix::from_rows({{0.0}}))(0, 0), 0.5);
}

TEST(Layers, GlorotInitBoundsAndZeroBias) {
  Rng rng(3);
  Dense d(20, 10, rng);
  const double bound = std::sqrt(6.0 / 30.0);
  for (double w : d.weight().value.data()) EXPECT_LE(std::abs(w), bound);
  for (double b : d.bias().value.data()) EXPECT_EQ(b, 0.0);
}

TEST(Layers, DenseWeightGradIsInputTransposeTimesOnes) {
  Rng rng(4);
  Dense d(3, 2, rng);
  const Matrix x = random_matrix(5, 3, rng);
  d.forward(x, Mode::Train);
  d.backward(Matrix(5, 2, 1.0));
  for (std::size_t i = 0; i < 3; ++i) {
    double col_sum = 0.0;
    for (std::size_t r = 0; r < 5; ++r) col_sum += x(r, i);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(d.weight().grad(i, j), col_sum, 1e-12);
  }
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(d.bias().grad(0, j), 5.0, 1e-12);
}

TEST(Layers, ZeroUpstreamGivesZeroGrads) {
  Rng rng(5);
  Sequential net = make_mlp(4, {6}, 2, rng, true);
  net.forward(random_matrix(8, 4, rng), Mode::Train);
  net.backward(Matrix(8, 2, 0.0));
  for (const auto* p : std::as_const(net).parameters())
    for (double g : p->grad.data()) EXPECT_EQ(g, 0.0);
}

TEST(Layers, BackwardWithoutForwardIsProtocolError) {
  Rng rng(6);
  Dense d(2, 2, rng);
  EXPECT_THROW(d.backward(Matrix(1, 2)), ProtocolError);
  BatchNorm bn(2);
  EXPECT_THROW(bn.backward(Matrix(1, 2)), ProtocolError);
  ReLU r(2);
  EXPECT_THROW(r.backward(Matrix(1, 2)), ProtocolError);
  // Infer mode leaves nothing to backpropagate.
  d.forward(Matrix(1, 2), Mode::Infer);
  EXPECT_THROW(d.backward(Matrix(1, 2)), ProtocolError);
  // A cache is consumed by one backward.
  d.forward(Matrix(1, 2), Mode::Train);
  d.backward(Matrix(1, 2));
  EXPECT_THROW(d.backward(Matrix(1, 2)), ProtocolError);
}

TEST(Layers, ShapeErrorNamesLayerIndex) {
  Rng rng(7);
  Sequential net;
  net.add(Dense(4, 3, rng));
  try {
    net.add(Dense(5, 2, rng));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
  }
  try {
    net.infer(Matrix(2, 7));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
}

TEST(GradCheck, EveryLayerKindOnRandomShapes) {
  Rng rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 32), batch(2, 16);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = batch(rng), in = dim(rng), out = dim(rng);
    Dense dense(in, out, rng);
    dense.bias().value = random_matrix(1, out, rng);
    EXPECT_LT(layer_grad_error(dense, random_matrix(n, in, rng), rng), 1e-6);

    ReLU relu(in);
    // Keep inputs away from the kink at 0.
    Matrix x = random_matrix(n, in, rng);
    for (double& v : x.data()) v += v >= 0 ? 0.1 : -0.1;
    EXPECT_LT(layer_grad_error(relu, x, rng), 1e-4);

    Sigmoid sig(in);
    EXPECT_LT(layer_grad_error(sig, random_matrix(n, in, rng, -3, 3), rng), 1e-6);

    BatchNorm bn(in);
    bn.gamma().value = random_matrix(1, in, rng, 0.5, 1.5);
    bn.beta().value = random_matrix(1, in, rng);
    EXPECT_LT(layer_grad_error(bn, random_matrix(n, in, rng, -2, 2), rng), 1e-3);
  }
}

TEST(GradCheck, TwoLayerReluNetwork) {
  Rng rng(12);
  Sequential net = make_mlp(6, {8}, 3, rng);
  const Matrix x = random_matrix(10, 6, rng);
  const Matrix probe = random_matrix(10, 3, rng);
  auto params = net.parameters();
  const double err = grad_check(params, [&](bool acc) {
    const Matrix y = net.forward(x, Mode::Train);
    if (acc)
      net.backward(probe);
    else
      net.reset_caches();
    return dot(y, probe);
  });
  EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, LinearModelWithL2Loss) {
  Rng rng(13);
  Dense d(5, 2, rng);
  const Matrix x = random_matrix(7, 5, rng), t = random_matrix(7, 2, rng);
  std::vector<Parameter*> params;
  d.collect(params);
  const double err = grad_check(params, [&](bool acc) {
    const Matrix y = d.forward(x, Mode::Train);
    const auto l = recon_loss(t, y, ReconKind::L2);
    if (acc)
      d.backward(l.grad);
    else
      d.reset_cache();
    return l.loss;
  });
  EXPECT_LT(err, 1e-6);
}

TEST(Infer, DeterministicAndSideEffectFree) {
  Rng rng(14);
  Sequential net = make_mlp(4, {5}, 2, rng, true);
  net.forward(random_matrix(6, 4, rng), Mode::Train);  // moves running stats
  net.reset_caches();
  const Sequential before = net;
  const Matrix x = random_matrix(3, 4, rng);
  const Matrix a = net.infer(x);
  const Matrix b = net.infer(x);
  EXPECT_EQ(a, b);
  const auto& bn_before = std::get<BatchNorm>(before.layers()[1]);
  const auto& bn_after = std::get<BatchNorm>(net.layers()[1]);
  EXPECT_EQ(bn_before.running_mean(), bn_after.running_mean());
  EXPECT_EQ(bn_before.running_var(), bn_after.running_var());
}

TEST(BatchNorm, InferUsesRunningStatsAndAcceptsBatchOfOne) {
  BatchNorm bn(2);
  const Matrix x = Matrix::from_rows({{1, 10}, {3, 14}});
  bn.forward(x, Mode::Train);
  // mean (2, 12), unbiased var (2, 8), momentum 0.1 from (0,0) / (1,1)
  EXPECT_NEAR(bn.running_mean()(0, 0), 0.2, 1e-15);
  EXPECT_NEAR(bn.running_mean()(0, 1), 1.2, 1e-15);
  EXPECT_NEAR(bn.running_var()(0, 0), 0.9 + 0.2, 1e-15);
  EXPECT_NEAR(bn.running_var()(0, 1), 0.9 + 0.8, 1e-15);
  const Matrix one = Matrix::from_rows({{1, 10}});
  const Matrix y = bn.infer(one);
  EXPECT_NEAR(y(0, 0), (1 - 0.2) / std::sqrt(1.1 + 1e-5), 1e-12);
  EXPECT_NEAR(y(0, 1), (10 - 1.2) / std::sqrt(1.7 + 1e-5), 1e-12);
}

TEST(Losses, BceExamples) {
  EXPECT_NEAR(bce_loss(Matrix::from_rows({{0.5}}), Matrix::from_rows({{1}})).loss, std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(Matrix::from_rows({{1 - kBceClamp}}), Matrix::from_rows({{1}})).loss, 0.0, 1e-6);
  EXPECT_THROW(bce_loss(Matrix::from_rows({{0.5}}), Matrix::from_rows({{0.3}})), ValidationError);
  // Fully saturated prediction: clamped, finite, zero gradient.
  const auto sat = bce_loss(Matrix::from_rows({{0.0}}), Matrix::from_rows({{1}}));
  EXPECT_TRUE(std::isfinite(sat.loss));
  EXPECT_EQ(sat.grad(0, 0), 0.0);
}

TEST(Losses, BceGradientMatchesFiniteDifferences) {
  Rng rng(15);
  Parameter p("pred", random_matrix(6, 2, rng, 0.05, 0.95));
  const Matrix t = conjointnet::testing::random_binary(6, 2, rng);
  Parameter* params[] = {&p};
  const double err = grad_check(params, [&](bool acc) {
    const auto l = bce_loss(p.value, t);
    if (acc)
      for (std::size_t i = 0; i < p.value.size(); ++i) p.grad.data()[i] += l.grad.data()[i];
    return l.loss;
  });
  EXPECT_LT(err, 1e-6);
}

TEST(Losses, BceWithLogitsAgreesWithProbabilityForm) {
  Rng rng(16);
  const Matrix z = random_matrix(5, 1, rng, -4, 4);
  const Matrix t = conjointnet::testing::random_binary(5, 1, rng);
  Matrix p(5, 1);
  for (std::size_t i = 0; i < 5; ++i) p(i, 0) = sigmoid(z(i, 0));
  EXPECT_NEAR(bce_with_logits(z, t).loss, bce_loss(p, t).loss, 1e-12);
}

TEST(Losses, ReconstructionExamples) {
  const Matrix x = Matrix::from_rows({{1, 0}});
  EXPECT_EQ(recon_loss(x, x, ReconKind::L1).loss, 0.0);
  EXPECT_NEAR(recon_loss(x, Matrix::from_rows({{0, 1}}), ReconKind::L1).loss, 1.0, 1e-15);
  EXPECT_THROW(recon_loss(x, Matrix(1, 3), ReconKind::L2), ShapeError);
  Rng rng(17);
  const Matrix target = random_matrix(4, 3, rng);
  for (ReconKind kind : {ReconKind::L2, ReconKind::BCE}) {
    const Matrix tgt = kind == ReconKind::BCE ? conjointnet::testing::random_binary(4, 3, rng) : target;
    Parameter p("recon", random_matrix(4, 3, rng, 0.1, 0.9));
    Parameter* params[] = {&p};
    const double err = grad_check(params, [&](bool acc) {
      const auto l = recon_loss(tgt, p.value, kind);
      if (acc)
        for (std::size_t i = 0; i < p.value.size(); ++i) p.grad.data()[i] += l.grad.data()[i];
      return l.loss;
    });
    EXPECT_LT(err, 1e-6) << to_string(kind);
  }
}

TEST(Losses, NonNegativeAndZeroAtTarget) {
  Rng rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix t = conjointnet::testing::random_binary(3, 4, rng);
    const Matrix p = random_matrix(3, 4, rng, 0.0, 1.0);
    EXPECT_GE(bce_loss(p, t).loss, 0.0);
    EXPECT_GE(recon_loss(t, p, ReconKind::L1).loss, 0.0);
    EXPECT_GE(recon_loss(t, p, ReconKind::L2).loss, 0.0);
    EXPECT_EQ(recon_loss(t, t, ReconKind::L2).loss, 0.0);
    EXPECT_LT(bce_loss(t, t).loss, 1e-6);
  }
}

TEST(Losses, KlExamplesAndGradient) {
  EXPECT_EQ(kl_standard_normal(Matrix(2, 3, 0.0), Matrix(2, 3, 0.0)).loss, 0.0);
  EXPECT_NEAR(kl_standard_normal(Matrix::from_rows({{1.0}}), Matrix::from_rows({{0.0}})).loss, 0.5, 1e-15);
  Rng rng(19);
  Parameter mu("mu", random_matrix(4, 2, rng)), lv("logvar", random_matrix(4, 2, rng));
  Parameter* params[] = {&mu, &lv};
  const double err = grad_check(params, [&](bool acc) {
    const auto k = kl_standard_normal(mu.value, lv.value);
    if (acc)
      for (std::size_t i = 0; i < mu.value.size(); ++i) {
        mu.grad.data()[i] += k.grad_mu.data()[i];
        lv.grad.data()[i] += k.grad_logvar.data()[i];
      }
    return k.loss;
  });
  EXPECT_LT(err, 1e-6);
}

TEST(Optimizer, SgdStep) {
  Parameter p("w", Matrix(1, 1, 1.0));
  p.grad(0, 0) = 1.0;
  Optimizer opt({OptimizerKind::SGD, 0.1});
  Parameter* params[] = {&p};
  opt.step(params);
  EXPECT_NEAR(p.value(0, 0), 0.9, 1e-15);
  EXPECT_EQ(p.grad(0, 0), 0.0);
}

TEST(Optimizer, ZeroGradLeavesParametersUnchanged) {
  for (auto kind : {OptimizerKind::SGD, OptimizerKind::Adam}) {
    Parameter p("w", Matrix::from_rows({{0.3, -2.0}}));
    Optimizer opt({kind, 0.01});
    Parameter* params[] = {&p};
    opt.step(params);
    EXPECT_EQ(p.value, Matrix::from_rows({{0.3, -2.0}}));
  }
}

TEST(Optimizer, AdamFirstStepHasMagnitudeLr) {
  for (double g : {1e-4, 0.5, 3.0, -250.0}) {
    Parameter p("w", Matrix(1, 1, 1.0));
    p.grad(0, 0) = g;
    Optimizer opt({OptimizerKind::Adam, 1e-3});
    Parameter* params[] = {&p};
    opt.step(params);
    // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
    const double expected = 1.0 - 1e-3 * g / (std::abs(g) + 1e-8);
    EXPECT_NEAR(p.value(0, 0), expected, 1e-15);
    EXPECT_NEAR(std::abs(p.value(0, 0) - 1.0), 1e-3, 1e-6);
  }
}

TEST(Optimizer, FrozenAndScaledParameters) {
  Parameter a("a", Matrix(1, 1, 1.0)), b("b", Matrix(1, 1, 1.0));
  a.frozen = true;
  b.lr_scale = 0.5;
  a.grad(0, 0) = b.grad(0, 0) = 1.0;
  Optimizer opt({OptimizerKind::SGD, 0.1});
  Parameter* params[] = {&a, &b};
  opt.step(params);
  EXPECT_EQ(a.value(0, 0), 1.0);
  EXPECT_EQ(a.grad(0, 0), 0.0);
  EXPECT_NEAR(b.value(0, 0), 0.95, 1e-15);
}

TEST(Optimizer, MomentShapesTrackParameters) {
  Parameter a("a", Matrix(2, 2)), b("b", Matrix(1, 3));
  Optimizer opt;
  Parameter* first[] = {&a, &b};
  opt.step(first);
  Parameter* swapped[] = {&b, &a};
  EXPECT_THROW(opt.step(swapped), ShapeError);
}

TEST(Serialize, NetworkRoundTripIsExact) {
  Rng rng(20);
  Sequential net = make_mlp(5, {7, 3}, 2, rng, true);
  net.forward(random_matrix(4, 5, rng), Mode::Train);
  net.reset_caches();
  const Sequential back = network_from_json(nlohmann::json::parse(network_to_json(net).dump()));
  const Matrix x = random_matrix(3, 5, rng);
  EXPECT_EQ(net.infer(x), back.infer(x));
  EXPECT_EQ(network_to_json(net).dump(), network_to_json(back).dump());
}
