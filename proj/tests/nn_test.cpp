#include <gtest/gtest.h>

#include <cmath>

#include "specmesh/autodiff/gradcheck.hpp"
#include "specmesh/graph/laplacian.hpp"
#include "specmesh/graph/spectral_oracle.hpp"
#include "specmesh/nn/activation.hpp"
#include "specmesh/nn/batch_norm.hpp"
#include "specmesh/nn/bilinear_upsample.hpp"
#include "specmesh/nn/conv2d.hpp"
#include "specmesh/nn/dense_gcn.hpp"
#include "specmesh/nn/graph_layers.hpp"
#include "specmesh/nn/linear.hpp"
#include "specmesh/nn/residual.hpp"
#include "specmesh/sampling/generators.hpp"
#include "specmesh/sampling/hierarchy.hpp"
#include "test_support.hpp"

using namespace specmesh;

namespace {

/// Direct nested-loop convolution with zero padding.
Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w, std::size_t stride) {
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3), k = w.dim(0), O = w.dim(3);
  const std::size_t Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
  const long pad = static_cast<long>(k / 2);
  Tensor<double> y(Shape{B, Ho, Wo, O});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox)
        for (std::size_t o = 0; o < O; ++o) {
          double s = 0;
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - pad, ix = static_cast<long>(ox * stride + kx) - pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
              for (std::size_t c = 0; c < C; ++c)
                s += x.at(b, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), c) * w.at(ky, kx, c, o);
            }
          y.at(b, oy, ox, o) = s;
        }
  return y;
}

std::shared_ptr<const GraphOperator<double>> random_lhat(std::size_t n, Rng& rng, Laplacian* out = nullptr) {
  const auto A = test::random_connected_graph(n, n, rng);
  const Laplacian lap = build_laplacian(A);
  if (out) *out = lap;
  return GraphOperator<double>::make(rescale_laplacian(lap));
}

}  // namespace

TEST(Conv2d, DeltaKernelIsIdentity) {
  ParameterStore<double> s;
  Rng r(1);
  Conv2d<double> conv(s, "c", 1, 1, 3, 1, false, r);
  auto& w = s.find("c.weight")->value;
  w.fill(0.0);
  w.at(1, 1, 0, 0) = 1.0;
  const Tensor<double> x(Shape{1, 1, 1, 1}, 0.75);
  EXPECT_EQ(conv.forward(x), x);
}

TEST(Conv2d, ShapeRule) {
  ParameterStore<float> s;
  Rng r(1);
  Conv2d<float> conv(s, "c", 2, 5, 3, 2, false, r);
  EXPECT_EQ(conv.forward(Tensor<float>(Shape{2, 4, 4, 2})).shape(), (Shape{2, 2, 2, 5}));
  EXPECT_EQ(conv.forward(Tensor<float>(Shape{1, 5, 7, 2})).shape(), (Shape{1, 3, 4, 5}));
  EXPECT_THROW(conv.forward(Tensor<float>(Shape{1, 4, 4, 3})), ValidationError);
}

TEST(Conv2d, MatchesDirectLoops) {
  Rng r(2);
  for (std::size_t stride : {1u, 2u}) {
    ParameterStore<double> s;
    Conv2d<double> conv(s, "c", 3, 4, 3, stride, false, r);
    const auto x = test::random_tensor<double>(Shape{2, 7, 6, 3}, r);
    EXPECT_LE(max_abs_diff(conv.forward(x), conv_oracle(x, s.find("c.weight")->value, stride)), 1e-12);
  }
}

TEST(Conv2d, GradCheck) {
  Rng r(3);
  for (std::size_t stride : {1u, 2u}) {
    ParameterStore<double> s;
    Conv2d<double> conv(s, "c", 2, 3, 3, stride, true, r);
    const auto res = finite_difference_check(conv, test::random_tensor<double>(Shape{1, 5, 5, 2}, r));
    EXPECT_LE(res.max_rel_error, 1e-5) << "stride " << stride << " worst " << res.worst;
  }
  ParameterStore<double> s;
  Conv2d<double> proj(s, "p", 3, 2, 1, 2, false, r);
  EXPECT_LE(finite_difference_check(proj, test::random_tensor<double>(Shape{2, 5, 4, 3}, r)).max_rel_error, 1e-5);
}

TEST(BatchNorm, ConstantInputGivesShift) {
  ParameterStore<double> s;
  BatchNorm<double> bn(s, "bn", 2);
  s.find("bn.shift")->value = Tensor<double>(Shape{2}, {0.3, -0.2});
  const auto y = bn.forward(Tensor<double>(Shape{4, 2}, 5.0));
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_DOUBLE_EQ(y.at(r, 0), 0.3);
    EXPECT_DOUBLE_EQ(y.at(r, 1), -0.2);
  }
}

TEST(BatchNorm, NormalizedDataUnchanged) {
  ParameterStore<double> s;
  BatchNorm<double> bn(s, "bn", 1);
  const Tensor<double> x(Shape{4, 1}, {-1.0, 1.0, -1.0, 1.0});
  EXPECT_LE(max_abs_diff(bn.forward(x), x), 1e-5);
}

TEST(BatchNorm, RunningStatsAndEvalMode) {
  ParameterStore<double> s;
  BatchNorm<double> bn(s, "bn", 1);
  const Tensor<double> x(Shape{3, 1}, {1.0, 2.0, 6.0});
  bn.forward(x);
  // batch mean 3, unbiased variance (4 + 1 + 9) / 2 = 7
  EXPECT_DOUBLE_EQ(s.find("bn.running_mean")->value[0], 0.3);
  EXPECT_DOUBLE_EQ(s.find("bn.running_var")->value[0], 0.9 + 0.7);
  bn.set_training(false);
  const auto y = bn.forward(Tensor<double>(Shape{1, 1}, 0.3));
  EXPECT_NEAR(y[0], 0.0, 1e-15);
  const auto z = bn.forward(Tensor<double>(Shape{1, 1}, 0.3 + std::sqrt(1.6 + 1e-5)));
  EXPECT_NEAR(z[0], 1.0, 1e-12);
}

TEST(BatchNorm, GradCheckTrainAndEval) {
  Rng r(4);
  ParameterStore<double> s;
  BatchNorm<double> bn(s, "bn", 3);
  for (std::size_t c = 0; c < 3; ++c) {
    s.find("bn.scale")->value[c] = r.uniform(0.5, 1.5);
    s.find("bn.shift")->value[c] = r.uniform(-0.5, 0.5);
  }
  const auto x = test::random_tensor<double>(Shape{2, 3, 2, 3}, r, -2, 2);
  EXPECT_LE(finite_difference_check(bn, x).max_rel_error, 1e-4);
  bn.set_training(false);
  EXPECT_LE(finite_difference_check(bn, x).max_rel_error, 1e-7);
}

TEST(LeakyRelu, Values) {
  LeakyRelu<double> act;
  const auto y = act.forward(Tensor<double>(Shape{3}, {3.0, -2.0, 0.0}));
  EXPECT_DOUBLE_EQ(y[0], 3.0);
  EXPECT_DOUBLE_EQ(y[1], -0.4);
  EXPECT_DOUBLE_EQ(y[2], 0.0);
}

TEST(LeakyRelu, GradCheckAwayFromZero) {
  LeakyRelu<double> act;
  Rng r(5);
  auto x = test::random_tensor<double>(Shape{4, 5}, r);
  for (auto& v : x.values()) v += v < 0 ? -0.1 : 0.1;
  const auto res = finite_difference_check(act, x);
  EXPECT_LE(res.max_rel_error, 1e-7);
  EXPECT_EQ(res.excluded, 0u);
}

TEST(BilinearUpsample, ConstantsAndSinglePixel) {
  BilinearUpsample2x<double> up;
  const auto y = up.forward(Tensor<double>(Shape{1, 3, 2, 2}, 0.25));
  EXPECT_EQ(y.shape(), (Shape{1, 6, 4, 2}));
  for (double v : y.values()) EXPECT_NEAR(v, 0.25, 1e-15);
  const auto z = up.forward(Tensor<double>(Shape{1, 1, 1, 1}, 7.0));
  EXPECT_EQ(z, Tensor<double>(Shape{1, 2, 2, 1}, 7.0));
}

TEST(BilinearUpsample, MatchesSeparableInterpolation) {
  Rng r(6);
  const auto x = test::random_tensor<double>(Shape{1, 3, 4, 1}, r);
  BilinearUpsample2x<double> up;
  const auto y = up.forward(x);
  // Independent 1D interpolation along rows then columns.
  auto sample = [](double pos, std::size_t n, auto&& get) {
    pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return f == 0.0 ? get(i) : (1 - f) * get(i) + f * get(std::min(i + 1, n - 1));
  };
  for (std::size_t oy = 0; oy < 6; ++oy)
    for (std::size_t ox = 0; ox < 8; ++ox) {
      const double v = sample(oy / 2.0 - 0.25, 3, [&](std::size_t iy) {
        return sample(ox / 2.0 - 0.25, 4, [&](std::size_t ix) { return x.at(0, iy, ix, 0); });
      });
      EXPECT_NEAR(y.at(0, oy, ox, 0), v, 1e-14);
    }
}

TEST(BilinearUpsample, GradCheck) {
  BilinearUpsample2x<double> up;
  Rng r(7);
  EXPECT_LE(finite_difference_check(up, test::random_tensor<double>(Shape{2, 3, 2, 2}, r)).max_rel_error, 1e-6);
}

TEST(ChebConv, ConstantPolynomialIsIdentity) {
  ParameterStore<double> s;
  Rng r(8);
  ChebConv<double> cheb(s, "g", 3, 3, 1, false, r);
  cheb.bind(random_lhat(10, r));
  auto& th = s.find("g.theta")->value;
  th.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) th.at(0, i, i) = 1.0;
  const auto x = test::random_tensor<double>(Shape{10, 3}, r);
  EXPECT_EQ(cheb.forward(x), x);
}

TEST(ChebConv, SecondOrderTerm) {
  ParameterStore<double> s;
  Rng r(9);
  ChebConv<double> cheb(s, "g", 1, 1, 3, false, r);
  const auto op = random_lhat(12, r);
  cheb.bind(op);
  auto& th = s.find("g.theta")->value;
  th.fill(0.0);
  th[2] = 1.0;
  const auto x = test::random_tensor<double>(Shape{12, 1}, r);
  Tensor<double> lx(x.shape()), llx(x.shape());
  op->forward.multiply(x.data(), 1, lx.data());
  op->forward.multiply(lx.data(), 1, llx.data());
  const auto y = cheb.forward(x);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(y[i], 2 * llx[i] - x[i], 1e-14);
}

TEST(ChebConv, MatchesDenseSpectralOracle) {
  Rng r(10);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + r.below(49), fin = 1 + r.below(4), fout = 1 + r.below(4), K = 1 + r.below(4);
    Laplacian lap;
    const auto op = random_lhat(n, r, &lap);
    ParameterStore<double> s;
    ChebConv<double> cheb(s, "g", fin, fout, K, false, r);
    cheb.bind(op);
    const auto x = test::random_tensor<double>(Shape{n, fin}, r);
    const auto y = cheb.forward(x);
    const auto& th = s.find("g.theta")->value;
    Tensor<double> expected(Shape{n, fout});
    for (std::size_t i = 0; i < fin; ++i) {
      Tensor<double> col(Shape{n, 1});
      for (std::size_t v = 0; v < n; ++v) col[v] = x.at(v, i);
      for (std::size_t o = 0; o < fout; ++o) {
        std::vector<double> theta(K);
        for (std::size_t k = 0; k < K; ++k) theta[k] = th.at(k, i, o);
        const auto f = dense_spectral_filter_oracle(lap, theta, col);
        for (std::size_t v = 0; v < n; ++v) expected.at(v, o) += f[v];
      }
    }
    ASSERT_LE(max_abs_diff(y, expected), 1e-6) << "n=" << n << " K=" << K;
  }
}

TEST(ChebConv, BatchedEqualsPerSample) {
  Rng r(11);
  ParameterStore<double> s;
  ChebConv<double> cheb(s, "g", 2, 3, 3, true, r);
  cheb.bind(random_lhat(9, r));
  const auto x = test::random_tensor<double>(Shape{2, 9, 2}, r);
  const auto y = cheb.forward(x);
  for (std::size_t b = 0; b < 2; ++b) {
    Tensor<double> xb(Shape{9, 2});
    std::copy_n(x.data() + b * 18, 18, xb.data());
    const auto yb = cheb.forward(xb);
    for (std::size_t i = 0; i < 27; ++i) EXPECT_NEAR(y[b * 27 + i], yb[i], 1e-14);
  }
}

TEST(ChebConv, GradCheck) {
  Rng r(12);
  ParameterStore<double> s;
  ChebConv<double> cheb(s, "g", 3, 2, 3, true, r);
  cheb.bind(random_lhat(20, r));
  const auto res = finite_difference_check(cheb, test::random_tensor<double>(Shape{2, 20, 3}, r));
  EXPECT_LE(res.max_rel_error, 1e-4) << res.worst;
}

TEST(ChebConv, VertexMismatch) {
  Rng r(13);
  ParameterStore<double> s;
  ChebConv<double> cheb(s, "g", 1, 1, 2, false, r);
  cheb.bind(random_lhat(5, r));
  EXPECT_THROW(cheb.forward(Tensor<double>(Shape{6, 1})), ValidationError);
}

TEST(DenseGcn, WiringWidths) {
  DenseGcnSpec spec{128, 32, 128, 3, 4};
  EXPECT_EQ(spec.fusion_input(), 256u);
  EXPECT_EQ(spec.layer_input(2), 192u);
  ParameterStore<float> s;
  Rng r(14);
  DenseGcnBlock<float> block(s, "d", spec, r);
  EXPECT_EQ(s.find("d.fuse.weight")->value.shape(), (Shape{256, 128}));
  EXPECT_EQ(s.find("d.layer3.cheb.theta")->value.shape(), (Shape{3, 224, 32}));
}

TEST(DenseGcn, ZeroInputEvalIsZero) {
  ParameterStore<double> s;
  Rng r(15);
  DenseGcnBlock<double> block(s, "d", {4, 2, 5, 3, 4}, r);
  block.bind(random_lhat(8, r));
  block.set_training(false);
  const auto y = block.forward(Tensor<double>(Shape{8, 4}));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(DenseGcn, GradCheck) {
  ParameterStore<double> s;
  Rng r(16);
  DenseGcnBlock<double> block(s, "d", {4, 2, 3, 3, 4}, r);
  block.bind(random_lhat(8, r));
  const auto res = finite_difference_check(block, test::random_tensor<double>(Shape{2, 8, 4}, r));
  EXPECT_LE(res.max_rel_error, 1e-4) << res.worst;
  EXPECT_GT(res.checked, 100u);
}

TEST(GraphUpsample, IdentityConstantsAndGradCheck) {
  GraphUpsample<double> up;
  up.bind(GraphOperator<double>::make(SparseMatrix<double>::identity(5)));
  Rng r(17);
  const auto x = test::random_tensor<double>(Shape{5, 2}, r);
  EXPECT_EQ(up.forward(x), x);

  const auto h = build_hierarchy(sphere_mesh(1024), {1024, 256});
  GraphUpsample<double> real;
  real.bind(GraphOperator<double>::make(h.pairs[0].q_up));
  Tensor<double> c(Shape{2, 256, 2});
  for (std::size_t v = 0; v < 256; ++v) {
    c.at(0, v, 0) = 1.5;
    c.at(0, v, 1) = -2.0;
    c.at(1, v, 0) = 0.25;
  }
  const auto y = real.forward(c);
  EXPECT_EQ(y.shape(), (Shape{2, 1024, 2}));
  for (std::size_t v = 0; v < 1024; ++v) {
    EXPECT_NEAR(y.at(0, v, 0), 1.5, 1e-6);
    EXPECT_NEAR(y.at(0, v, 1), -2.0, 1e-6);
    EXPECT_NEAR(y.at(1, v, 0), 0.25, 1e-6);
  }
  GraphUpsample<double> small;
  const auto q = build_hierarchy(sphere_mesh(1024), {1024, 256, 64}).pairs[1].q_up;
  small.bind(GraphOperator<double>::make(q));
  EXPECT_LE(finite_difference_check(small, test::random_tensor<double>(Shape{64, 2}, r)).max_rel_error, 1e-7);
  EXPECT_THROW(small.forward(Tensor<double>(Shape{65, 2})), ValidationError);
}

TEST(Linear, IdentityZeroAndGradCheck) {
  ParameterStore<double> s;
  Rng r(18);
  Linear<double> fc(s, "fc", 3, 3, true, r);
  auto& w = s.find("fc.weight")->value;
  w.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) w.at(i, i) = 1.0;
  const auto x = test::random_tensor<double>(Shape{2, 3}, r);
  EXPECT_EQ(fc.forward(x), x);
  w.fill(0.0);
  s.find("fc.bias")->value = Tensor<double>(Shape{3}, {1.0, 2.0, 3.0});
  const auto y = fc.forward(x);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y.at(b, i), i + 1.0);
  for (auto& v : w.values()) v = r.uniform(-1, 1);
  EXPECT_LE(finite_difference_check(fc, x).max_rel_error, 1e-7);
  EXPECT_THROW(fc.forward(Tensor<double>(Shape{2, 4})), ValidationError);
}

TEST(ResidualBlock, ShortcutKindsAndGradCheck) {
  Rng r(19);
  ParameterStore<double> s;
  ResidualBlock<double> same(s, "a", 3, 3, 1, r);
  ResidualBlock<double> down(s, "b", 2, 3, 2, r);
  EXPECT_FALSE(same.has_projection());
  EXPECT_TRUE(down.has_projection());
  EXPECT_EQ(s.find("b.proj.conv.weight")->value.shape(), (Shape{1, 1, 2, 3}));
  auto res = finite_difference_check(same, test::random_tensor<double>(Shape{2, 4, 4, 3}, r));
  EXPECT_LE(res.max_rel_error, 1e-4) << res.worst;
  res = finite_difference_check(down, test::random_tensor<double>(Shape{2, 5, 5, 2}, r));
  EXPECT_LE(res.max_rel_error, 1e-4) << res.worst;
  EXPECT_EQ(down.forward(Tensor<double>(Shape{1, 6, 6, 2})).shape(), (Shape{1, 3, 3, 3}));
}

TEST(ShapeInference, Table) {
  Rng r(20);
  ParameterStore<float> s;
  struct Row {
    DiffOp<float>* op;
    Shape in, out;
  };
  Conv2d<float> c1(s, "c1", 3, 8, 3, 2, false, r);
  Conv2d<float> c2(s, "c2", 8, 8, 3, 1, false, r);
  BatchNorm<float> bn(s, "bn", 8);
  LeakyRelu<float> act;
  BilinearUpsample2x<float> up;
  Linear<float> fc(s, "fc", 12, 5, true, r);
  ResidualBlock<float> rb(s, "rb", 3, 6, 2, r);
  ChebConv<float> cheb(s, "cheb", 4, 7, 3, false, r);
  DenseGcnBlock<float> dg(s, "dg", {4, 3, 6, 3, 4}, r);
  GraphUpsample<float> gu;
  auto lhat = GraphOperator<float>::make(rescale_laplacian(build_laplacian(test::random_connected_graph(10, 5, r))));
  cheb.bind(lhat);
  dg.bind(lhat);
  gu.bind(GraphOperator<float>::make(build_hierarchy(sphere_mesh(1024), {1024, 256}).pairs[0].q_up));
  Flatten<float> flat;
  const std::vector<Row> table{
      {&c1, Shape{2, 64, 64, 3}, Shape{2, 32, 32, 8}}, {&c1, Shape{1, 5, 3, 3}, Shape{1, 3, 2, 8}},
      {&c2, Shape{2, 7, 7, 8}, Shape{2, 7, 7, 8}},     {&bn, Shape{3, 4, 4, 8}, Shape{3, 4, 4, 8}},
      {&act, Shape{2, 9}, Shape{2, 9}},                {&up, Shape{2, 4, 4, 5}, Shape{2, 8, 8, 5}},
      {&fc, Shape{4, 12}, Shape{4, 5}},                {&rb, Shape{2, 8, 8, 3}, Shape{2, 4, 4, 6}},
      {&cheb, Shape{2, 10, 4}, Shape{2, 10, 7}},       {&cheb, Shape{10, 4}, Shape{10, 7}},
      {&dg, Shape{3, 10, 4}, Shape{3, 10, 6}},         {&gu, Shape{2, 256, 3}, Shape{2, 1024, 3}},
      {&flat, Shape{2, 4, 4, 3}, Shape{2, 48}},
  };
  for (const auto& row : table) {
    const auto y = row.op->forward(Tensor<float>(row.in, 0.5f));
    EXPECT_EQ(y.shape(), row.out) << row.op->name() << " on " << row.in.str();
    EXPECT_EQ(row.op->backward(Tensor<float>(row.out, 1.0f)).shape(), row.in) << row.op->name();
  }
}
