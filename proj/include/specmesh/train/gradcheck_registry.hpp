#pragma once

#include <functional>
#include <string>
#include <vector>

#include "specmesh/autodiff/gradcheck.hpp"
#include "specmesh/graph/laplacian.hpp"
#include "specmesh/loss/losses.hpp"
#include "specmesh/net/agg_net.hpp"
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

namespace specmesh {

inline constexpr double kGradcheckGate = 1e-4;

struct GradcheckCase {
  std::string name;
  std::function<GradCheckResult()> run;
};

namespace detail {

inline Tensor<double> uniform_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

inline std::shared_ptr<const GraphOperator<double>> icosphere_lhat() {
  return GraphOperator<double>::make(rescale_laplacian(build_laplacian(icosphere(1).adjacency())));
}

inline const MeshHierarchy& micro_gradcheck_hierarchy() {
  static const MeshHierarchy h = build_hierarchy(sphere_mesh(64, 0.6), {64, 16});
  return h;
}

inline GradCheckResult loss_case(LossKind kind, std::uint64_t seed) {
  Rng r(seed);
  LossSpec spec;
  spec.kind = kind;
  LossOp<double> op(spec);
  op.set_target(uniform_tensor(Shape{4, 3}, r));
  return finite_difference_check(op, uniform_tensor(Shape{4, 3}, r, -9.0, 9.0), {.eps = 1e-6});
}

}  // namespace detail

/// Every differentiable op in double precision on a small seeded instance,
/// plus the end-to-end micro model.
inline std::vector<GradcheckCase> gradcheck_registry() {
  using detail::uniform_tensor;
  return {
      {"conv2d",
       [] {
         Rng r(101);
         ParameterStore<double> s;
         Conv2d<double> op(s, "conv", 2, 3, 3, 2, true, r);
         return finite_difference_check(op, uniform_tensor(Shape{2, 5, 5, 2}, r));
       }},
      {"batch_norm",
       [] {
         Rng r(102);
         ParameterStore<double> s;
         BatchNorm<double> op(s, "bn", 3);
         for (auto& v : s.find("bn.scale")->value.values()) v = r.uniform(0.5, 1.5);
         for (auto& v : s.find("bn.shift")->value.values()) v = r.uniform(-0.5, 0.5);
         op.set_training(true);
         return finite_difference_check(op, uniform_tensor(Shape{2, 3, 2, 3}, r, -2.0, 2.0));
       }},
      {"leaky_relu",
       [] {
         Rng r(103);
         LeakyRelu<double> op;
         return finite_difference_check(op, uniform_tensor(Shape{4, 6}, r));
       }},
      {"bilinear_upsample2x",
       [] {
         Rng r(104);
         BilinearUpsample2x<double> op;
         return finite_difference_check(op, uniform_tensor(Shape{2, 3, 4, 2}, r));
       }},
      {"fully_connected",
       [] {
         Rng r(105);
         ParameterStore<double> s;
         Linear<double> op(s, "fc", 5, 4, true, r);
         for (auto& v : s.find("fc.bias")->value.values()) v = r.uniform(-1.0, 1.0);
         return finite_difference_check(op, uniform_tensor(Shape{3, 5}, r));
       }},
      {"residual_block",
       [] {
         Rng r(106);
         ParameterStore<double> s;
         ResidualBlock<double> op(s, "res", 2, 3, 2, r);
         return finite_difference_check(op, uniform_tensor(Shape{2, 5, 5, 2}, r));
       }},
      {"cheb_graph_conv",
       [] {
         Rng r(107);
         ParameterStore<double> s;
         ChebConv<double> op(s, "cheb", 3, 2, 3, true, r);
         for (auto& v : s.find("cheb.bias")->value.values()) v = r.uniform(-1.0, 1.0);
         op.bind(detail::icosphere_lhat());
         return finite_difference_check(op, uniform_tensor(Shape{2, 42, 3}, r));
       }},
      {"dense_gcn_block",
       [] {
         Rng r(108);
         ParameterStore<double> s;
         DenseGcnBlock<double> op(s, "dense", {4, 2, 3, 3, 4}, r);
         op.bind(detail::icosphere_lhat());
         return finite_difference_check(op, uniform_tensor(Shape{2, 42, 4}, r));
       }},
      {"graph_upsample",
       [] {
         Rng r(109);
         GraphUpsample<double> op;
         op.bind(GraphOperator<double>::make(detail::micro_gradcheck_hierarchy().pairs[0].q_up));
         return finite_difference_check(op, uniform_tensor(Shape{2, 16, 3}, r));
       }},
      {"loss_paper", [] { return detail::loss_case(LossKind::paper, 110); }},
      {"loss_l1", [] { return detail::loss_case(LossKind::l1, 111); }},
      {"loss_l2", [] { return detail::loss_case(LossKind::l2, 112); }},
      {"loss_smooth_l1", [] { return detail::loss_case(LossKind::smooth_l1, 113); }},
      {"micro_model",
       [] {
         AggNet<double> net(NetConfig::micro(), 114);
         net.bind(detail::micro_gradcheck_hierarchy());
         Rng r(115);
         GradCheckOptions opt;
         opt.max_coords_per_tensor = 12;
         return finite_difference_check(net, uniform_tensor(Shape{2, 16, 16, 3}, r, 0.0, 1.0), opt);
       }},
  };
}

}  // namespace specmesh
