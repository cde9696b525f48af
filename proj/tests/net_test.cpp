#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>

#include "specmesh/autodiff/checkpoint.hpp"
#include "specmesh/autodiff/gradcheck.hpp"
#include "specmesh/net/agg_net.hpp"
#include "specmesh/sampling/generators.hpp"
#include "test_support.hpp"

using namespace specmesh;

namespace {

const MeshHierarchy& micro_hierarchy() {
  static const MeshHierarchy h = build_hierarchy(sphere_mesh(64, 0.6), {64, 16});
  return h;
}

const MeshHierarchy& desk_hierarchy() {
  static const MeshHierarchy h = build_hierarchy(sphere_mesh(1024, 0.6), {1024, 256, 64, 16});
  return h;
}

std::size_t resblock_params(std::size_t in, std::size_t out, std::size_t stride) {
  std::size_t n = 9 * in * out + 2 * 9 * out * out + 3 * 2 * out;
  if (stride != 1 || in != out) n += in * out + 2 * out;
  return n;
}

std::size_t dense_gcn_params(std::size_t in, std::size_t growth, std::size_t out, std::size_t K, bool bias) {
  std::size_t n = 0;
  for (std::size_t t = 0; t < 4; ++t) n += K * (in + t * growth) * growth + 2 * growth;
  return n + (in + 4 * growth) * out + (bias ? out : 0);
}

/// Parameter count of a config, derived from the wiring rules.
std::size_t expected_params(const NetConfig& c) {
  const auto& C = c.encoder_channels;
  const std::size_t L = c.levels, D = c.decoder_channels, K = c.cheb_order;
  std::size_t n = 0;
  for (std::size_t i = 0; i < L; ++i) n += resblock_params(i == 0 ? 3 : C[i - 1], C[i], 2);
  const bool grid = c.aggregation_mode != AggregationMode::shallow && c.aggregation_mode != AggregationMode::none;
  if (grid)
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 1; i + j < L; ++j) {
        std::size_t w = j * C[i];
        if (c.aggregation_mode != AggregationMode::no_up) w += C[i + 1];
        if (c.aggregation_mode != AggregationMode::no_down && i > 0) {
          w += C[i];
          n += 9 * C[i - 1] * C[i] + 2 * C[i];
        }
        n += resblock_params(w, C[i], 1);
      }
  const std::size_t H = c.embedding_hidden, E = c.embedding_dim;
  n += 16 * C[L - 1] * H + H + H * E + E + E * 16 * D + 16 * D;
  for (std::size_t i = 0; i < L; ++i)
    n += dense_gcn_params((c.aggregation_mode == AggregationMode::none ? 0 : C[i]) + D, c.growth, D, K, false);
  n += K * D * c.head_channels + 2 * c.head_channels + K * c.head_channels * 3 + (c.graph_bias ? 3 : 0);
  return n;
}

}  // namespace

TEST(NetConfig, Validation) {
  NetConfig c = NetConfig::desk();
  EXPECT_NO_THROW(c.validate());
  c.input_size = 128;
  EXPECT_THROW(c.validate(), ValidationError);
  c = NetConfig::desk();
  c.encoder_channels.pop_back();
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_THROW(parse_aggregation_mode("dense"), ValidationError);
  EXPECT_EQ(NetConfig::full_scale().expected_schedule(),
            (std::vector<std::size_t>{16384, 4096, 1024, 256, 64, 16}));
}

TEST(NetConfig, JsonRoundTrip) {
  NetConfig c = NetConfig::full_scale();
  c.aggregation_mode = AggregationMode::no_down;
  nlohmann::json j = c;
  const NetConfig d = j.get<NetConfig>();
  EXPECT_EQ(nlohmann::json(d), j);
  j["bogus"] = 1;
  EXPECT_THROW(j.get<NetConfig>(), ValidationError);
  nlohmann::json partial = {{"levels", 2}, {"input_size", 16}, {"encoder_channels", {3, 4}}};
  EXPECT_EQ(partial.get<NetConfig>().decoder_channels, NetConfig::desk().decoder_channels);
}

TEST(AggNet, ParameterCountGolden) {
  for (auto mode : {AggregationMode::full, AggregationMode::no_up, AggregationMode::no_down, AggregationMode::shallow,
                    AggregationMode::none}) {
    for (NetConfig c : {NetConfig::micro(), NetConfig::desk()}) {
      c.aggregation_mode = mode;
      AggNet<float> net(c, 1);
      EXPECT_EQ(net.parameter_count(), expected_params(c)) << to_string(mode);
    }
  }
  // Values from tests/oracles/param_count.py.
  EXPECT_EQ(AggNet<float>(NetConfig::desk(), 1).parameter_count(), 682275u);
  EXPECT_EQ(AggNet<float>(NetConfig::micro(), 1).parameter_count(), 5503u);
  EXPECT_EQ(AggNet<float>(NetConfig::full_scale(), 1).parameter_count(), 8119235u);
  const std::pair<AggregationMode, std::size_t> ablations[] = {{AggregationMode::no_up, 647635},
                                                               {AggregationMode::no_down, 659875},
                                                               {AggregationMode::shallow, 571747},
                                                               {AggregationMode::none, 544867}};
  for (const auto& [mode, count] : ablations) {
    NetConfig c = NetConfig::desk();
    c.aggregation_mode = mode;
    EXPECT_EQ(AggNet<float>(c, 1).parameter_count(), count) << to_string(mode);
  }
}

TEST(AggNet, BindValidatesHierarchy) {
  AggNet<float> net(NetConfig::desk(), 1);
  EXPECT_THROW(net.bind(micro_hierarchy()), ValidationError);
  const auto wrong = build_hierarchy(sphere_mesh(1024), {1024, 256, 64, 20});
  EXPECT_THROW(net.bind(wrong), ValidationError);
  EXPECT_THROW(net.forward(Tensor<float>(Shape{1, 64, 64, 3})), ValidationError);
  net.bind(desk_hierarchy());
  EXPECT_THROW(net.forward(Tensor<float>(Shape{1, 32, 32, 3})), ValidationError);
}

TEST(AggNet, DeskZeroImage) {
  AggNet<float> net(NetConfig::desk(), 7);
  net.bind(desk_hierarchy());
  net.set_training(false);
  const auto y = net.forward(Tensor<float>(Shape{1, 64, 64, 3}));
  EXPECT_EQ(y.shape(), (Shape{1, 1024, 3}));
  EXPECT_TRUE(y.all_finite());
}

TEST(AggNet, ExtraOutputLevel) {
  NetConfig c = NetConfig::micro();
  AggNet<double> net(c, 3);
  net.bind(build_hierarchy(sphere_mesh(162, 0.6), {162, 64, 16}));
  EXPECT_EQ(net.output_vertices(), 162u);
  Rng r(1);
  const auto y = net.forward(test::random_tensor<double>(Shape{2, 16, 16, 3}, r, 0, 1));
  EXPECT_EQ(y.shape(), (Shape{2, 162, 3}));
  EXPECT_EQ(net.backward(Tensor<double>(y.shape(), 1.0)).shape(), (Shape{2, 16, 16, 3}));
}

TEST(AggNet, AblationWiring) {
  NetConfig c = NetConfig::desk();
  c.aggregation_mode = AggregationMode::none;
  AggNet<float> none(c, 1);
  EXPECT_EQ(none.bridge_width(0), 0u);
  EXPECT_EQ(none.store().find("dec1.layer0.cheb.theta")->value.dim(1), c.decoder_channels);
  EXPECT_EQ(none.store().find("grid1_1.conv0.weight"), nullptr);
  c.aggregation_mode = AggregationMode::shallow;
  AggNet<float> shallow(c, 1);
  for (std::size_t i = 0; i < c.levels; ++i) EXPECT_EQ(shallow.bridge_width(i), c.encoder_channels[i]);
  EXPECT_EQ(shallow.store().find("dec2.layer0.cheb.theta")->value.dim(1), c.encoder_channels[1] + c.decoder_channels);
  EXPECT_FALSE(shallow.has_node(0, 1));
  c.aggregation_mode = AggregationMode::no_up;
  AggNet<float> no_up(c, 1);
  EXPECT_EQ(no_up.store().find("grid1_1.conv0.weight")->value.dim(2), c.encoder_channels[0]);
  EXPECT_EQ(no_up.store().find("grid2_1.conv0.weight")->value.dim(2), 2 * c.encoder_channels[1]);
  c.aggregation_mode = AggregationMode::no_down;
  AggNet<float> no_down(c, 1);
  EXPECT_EQ(no_down.store().find("down2_1.conv.weight"), nullptr);
  EXPECT_EQ(no_down.store().find("grid2_1.conv0.weight")->value.dim(2),
            c.encoder_channels[1] + c.encoder_channels[2]);

  NetConfig full = NetConfig::full_scale();
  AggNet<float> big(full, 1);
  EXPECT_TRUE(big.has_node(0, 5));
  EXPECT_FALSE(big.has_node(1, 5));
  // X^{1,5}: five same-level inputs plus Up from level 2.
  EXPECT_EQ(big.store().find("grid1_5.conv0.weight")->value.dim(2), 5 * 16 + 32);
}

TEST(AggNet, AllModesRunBothDirections) {
  Rng r(2);
  const auto x = test::random_tensor<double>(Shape{2, 16, 16, 3}, r, 0, 1);
  for (auto mode : {AggregationMode::full, AggregationMode::no_up, AggregationMode::no_down, AggregationMode::shallow,
                    AggregationMode::none}) {
    NetConfig c = NetConfig::micro();
    c.aggregation_mode = mode;
    AggNet<double> net(c, 5);
    net.bind(micro_hierarchy());
    const auto y = net.forward(x);
    EXPECT_EQ(y.shape(), (Shape{2, 64, 3}));
    EXPECT_EQ(net.backward(Tensor<double>(y.shape(), 0.1)).shape(), x.shape());
  }
}

TEST(AggNet, ZeroLossGradientGivesZeroGradients) {
  AggNet<double> net(NetConfig::micro(), 4);
  net.bind(micro_hierarchy());
  Rng r(3);
  const auto y = net.forward(test::random_tensor<double>(Shape{2, 16, 16, 3}, r, 0, 1));
  net.backward(Tensor<double>(y.shape()));
  for (std::size_t i = 0; i < net.store().size(); ++i)
    for (double g : net.store()[i].grad.values()) ASSERT_EQ(g, 0.0) << net.store()[i].name;
}

TEST(AggNet, DeterministicForwardAndGradients) {
  auto run = [] {
    AggNet<float> net(NetConfig::desk(), 11);
    net.bind(desk_hierarchy());
    Rng r(9);
    const auto x = test::random_tensor<float>(Shape{2, 64, 64, 3}, r, 0, 1);
    auto y = net.forward(x);
    net.backward(y);
    std::vector<Tensor<float>> grads{y};
    for (std::size_t i = 0; i < net.store().size(); ++i) grads.push_back(net.store()[i].grad);
    return grads;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i] == b[i]) << "tensor " << i;
}

TEST(AggNet, MicroEndToEndGradCheck) {
  AggNet<double> net(NetConfig::micro(), 21);
  net.bind(micro_hierarchy());
  Rng r(22);
  const auto x = test::random_tensor<double>(Shape{2, 16, 16, 3}, r, 0, 1);
  GradCheckOptions opt;
  opt.max_coords_per_tensor = 12;
  const auto res = finite_difference_check(net, x, opt);
  EXPECT_LE(res.max_rel_error, 1e-4) << res.worst;
  EXPECT_GT(res.checked, 500u);
}

TEST(AggNet, CheckpointRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "specmesh_net_ckpt";
  std::filesystem::create_directories(dir);
  AggNet<float> a(NetConfig::desk(), 1);
  save_checkpoint(a.store(), (dir / "a.ckpt").string());
  AggNet<float> b(NetConfig::desk(), 2);
  load_checkpoint(b.store(), (dir / "a.ckpt").string());
  save_checkpoint(b.store(), (dir / "b.ckpt").string());
  EXPECT_EQ(read_file_bytes((dir / "a.ckpt").string()), read_file_bytes((dir / "b.ckpt").string()));
  NetConfig other = NetConfig::desk();
  other.decoder_channels = 24;
  AggNet<float> c(other, 1);
  EXPECT_THROW(load_checkpoint(c.store(), (dir / "a.ckpt").string()), ValidationError);
  AggNet<float> m(NetConfig::micro(), 1);
  EXPECT_THROW(load_checkpoint(m.store(), (dir / "a.ckpt").string()), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST(AggNet, DeskStepTiming) {
  AggNet<float> net(NetConfig::desk(), 7);
  net.bind(desk_hierarchy());
  Rng r(1);
  const auto x = test::random_tensor<float>(Shape{8, 64, 64, 3}, r, 0, 1);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 3; ++i) {
    auto y = net.forward(x);
    net.backward(y);
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / 3;
  RecordProperty("desk_step_ms", std::to_string(ms));
  std::printf("desk batch-8 forward+backward: %.1f ms\n", ms);
}
