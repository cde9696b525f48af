#pragma once

#include <memory>
#include <string>
#include <vector>

#include "specmesh/autodiff/diff_op.hpp"
#include "specmesh/core/rng.hpp"
#include "specmesh/net/config.hpp"
#include "specmesh/nn/activation.hpp"
#include "specmesh/nn/batch_norm.hpp"
#include "specmesh/nn/bilinear_upsample.hpp"
#include "specmesh/nn/conv2d.hpp"
#include "specmesh/nn/dense_gcn.hpp"
#include "specmesh/nn/graph_layers.hpp"
#include "specmesh/nn/linear.hpp"
#include "specmesh/nn/residual.hpp"
#include "specmesh/nn/sequential.hpp"
#include "specmesh/sampling/hierarchy.hpp"

namespace specmesh {

/// Image-to-mesh network: residual encoder, nested aggregation grid, embedding
/// head and a DenseGCN graph decoder that receives the grid's bridge features.
///
/// Levels are 0-based internally (0 = finest map). Grid node X[i][j] exists
/// for j <= L-1-i; X[i][0] is the encoder output and, for j >= 1,
/// X[i][j] = Res(concat(X[i][0..j-1], Up(X[i+1][j-1]), Down(X[i-1][j-1]))).
/// The bridge into decoder level i is X[i][L-1-i], flattened in raster order.
template <typename T>
class AggNet : public DiffOp<T> {
 public:
  AggNet(const NetConfig& config, std::uint64_t seed) : cfg_(config) {
    cfg_.validate();
    Rng rng = Rng(seed).split(0x1417);
    build(rng);
  }

  AggNet(const AggNet&) = delete;
  AggNet& operator=(const AggNet&) = delete;

  std::string name() const override { return "aggnet"; }
  const NetConfig& config() const { return cfg_; }
  ParameterStore<T>& store() { return store_; }
  const ParameterStore<T>& store() const { return store_; }
  std::size_t parameter_count() const { return store_.trainable_count(); }

  /// Attaches graph operators. The hierarchy must list the decoder levels
  /// (finest first), optionally preceded by one finer output level.
  void bind(const MeshHierarchy& h) {
    const auto expected = cfg_.expected_schedule();
    const auto got = h.schedule();
    require(got.size() == expected.size() || got.size() == expected.size() + 1,
            "hierarchy has " + std::to_string(got.size()) + " levels, config expects " +
                std::to_string(expected.size()) + " (or one extra output level)");
    offset_ = got.size() - expected.size();
    for (std::size_t i = 0; i < expected.size(); ++i)
      require(got[i + offset_] == expected[i], "hierarchy level " + std::to_string(i + offset_) + " has " +
                                                   std::to_string(got[i + offset_]) + " vertices, config expects " +
                                                   std::to_string(expected[i]) + " (map " +
                                                   std::to_string(cfg_.map_size(i + 1)) + "^2)");
    if (offset_ == 1) require(got[0] > got[1], "hierarchy output level must be finer than the first map level");
    const std::size_t L = cfg_.levels;
    for (std::size_t i = 0; i < L; ++i) dec_[i]->bind(GraphOperator<T>::make(h.laplacians[i + offset_]));
    for (std::size_t i = 1; i < L; ++i) gup_[i]->bind(GraphOperator<T>::make(h.pairs[i - 1 + offset_].q_up));
    if (offset_ == 1) extra_up_.bind(GraphOperator<T>::make(h.pairs[0].q_up));
    auto lap0 = GraphOperator<T>::make(h.laplacians[0]);
    head_cheb_[0]->bind(lap0);
    head_cheb_[1]->bind(lap0);
    output_vertices_ = got[0];
    bound_ = true;
  }

  bool bound() const { return bound_; }
  std::size_t output_vertices() const { return output_vertices_; }

  /// Channel width of the bridge feeding decoder level i (0 when absent).
  std::size_t bridge_width(std::size_t i) const {
    return cfg_.aggregation_mode == AggregationMode::none ? 0 : cfg_.encoder_channels[i];
  }

  /// Shape of grid node X[i][j] for a batch of b images.
  Shape node_shape(std::size_t b, std::size_t i) const {
    return Shape{b, cfg_.map_size(i + 1), cfg_.map_size(i + 1), cfg_.encoder_channels[i]};
  }

  bool has_node(std::size_t i, std::size_t j) const {
    if (j == 0) return true;
    const auto m = cfg_.aggregation_mode;
    if (m == AggregationMode::shallow || m == AggregationMode::none) return false;
    return i + j <= cfg_.levels - 1;
  }

  std::vector<Parameter<T>*> parameters() override {
    std::vector<Parameter<T>*> out;
    for (std::size_t i = 0; i < store_.size(); ++i) out.push_back(&store_[i]);
    return out;
  }

  void set_training(bool training) override {
    DiffOp<T>::set_training(training);
    for (DiffOp<T>* op : ops_) op->set_training(training);
  }

  std::uint64_t kink_signature() const override {
    KinkHasher h;
    for (const DiffOp<T>* op : ops_) h.add(op->kink_signature());
    return h.value();
  }

 protected:
  Tensor<T> do_forward(const Tensor<T>& images) override {
    require(bound_, "aggnet: no hierarchy bound");
    const std::size_t S = cfg_.input_size, L = cfg_.levels;
    require(images.rank() == 4 && images.dim(1) == S && images.dim(2) == S && images.dim(3) == 3,
            "aggnet: expected B x " + std::to_string(S) + " x " + std::to_string(S) + " x 3 images, got " +
                images.shape().str());
    const std::size_t B = images.dim(0);
    batch_ = B;
    X_.assign(L, std::vector<Tensor<T>>(L));

    for (std::size_t i = 0; i < L; ++i) X_[i][0] = checked(enc_[i]->forward(i == 0 ? images : X_[i - 1][0]), *enc_[i]);

    for (std::size_t j = 1; j < L; ++j)
      for (std::size_t i = 0; i + j < L; ++i) {
        if (!has_node(i, j)) continue;
        std::vector<Tensor<T>> parts;
        for (std::size_t k = 0; k < j; ++k) parts.push_back(X_[i][k]);
        if (up_[i][j]) parts.push_back(up_[i][j]->forward(X_[i + 1][j - 1]));
        if (down_[i][j]) parts.push_back(down_[i][j]->forward(X_[i - 1][j - 1]));
        X_[i][j] = checked(node_[i][j]->forward(concat(parts)), *node_[i][j]);
      }

    Tensor<T> v = checked(embed_.forward(X_[L - 1][0]), embed_).reshaped(Shape{B, 16, cfg_.decoder_channels});
    for (std::size_t i = L; i-- > 0;) {
      if (bridge_width(i) > 0) {
        const Tensor<T>& xb = X_[i][bridge_column(i)];
        const std::size_t n = cfg_.level_vertices(i + 1);
        const Tensor<T> flat = xb.reshaped(Shape{B, n, bridge_width(i)});
        v = concat({flat, v});
      }
      v = checked(dec_[i]->forward(v), *dec_[i]);
      if (i > 0) v = gup_[i]->forward(v);
    }
    if (offset_ == 1) v = extra_up_.forward(v);
    return checked(head_.forward(v), head_);
  }

  Tensor<T> do_backward(const Tensor<T>& g) override {
    const std::size_t L = cfg_.levels, B = batch_, D = cfg_.decoder_channels;
    std::vector<std::vector<Tensor<T>>> gX(L, std::vector<Tensor<T>>(L));
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; i + j < L; ++j)
        if (has_node(i, j)) gX[i][j] = Tensor<T>(node_shape(B, i));

    Tensor<T> gv = head_.backward(g);
    if (offset_ == 1) gv = extra_up_.backward(gv);
    for (std::size_t i = 0; i < L; ++i) {
      if (i > 0) gv = gup_[i]->backward(gv);
      Tensor<T> gin = dec_[i]->backward(gv);
      if (bridge_width(i) > 0) {
        const std::vector<std::size_t> widths{bridge_width(i), D};
        auto parts = split_last<T>(gin, widths);
        gX[i][bridge_column(i)] += parts[0].reshaped(node_shape(B, i));
        gv = std::move(parts[1]);
      } else {
        gv = std::move(gin);
      }
    }
    gX[L - 1][0] += embed_.backward(gv.reshaped(Shape{B, 16 * D}));

    for (std::size_t j = L - 1; j >= 1; --j)
      for (std::size_t i = L - j; i-- > 0;) {
        if (!has_node(i, j)) continue;
        std::vector<std::size_t> widths(j, cfg_.encoder_channels[i]);
        if (up_[i][j]) widths.push_back(cfg_.encoder_channels[i + 1]);
        if (down_[i][j]) widths.push_back(cfg_.encoder_channels[i]);
        auto parts = split_last<T>(node_[i][j]->backward(gX[i][j]), widths);
        for (std::size_t k = 0; k < j; ++k) gX[i][k] += parts[k];
        std::size_t p = j;
        if (up_[i][j]) gX[i + 1][j - 1] += up_[i][j]->backward(parts[p++]);
        if (down_[i][j]) gX[i - 1][j - 1] += down_[i][j]->backward(parts[p++]);
      }

    Tensor<T> gimg;
    for (std::size_t i = L; i-- > 0;) {
      Tensor<T> gin = enc_[i]->backward(gX[i][0]);
      if (i > 0)
        gX[i - 1][0] += gin;
      else
        gimg = std::move(gin);
    }
    X_.clear();
    return gimg;
  }

 private:
  std::size_t bridge_column(std::size_t i) const {
    return has_node(i, cfg_.levels - 1 - i) ? cfg_.levels - 1 - i : 0;
  }

  static Tensor<T> concat(const std::vector<Tensor<T>>& parts) {
    if (parts.size() == 1) return parts[0];
    std::vector<const Tensor<T>*> ptrs;
    for (const auto& p : parts) ptrs.push_back(&p);
    return concat_last<T>(ptrs);
  }

  static const Tensor<T>& checked(const Tensor<T>& t, const DiffOp<T>& op) {
    if (!t.all_finite()) throw NumericError("non-finite activation after layer '" + op.name() + "'");
    return t;
  }

  template <typename Op>
  Op* track(Op* op) {
    ops_.push_back(op);
    return op;
  }

  void build(Rng& rng) {
    const std::size_t L = cfg_.levels, D = cfg_.decoder_channels;
    const auto& C = cfg_.encoder_channels;
    const auto mode = cfg_.aggregation_mode;

    for (std::size_t i = 0; i < L; ++i) {
      enc_.push_back(std::make_unique<ResidualBlock<T>>(store_, "enc" + std::to_string(i + 1), i == 0 ? 3 : C[i - 1],
                                                        C[i], 2, rng));
      track(enc_.back().get());
    }

    node_.resize(L);
    up_.resize(L);
    down_.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
      node_[i].resize(L);
      up_[i].resize(L);
      down_[i].resize(L);
    }
    for (std::size_t j = 1; j < L; ++j)
      for (std::size_t i = 0; i + j < L; ++i) {
        if (!has_node(i, j)) continue;
        const std::string tag = std::to_string(i + 1) + "_" + std::to_string(j);
        std::size_t width = j * C[i];
        if (mode != AggregationMode::no_up) {
          up_[i][j] = std::make_unique<BilinearUpsample2x<T>>("up" + tag);
          track(up_[i][j].get());
          width += C[i + 1];
        }
        if (mode != AggregationMode::no_down && i > 0) {
          auto seq = std::make_unique<Sequential<T>>("down" + tag);
          seq->add(std::make_unique<Conv2d<T>>(store_, "down" + tag + ".conv", C[i - 1], C[i], 3, 2, false, rng));
          seq->add(std::make_unique<BatchNorm<T>>(store_, "down" + tag + ".bn", C[i]));
          seq->add(std::make_unique<LeakyRelu<T>>("down" + tag + ".act"));
          down_[i][j] = std::move(seq);
          track(down_[i][j].get());
          width += C[i];
        }
        node_[i][j] = std::make_unique<ResidualBlock<T>>(store_, "grid" + tag, width, C[i], 1, rng);
        track(node_[i][j].get());
      }

    const std::size_t coarse = 16 * C[L - 1];
    embed_.add(std::make_unique<Flatten<T>>());
    embed_.add(std::make_unique<Linear<T>>(store_, "embed.fc1", coarse, cfg_.embedding_hidden, true, rng));
    embed_.add(std::make_unique<LeakyRelu<T>>("embed.act1"));
    embed_.add(std::make_unique<Linear<T>>(store_, "embed.fc2", cfg_.embedding_hidden, cfg_.embedding_dim, true, rng));
    embed_.add(std::make_unique<Linear<T>>(store_, "seed.fc", cfg_.embedding_dim, 16 * D, true, rng));
    embed_.add(std::make_unique<LeakyRelu<T>>("seed.act"));
    track(&embed_);

    dec_.resize(L);
    gup_.resize(L);
    for (std::size_t i = L; i-- > 0;) {
      // Every decoder path reaches a batch norm through maps that keep per-channel offsets constant.
      const DenseGcnSpec spec{bridge_width(i) + D, cfg_.growth, D, cfg_.cheb_order, 4, false};
      dec_[i] = std::make_unique<DenseGcnBlock<T>>(store_, "dec" + std::to_string(i + 1), spec, rng);
      track(dec_[i].get());
      if (i > 0) {
        gup_[i] = std::make_unique<GraphUpsample<T>>("gup" + std::to_string(i + 1));
        track(gup_[i].get());
      }
    }
    track(&extra_up_);

    head_cheb_[0] = &head_.add(std::make_unique<ChebConv<T>>(store_, "head.cheb0", D, cfg_.head_channels,
                                                              cfg_.cheb_order, false, rng));
    head_.add(std::make_unique<BatchNorm<T>>(store_, "head.bn", cfg_.head_channels));
    head_.add(std::make_unique<LeakyRelu<T>>("head.act"));
    head_cheb_[1] = &head_.add(std::make_unique<ChebConv<T>>(store_, "head.cheb1", cfg_.head_channels, 3,
                                                              cfg_.cheb_order, cfg_.graph_bias, rng));
    track(&head_);
  }

  NetConfig cfg_;
  ParameterStore<T> store_;
  std::vector<std::unique_ptr<ResidualBlock<T>>> enc_;
  std::vector<std::vector<std::unique_ptr<ResidualBlock<T>>>> node_;
  std::vector<std::vector<std::unique_ptr<BilinearUpsample2x<T>>>> up_;
  std::vector<std::vector<std::unique_ptr<Sequential<T>>>> down_;
  Sequential<T> embed_{"embed"};
  std::vector<std::unique_ptr<DenseGcnBlock<T>>> dec_;
  std::vector<std::unique_ptr<GraphUpsample<T>>> gup_;
  GraphUpsample<T> extra_up_{"gup_out"};
  Sequential<T> head_{"head"};
  ChebConv<T>* head_cheb_[2] = {nullptr, nullptr};
  std::vector<DiffOp<T>*> ops_;

  std::size_t offset_ = 0;
  std::size_t output_vertices_ = 0;
  bool bound_ = false;
  std::size_t batch_ = 0;
  std::vector<std::vector<Tensor<T>>> X_;
};

}  // namespace specmesh
