#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "specmesh/autodiff/checkpoint.hpp"
#include "specmesh/autodiff/optimizer.hpp"
#include "specmesh/data/augment.hpp"
#include "specmesh/data/sample_io.hpp"
#include "specmesh/loss/losses.hpp"
#include "specmesh/loss/metrics.hpp"
#include "specmesh/net/agg_net.hpp"
#include "specmesh/sampling/hierarchy.hpp"
#include "specmesh/train/run_config.hpp"

namespace specmesh {

inline constexpr std::uint64_t kShuffleStream = 1;
inline constexpr std::uint64_t kAugmentStream = 2;

struct TrainLogRow {
  std::size_t step;
  double lr;
  double loss;
};

/// The step counter of a checkpoint lives next to it in <path>.json.
inline std::string checkpoint_sidecar(const std::string& ckpt) { return ckpt + ".json"; }

/// The {step, config, ...} document written next to a checkpoint.
inline nlohmann::json read_checkpoint_sidecar(const std::string& ckpt) {
  const std::string side = checkpoint_sidecar(ckpt);
  if (!std::filesystem::exists(side)) throw ValidationError("checkpoint " + ckpt + " has no sidecar " + side);
  const auto bytes = read_file_bytes(side);
  try {
    auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (!j.is_object() || !j.contains("step")) throw FormatError(side + ": missing step");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(side + ": " + e.what());
  }
}

inline std::size_t read_checkpoint_step(const std::string& ckpt) {
  const auto j = read_checkpoint_sidecar(ckpt);
  try {
    return j.at("step").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(checkpoint_sidecar(ckpt) + ": " + e.what());
  }
}

/// Images as a B x S x S x 3 batch and targets as B x N x 3.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> make_batch(const std::vector<const SampleRecord*>& records) {
  require(!records.empty(), "make_batch: empty batch");
  const Shape is = records.front()->image.shape(), vs = records.front()->gt_vertices.shape();
  const std::size_t B = records.size();
  Tensor<T> images(Shape{B, is[0], is[1], is[2]});
  Tensor<T> targets(Shape{B, vs[0], vs[1]});
  for (std::size_t b = 0; b < B; ++b) {
    require(records[b]->image.shape() == is && records[b]->gt_vertices.shape() == vs, "make_batch: mixed sample shapes");
    std::copy(records[b]->image.values().begin(), records[b]->image.values().end(), images.data() + b * is.numel());
    std::copy(records[b]->gt_vertices.values().begin(), records[b]->gt_vertices.values().end(),
              targets.data() + b * vs.numel());
  }
  return {std::move(images), std::move(targets)};
}

inline void check_dataset_against(const std::vector<SampleRecord>& data, const NetConfig& cfg, std::size_t vertices) {
  require(!data.empty(), "dataset is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    require(data[i].image.dim(0) == cfg.input_size, "sample " + sample_id(i) + ": image is " +
                                                        std::to_string(data[i].image.dim(0)) + " pixels, config expects " +
                                                        std::to_string(cfg.input_size));
    require(data[i].gt_vertices.dim(0) == vertices, "sample " + sample_id(i) + ": " +
                                                        std::to_string(data[i].gt_vertices.dim(0)) +
                                                        " vertices, hierarchy output has " + std::to_string(vertices));
  }
}

/// Mini-batch SGD with momentum over a fixed dataset.
///
/// Step s (0-based) belongs to epoch s / steps_per_epoch, where
/// steps_per_epoch = count / batch_size. Each epoch visits a permutation drawn
/// from Rng(seed).split(1).split(epoch); augmentation of batch slot k at step s
/// draws from Rng(seed).split(2).split(s).split(k). Nothing else is random, so
/// a resumed run reproduces the uninterrupted one exactly.
template <typename T>
class Trainer {
 public:
  Trainer(const RunConfig& cfg, const MeshHierarchy& hierarchy, const std::vector<SampleRecord>& data)
      : cfg_(cfg), data_(data), net_(cfg.network, cfg.seed), loss_(cfg.training_loss()) {
    cfg_.validate();
    net_.bind(hierarchy);
    check_dataset_against(data_, cfg_.network, net_.output_vertices());
    require(data_.size() >= cfg_.batch_size, "dataset has " + std::to_string(data_.size()) +
                                                 " samples, fewer than batch_size " + std::to_string(cfg_.batch_size));
  }

  AggNet<T>& net() { return net_; }
  /// Extra keys stored in every checkpoint sidecar.
  void set_sidecar_extra(nlohmann::json extra) { sidecar_extra_ = std::move(extra); }
  std::size_t step() const { return step_; }
  std::size_t steps_per_epoch() const { return data_.size() / cfg_.batch_size; }
  double current_lr() const {
    return lr_schedule(cfg_.lr, cfg_.lr_decay, static_cast<long long>(step_ / steps_per_epoch()));
  }

  void resume(const std::string& ckpt) {
    load_checkpoint(net_.store(), ckpt);
    step_ = read_checkpoint_step(ckpt);
  }

  void save(const std::string& ckpt) const {
    save_checkpoint(net_.store(), ckpt);
    nlohmann::json side = sidecar_extra_;
    side["step"] = step_;
    side["config"] = to_json(cfg_);
    const std::string text = side.dump(2) + "\n";
    write_file_bytes(checkpoint_sidecar(ckpt), std::vector<unsigned char>(text.begin(), text.end()));
  }

  /// Sample indices of the batch at the current step.
  std::vector<std::size_t> batch_indices() const {
    const std::size_t spe = steps_per_epoch();
    const std::size_t epoch = step_ / spe, pos = step_ % spe;
    const auto perm = Rng(cfg_.seed).split(kShuffleStream).split(epoch).permutation(data_.size());
    return {perm.begin() + static_cast<std::ptrdiff_t>(pos * cfg_.batch_size),
            perm.begin() + static_cast<std::ptrdiff_t>((pos + 1) * cfg_.batch_size)};
  }

  /// One forward/backward/update; returns the batch loss before the update.
  double train_step() {
    const double lr = current_lr();
    const auto idx = batch_indices();
    std::vector<SampleRecord> augmented;
    std::vector<const SampleRecord*> records;
    if (cfg_.augment) {
      const Rng stream = Rng(cfg_.seed).split(kAugmentStream).split(step_);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        Rng rng = stream.split(k);
        augmented.push_back(augment(data_[idx[k]], rng));
      }
      for (const auto& r : augmented) records.push_back(&r);
    } else {
      for (std::size_t i : idx) records.push_back(&data_[i]);
    }
    auto [images, targets] = make_batch<T>(records);
    net_.set_training(true);
    const Tensor<T> pred = net_.forward(images);
    loss_.set_target(std::move(targets));
    const double loss = static_cast<double>(loss_.forward(pred)[0]);
    if (!std::isfinite(loss))
      throw NumericError("training diverged: non-finite loss at step " + std::to_string(step_ + 1) + " (lr " +
                         std::to_string(lr) + ")");
    net_.backward(loss_.backward(Tensor<T>(Shape{1}, T(1))));
    sgd_momentum_step(net_.store(), lr, cfg_.momentum);
    ++step_;
    return loss;
  }

  /// Trains up to cfg.steps, appending to <out>/train_log.csv and writing
  /// <out>/checkpoints/step_NNNNNN.ckpt periodically and <out>/final.ckpt.
  std::vector<TrainLogRow> run(const std::filesystem::path& out,
                               const std::function<void(const TrainLogRow&)>& on_log = {}) {
    std::filesystem::create_directories(out / "checkpoints");
    const auto log_path = out / "train_log.csv";
    const bool fresh = step_ == 0 || !std::filesystem::exists(log_path);
    std::ofstream log(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw ValidationError("cannot write " + log_path.string());
    if (fresh) log << "step,lr,loss\n";
    log << std::setprecision(9);
    std::vector<TrainLogRow> rows;
    while (step_ < cfg_.steps) {
      const double lr = current_lr();
      const double loss = train_step();
      if (step_ % cfg_.log_every == 0 || step_ == 1 || step_ == cfg_.steps) {
        const TrainLogRow row{step_, lr, loss};
        rows.push_back(row);
        log << row.step << ',' << row.lr << ',' << row.loss << '\n' << std::flush;
        if (on_log) on_log(row);
      }
      if (step_ % cfg_.checkpoint_every == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "step_%06zu.ckpt", step_);
        save((out / "checkpoints" / name).string());
      }
    }
    save((out / "final.ckpt").string());
    return rows;
  }

 private:
  RunConfig cfg_;
  const std::vector<SampleRecord>& data_;
  AggNet<T> net_;
  LossOp<T> loss_;
  std::size_t step_ = 0;
  nlohmann::json sidecar_extra_ = nlohmann::json::object();
};

struct EvalOptions {
  int dims = 3;
  bool landmarks_only = false;
  std::size_t batch_size = 8;
  double ced_max = 0.1;
  std::size_t ced_points = 101;
};

/// Eval-mode predictions for every sample, in dataset order.
template <typename T>
std::vector<Tensor<float>> predict(AggNet<T>& net, const std::vector<SampleRecord>& data, std::size_t batch_size) {
  require(batch_size >= 1, "predict: batch size must be >= 1");
  net.set_training(false);
  std::vector<Tensor<float>> out;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::vector<const SampleRecord*> records;
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) records.push_back(&data[i]);
    const Tensor<T> pred = net.forward(make_batch<T>(records).first);
    const std::size_t per = pred.size() / records.size();
    for (std::size_t b = 0; b < records.size(); ++b) {
      Tensor<float> p(Shape{pred.dim(1), pred.dim(2)});
      for (std::size_t k = 0; k < per; ++k) p[k] = static_cast<float>(pred[b * per + k]);
      out.push_back(std::move(p));
    }
  }
  return out;
}

/// Per-sample NME of predictions against ground truth. Dense mode averages the
/// distance over all vertices and normalizes by the hull of the landmark
/// vertices when the sample has them, else by the hull of all vertices.
inline EvalReport evaluate_predictions(const std::vector<Tensor<float>>& preds, const std::vector<SampleRecord>& data,
                                       const EvalOptions& opt) {
  require(preds.size() == data.size(), "evaluate: one prediction per sample required");
  EvalReport report;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& gt = data[i].gt_vertices;
    const auto& lm = data[i].landmark_indices;
    double e;
    if (opt.landmarks_only) {
      require(!lm.empty(), "evaluate: sample " + sample_id(i) + " has no landmark indices");
      e = nme(gather_rows(preds[i], lm), gather_rows(gt, lm), opt.dims);
    } else {
      const double size = lm.empty() ? hull_size(gt) : hull_size(gather_rows(gt, lm));
      e = mean_distance(preds[i], gt, opt.dims) / size;
    }
    report.sample_ids.push_back(sample_id(i));
    report.nme.push_back(e);
    report.yaw.push_back(data[i].yaw_degrees);
  }
  report.ced = ced_curve(report.nme, ced_thresholds(opt.ced_max, opt.ced_points));
  return report;
}

template <typename T>
EvalReport evaluate(AggNet<T>& net, const std::vector<SampleRecord>& data, const EvalOptions& opt = {}) {
  return evaluate_predictions(predict(net, data, opt.batch_size), data, opt);
}

/// Yaw-binned means as JSON; null for empty bins, absent when no sample has a yaw.
inline std::optional<nlohmann::json> yaw_summary(const EvalReport& r) {
  std::vector<double> nmes, yaws;
  for (std::size_t i = 0; i < r.nme.size(); ++i)
    if (r.yaw[i]) {
      nmes.push_back(r.nme[i]);
      yaws.push_back(*r.yaw[i]);
    }
  if (yaws.empty()) return std::nullopt;
  const auto bins = yaw_binned_report(nmes, yaws);
  const char* names[3] = {"0-30", "30-60", "60-90"};
  nlohmann::json j;
  for (std::size_t b = 0; b < 3; ++b) j["bins"][names[b]] = bins[b] ? nlohmann::json(*bins[b]) : nlohmann::json(nullptr);
  j["mean_nme"] = r.mean_nme();
  j["samples"] = yaws.size();
  return j;
}

}  // namespace specmesh
