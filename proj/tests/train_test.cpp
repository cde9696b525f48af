#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "specmesh/data/synth.hpp"
#include "specmesh/sampling/generators.hpp"
#include "specmesh/sampling/hierarchy.hpp"
#include "specmesh/train/trainer.hpp"

using namespace specmesh;
namespace fs = std::filesystem;

namespace {

struct MicroSetup {
  Mesh tmpl = sphere_mesh(64, 0.6);
  MeshHierarchy hierarchy = build_hierarchy(tmpl, {64, 16});
  std::vector<SampleRecord> data;
  MicroSetup() {
    DeformSpec spec;
    spec.image_size = 16;
    spec.basis_count = 4;
    data = synth_dataset(tmpl, spec, 8, 3);
  }
};

const MicroSetup& micro() {
  static const MicroSetup s;
  return s;
}

RunConfig micro_config() {
  RunConfig c;
  c.network = NetConfig::micro();
  c.batch_size = 2;
  c.steps = 6;
  c.log_every = 2;
  c.checkpoint_every = 3;
  c.lr = 1e-2;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("specmesh_train_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(RunConfigJson, RoundTripPreservesEveryField) {
  RunConfig c = micro_config();
  c.seed = 99;
  c.momentum = 0.5;
  c.lr_decay = 0.9;
  c.loss.kind = LossKind::smooth_l1;
  c.loss.beta = 0.25;
  c.loss_units = "normalized";
  c.augment = false;
  const RunConfig back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  const auto path = scratch("cfg.json");
  write_run_config(c, path.string());
  EXPECT_EQ(to_json(read_run_config(path.string())), to_json(c));
  fs::remove(path);
}

TEST(RunConfigJson, RejectsUnknownAndInvalid) {
  EXPECT_THROW(run_config_from_json({{"learning_rate", 0.1}}), ValidationError);
  EXPECT_THROW(run_config_from_json({{"loss", {{"kind", "wing"}, {"width", 3}}}}), ValidationError);
  EXPECT_THROW(run_config_from_json({{"lr", -1.0}}), ValidationError);
  EXPECT_THROW(run_config_from_json({{"momentum", 1.0}}), ValidationError);
  EXPECT_THROW(run_config_from_json({{"loss_units", "meters"}}), ValidationError);
  EXPECT_THROW(run_config_from_json({{"batch_size", "eight"}}), ValidationError);
  EXPECT_THROW(run_config_from_json(nlohmann::json::array()), ValidationError);
  const RunConfig d = run_config_from_json(nlohmann::json::object());
  EXPECT_EQ(d.batch_size, 48u);
  EXPECT_EQ(d.lr, 1e-3);
  EXPECT_EQ(d.lr_decay, 0.99);
  EXPECT_EQ(d.momentum, 0.9);
  EXPECT_EQ(d.network.cheb_order, 3u);
}

TEST(RunConfigJson, PixelUnitsScaleErrorsByHalfTheInput) {
  RunConfig c = RunConfig::desk();
  EXPECT_EQ(c.training_loss().error_scale, 32.0);
  c.loss_units = "normalized";
  EXPECT_EQ(c.training_loss().error_scale, 1.0);
}

TEST(Trainer, EpochsVisitEverySampleOnce) {
  Trainer<float> tr(micro_config(), micro().hierarchy, micro().data);
  ASSERT_EQ(tr.steps_per_epoch(), 4u);
  for (int epoch = 0; epoch < 2; ++epoch) {
    std::multiset<std::size_t> seen;
    for (int s = 0; s < 4; ++s) {
      for (auto i : tr.batch_indices()) seen.insert(i);
      EXPECT_NEAR(tr.current_lr(), 1e-2 * std::pow(0.99, epoch), 1e-15);
      tr.train_step();
    }
    EXPECT_EQ(seen, (std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}));
  }
}

TEST(Trainer, RunWritesLogAndCheckpoints) {
  const auto out = scratch("run");
  Trainer<float> tr(micro_config(), micro().hierarchy, micro().data);
  const auto rows = tr.run(out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].step, 1u);
  EXPECT_EQ(rows[3].step, 6u);
  std::ifstream log(out / "train_log.csv");
  std::string line;
  std::getline(log, line);
  EXPECT_EQ(line, "step,lr,loss");
  std::size_t n = 0;
  while (std::getline(log, line)) ++n;
  EXPECT_EQ(n, 4u);
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "step_000003.ckpt"));
  EXPECT_TRUE(fs::exists(out / "checkpoints" / "step_000006.ckpt"));
  EXPECT_EQ(read_checkpoint_step((out / "final.ckpt").string()), 6u);
  fs::remove_all(out);
}

TEST(Trainer, ResumeReproducesUninterruptedRun) {
  for (bool aug : {false, true}) {
    RunConfig c = micro_config();
    c.augment = aug;
    const auto a = scratch("full"), b = scratch("resumed");
    Trainer<float>(c, micro().hierarchy, micro().data).run(a);

    RunConfig half = c;
    half.steps = 3;
    Trainer<float>(half, micro().hierarchy, micro().data).run(b);
    Trainer<float> second(c, micro().hierarchy, micro().data);
    second.resume((b / "final.ckpt").string());
    EXPECT_EQ(second.step(), 3u);
    second.run(b);

    EXPECT_EQ(read_file_bytes((a / "final.ckpt").string()), read_file_bytes((b / "final.ckpt").string()))
        << "augment=" << aug;
    // The resumed log also holds the first run's closing row (step 3).
    std::ifstream la(a / "train_log.csv"), lb(b / "train_log.csv");
    std::vector<std::string> ra, rb;
    for (std::string line; std::getline(la, line);) ra.push_back(line);
    for (std::string line; std::getline(lb, line);)
      if (line.rfind("3,", 0) != 0) rb.push_back(line);
    EXPECT_EQ(ra, rb);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST(Trainer, RepeatedRunsAreBitIdentical) {
  const auto a = scratch("rep_a"), b = scratch("rep_b");
  Trainer<float>(micro_config(), micro().hierarchy, micro().data).run(a);
  Trainer<float>(micro_config(), micro().hierarchy, micro().data).run(b);
  EXPECT_EQ(read_file_bytes((a / "final.ckpt").string()), read_file_bytes((b / "final.ckpt").string()));
  RunConfig other = micro_config();
  other.seed = 8;
  const auto c = scratch("rep_c");
  Trainer<float>(other, micro().hierarchy, micro().data).run(c);
  EXPECT_NE(read_file_bytes((a / "final.ckpt").string()), read_file_bytes((c / "final.ckpt").string()));
  for (const auto& p : {a, b, c}) fs::remove_all(p);
}

TEST(Trainer, LossDecreasesOnTinySet) {
  RunConfig c = micro_config();
  c.augment = false;
  c.steps = 60;
  c.log_every = 60;
  Trainer<float> tr(c, micro().hierarchy, micro().data);
  const double first = tr.train_step();
  double last = 0;
  while (tr.step() < c.steps) last = tr.train_step();
  EXPECT_LT(last, first);
}

TEST(Trainer, DivergenceRaisesNumericError) {
  RunConfig c = micro_config();
  c.lr = 1e30;
  Trainer<float> tr(c, micro().hierarchy, micro().data);
  EXPECT_THROW(
      {
        for (int i = 0; i < 20; ++i) tr.train_step();
      },
      NumericError);
}

TEST(Trainer, RejectsMismatchedData) {
  RunConfig c = micro_config();
  c.batch_size = 9;
  EXPECT_THROW(Trainer<float>(c, micro().hierarchy, micro().data), ValidationError);
  c = micro_config();
  c.network = NetConfig::desk();
  EXPECT_THROW(Trainer<float>(c, micro().hierarchy, micro().data), ValidationError);
  EXPECT_THROW(read_checkpoint_step("/nonexistent/final.ckpt"), ValidationError);
}

std::vector<SampleRecord> with_landmarks(std::vector<std::uint32_t> lm) {
  auto data = micro().data;
  for (auto& r : data) r.landmark_indices = lm;
  return data;
}

Tensor<float> rows_of(const Tensor<float>& v, const std::vector<std::uint32_t>& idx) {
  Tensor<float> out(Shape{idx.size(), 3});
  for (std::size_t k = 0; k < idx.size(); ++k)
    for (std::size_t c = 0; c < 3; ++c) out.at(k, c) = v.at(idx[k], c);
  return out;
}

TEST(Evaluate, PerfectPredictionsGiveZeroNme) {
  const auto data = with_landmarks({0, 9, 17, 30, 41, 63});
  std::vector<Tensor<float>> preds;
  for (const auto& r : data) preds.push_back(r.gt_vertices);
  for (bool lm : {false, true}) {
    EvalOptions o;
    o.landmarks_only = lm;
    const auto rep = evaluate_predictions(preds, data, o);
    ASSERT_EQ(rep.nme.size(), data.size());
    for (double e : rep.nme) EXPECT_EQ(e, 0.0);
    EXPECT_EQ(rep.ced.back().fraction, 1.0);
  }
  EvalOptions o;
  o.landmarks_only = true;
  EXPECT_TRUE(micro().data[0].landmark_indices.empty());
  EXPECT_THROW(evaluate_predictions(preds, micro().data, o), ValidationError);
}

TEST(Evaluate, DenseNmeNormalizesByLandmarkHullWhenPresent) {
  // Shifting every vertex by d in x gives mean distance d.
  const std::vector<std::uint32_t> lm{1, 5, 12, 33, 50};
  std::vector<Tensor<float>> preds;
  for (const auto& r : micro().data) {
    Tensor<float> p = r.gt_vertices;
    for (std::size_t v = 0; v < p.dim(0); ++v) p.at(v, 0) += 0.01f;
    preds.push_back(p);
  }
  const auto with = evaluate_predictions(preds, with_landmarks(lm), {});
  const auto without = evaluate_predictions(preds, micro().data, {});
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& gt = micro().data[i].gt_vertices;
    EXPECT_NEAR(with.nme[i], 0.01 / hull_size(rows_of(gt, lm)), 1e-6);
    EXPECT_NEAR(without.nme[i], 0.01 / hull_size(gt), 1e-6);
  }
}

TEST(Evaluate, PredictIsBatchInvariantInEvalMode) {
  Trainer<float> tr(micro_config(), micro().hierarchy, micro().data);
  for (int i = 0; i < 3; ++i) tr.train_step();
  const auto one = predict(tr.net(), micro().data, 1);
  const auto many = predict(tr.net(), micro().data, 8);
  ASSERT_EQ(one.size(), many.size());
  for (std::size_t i = 0; i < one.size(); ++i)
    for (std::size_t k = 0; k < one[i].size(); ++k) EXPECT_NEAR(one[i][k], many[i][k], 1e-5f);
}

TEST(Evaluate, YawSummaryBins) {
  EvalReport r;
  r.nme = {0.1, 0.2, 0.3, 0.5};
  r.yaw = {10.0, -20.0, 45.0, std::nullopt};
  r.sample_ids = {"00000", "00001", "00002", "00003"};
  const auto j = yaw_summary(r);
  ASSERT_TRUE(j.has_value());
  EXPECT_NEAR((*j)["bins"]["0-30"].get<double>(), 0.15, 1e-12);
  EXPECT_NEAR((*j)["bins"]["30-60"].get<double>(), 0.3, 1e-12);
  EXPECT_TRUE((*j)["bins"]["60-90"].is_null());
  EXPECT_EQ((*j)["samples"].get<std::size_t>(), 3u);
  r.yaw = {std::nullopt, std::nullopt, std::nullopt, std::nullopt};
  EXPECT_FALSE(yaw_summary(r).has_value());
}
