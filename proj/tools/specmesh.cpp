#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "specmesh/core/parallel.hpp"
#include "specmesh/data/synth.hpp"
#include "specmesh/sampling/generators.hpp"
#include "specmesh/sampling/hierarchy.hpp"
#include "specmesh/train/gradcheck_registry.hpp"
#include "specmesh/train/run_config.hpp"
#include "specmesh/train/trainer.hpp"

#ifndef SPECMESH_VERSION
#define SPECMESH_VERSION "unknown"
#endif

using namespace specmesh;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file_bytes(path.string(), std::vector<unsigned char>(text.begin(), text.end()));
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

/// manifest.json: written before the work starts and completed afterwards.
class Manifest {
 public:
  Manifest(const std::string& command, const fs::path& path, nlohmann::json args)
      : path_(path) {
    doc_ = {{"command", command},
            {"version", SPECMESH_VERSION},
            {"args", std::move(args)},
            {"config", nullptr},
            {"seed", nullptr},
            {"output", absolute(path.parent_path().string())},
            {"started", utc_now()},
            {"finished", nullptr},
            {"status", "running"}};
  }
  void set(const std::string& key, nlohmann::json v) { doc_[key] = std::move(v); }
  void write() const {
    fs::create_directories(path_.parent_path());
    write_json(path_, doc_);
  }
  void finish() {
    doc_["finished"] = utc_now();
    doc_["status"] = "ok";
    write();
  }

 private:
  fs::path path_;
  nlohmann::json doc_;
};

std::vector<std::size_t> parse_schedule(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw ValidationError("schedule: '" + item + "' is not a vertex count");
    out.push_back(std::stoul(item));
  }
  require(!out.empty(), "schedule: empty");
  return out;
}

// A relative hierarchy path inside a config file is taken relative to that file.
std::string config_hierarchy(const RunConfig& cfg, const std::string& config_path) {
  if (cfg.network.hierarchy.empty()) return {};
  const fs::path h = cfg.network.hierarchy;
  return h.is_absolute() ? h.string() : (fs::path(config_path).parent_path() / h).string();
}

std::string resolve_hierarchy(const std::string& flag, const std::string& ckpt, const std::string& from_config) {
  if (!flag.empty()) return flag;
  const auto side = read_checkpoint_sidecar(ckpt);
  if (side.contains("hierarchy") && side.at("hierarchy").is_string()) return side.at("hierarchy").get<std::string>();
  if (!from_config.empty()) return from_config;
  throw ValidationError("checkpoint " + ckpt + " does not record its hierarchy; pass --hierarchy");
}

template <typename T>
std::unique_ptr<AggNet<T>> load_model(const RunConfig& cfg, const std::string& hierarchy_dir, const std::string& ckpt) {
  auto net = std::make_unique<AggNet<T>>(cfg.network, cfg.seed);
  net->bind(read_hierarchy(hierarchy_dir));
  load_checkpoint(net->store(), ckpt);
  net->set_training(false);
  return net;
}

// ---- commands ------------------------------------------------------------

struct SphereArgs {
  std::size_t vertices = 1024;
  double radius = 0.6;
  std::string out;
};

int cmd_sphere(const SphereArgs& a) {
  require(a.radius > 0.0 && a.radius <= 1.0, "sphere: radius must lie in (0, 1]");
  const Mesh m = sphere_mesh(a.vertices, a.radius);
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_off(m, a.out);
  std::printf("wrote %s (%zu vertices, %zu faces)\n", a.out.c_str(), m.vertex_count(), m.face_count());
  return 0;
}

struct HierarchyArgs {
  std::string mesh, schedule, out;
};

int cmd_hierarchy(const HierarchyArgs& a) {
  Manifest man("hierarchy", fs::path(a.out) / "manifest.json",
               {{"mesh", absolute(a.mesh)}, {"schedule", a.schedule}});
  man.write();
  const auto schedule = parse_schedule(a.schedule);
  const Mesh mesh = read_off(a.mesh);
  require(mesh.vertex_count() == schedule.front(), "schedule starts at " + std::to_string(schedule.front()) +
                                                       " but the mesh has " + std::to_string(mesh.vertex_count()) +
                                                       " vertices");
  const MeshHierarchy h = build_hierarchy(mesh, schedule);
  write_hierarchy(h, a.out);
  for (std::size_t i = 0; i < h.level_count(); ++i)
    std::printf("level %zu: %zu vertices, lambda_max %.6f\n", i, h.levels[i].vertex_count(), h.lambda_max[i]);
  man.finish();
  return 0;
}

struct SynthArgs {
  std::string templ, out;
  long long count = 32;
  std::uint64_t seed = 7;
  DeformSpec spec;
};

int cmd_synth(const SynthArgs& a) {
  Manifest man("synth", fs::path(a.out) / "manifest.json",
               {{"template", absolute(a.templ)}, {"count", a.count}, {"spec", to_json(a.spec)}});
  man.set("seed", a.seed);
  man.write();
  require(a.count >= 1, "synth: --count must be >= 1");
  a.spec.validate();
  const Mesh tmpl = read_off(a.templ);
  const auto data = synth_dataset(tmpl, a.spec, static_cast<std::size_t>(a.count), a.seed);
  save_dataset(data, {absolute(a.templ), a.spec, a.seed, data.size()}, a.out);
  std::printf("wrote %zu samples (%zux%zu images, %zu vertices) to %s\n", data.size(), a.spec.image_size,
              a.spec.image_size, tmpl.vertex_count(), a.out.c_str());
  man.finish();
  return 0;
}

struct TrainArgs {
  std::string config, data, hierarchy, out, resume;
};

template <typename T>
void train_with(const RunConfig& cfg, const TrainArgs& a) {
  const auto data = load_dataset(a.data);
  const MeshHierarchy h = read_hierarchy(a.hierarchy);
  Trainer<T> trainer(cfg, h, data);
  trainer.set_sidecar_extra({{"hierarchy", absolute(a.hierarchy)}, {"data", absolute(a.data)}});
  if (!a.resume.empty()) {
    trainer.resume(a.resume);
    std::printf("resumed from %s at step %zu\n", a.resume.c_str(), trainer.step());
  }
  const auto t0 = std::chrono::steady_clock::now();
  trainer.run(a.out, [&](const TrainLogRow& row) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("step %zu  lr %.6g  loss %.6f  (%.1fs)\n", row.step, row.lr, row.loss, s);
    std::fflush(stdout);
  });
  std::printf("final checkpoint %s\n", (fs::path(a.out) / "final.ckpt").c_str());
}

int cmd_train(const TrainArgs& a) {
  Manifest man("train", fs::path(a.out) / "manifest.json",
               {{"data", absolute(a.data)}, {"hierarchy", absolute(a.hierarchy)}, {"resume", absolute(a.resume)}});
  man.set("config", absolute(a.config));
  man.write();
  const RunConfig cfg = read_run_config(a.config);
  man.set("seed", cfg.seed);
  man.write();
  TrainArgs args = a;
  if (args.hierarchy.empty()) args.hierarchy = config_hierarchy(cfg, a.config);
  if (args.hierarchy.empty()) throw ValidationError("no hierarchy: pass --hierarchy or set network.hierarchy");
  write_run_config(cfg, (fs::path(a.out) / "config.json").string());
  if (cfg.network.precision == "float64")
    train_with<double>(cfg, args);
  else
    train_with<float>(cfg, args);
  man.finish();
  return 0;
}

struct EvalArgs {
  std::string ckpt, config, data, hierarchy, out, mode = "3d";
  bool landmarks_only = false;
};

template <typename T>
EvalReport eval_with(const RunConfig& cfg, const EvalArgs& a, const std::vector<SampleRecord>& data,
                     const EvalOptions& opt) {
  auto net = load_model<T>(cfg, resolve_hierarchy(a.hierarchy, a.ckpt, config_hierarchy(cfg, a.config)), a.ckpt);
  check_dataset_against(data, cfg.network, net->output_vertices());
  return evaluate(*net, data, opt);
}

int cmd_eval(const EvalArgs& a) {
  Manifest man("eval", fs::path(a.out) / "manifest.json",
               {{"ckpt", absolute(a.ckpt)},
                {"data", absolute(a.data)},
                {"mode", a.mode},
                {"landmarks_only", a.landmarks_only}});
  man.set("config", absolute(a.config));
  man.write();
  const RunConfig cfg = read_run_config(a.config);
  man.set("seed", cfg.seed);
  man.write();
  EvalOptions opt;
  opt.dims = a.mode == "2d" ? 2 : 3;
  opt.landmarks_only = a.landmarks_only;
  const auto data = load_dataset(a.data);
  const EvalReport rep = cfg.network.precision == "float64" ? eval_with<double>(cfg, a, data, opt)
                                                            : eval_with<float>(cfg, a, data, opt);
  write_nme_csv((fs::path(a.out) / "nme.csv").string(), rep);
  write_ced_csv((fs::path(a.out) / "ced.csv").string(), rep.ced);
  if (const auto yaw = yaw_summary(rep)) write_json(fs::path(a.out) / "yaw_bins.json", *yaw);
  std::printf("samples %zu  mean NME %.6f (%s%s)\n", rep.nme.size(), rep.mean_nme(), a.mode.c_str(),
              a.landmarks_only ? ", landmarks" : ", dense");
  man.finish();
  return 0;
}

struct GradcheckArgs {
  std::string op, out;
  bool all = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  std::optional<Manifest> man;
  if (!a.out.empty()) {
    man.emplace("gradcheck", fs::path(a.out) / "manifest.json", nlohmann::json{{"op", a.op}, {"all", a.all}});
    man->write();
  }
  const auto registry = gradcheck_registry();
  std::vector<const GradcheckCase*> chosen;
  if (a.all || a.op.empty()) {
    for (const auto& c : registry) chosen.push_back(&c);
  } else {
    for (const auto& c : registry)
      if (c.name == a.op) chosen.push_back(&c);
    if (chosen.empty()) {
      std::string names;
      for (const auto& c : registry) names += (names.empty() ? "" : ", ") + c.name;
      throw ValidationError("gradcheck: unknown op '" + a.op + "' (known: " + names + ")");
    }
  }
  bool ok = true;
  nlohmann::json rows = nlohmann::json::array();
  std::printf("%-20s %14s %8s %8s  %s\n", "op", "max_rel_error", "checked", "excluded", "result");
  for (const auto* c : chosen) {
    const auto res = c->run();
    const bool pass = res.max_rel_error <= kGradcheckGate && res.checked > 0;
    ok = ok && pass;
    std::printf("%-20s %14.3e %8zu %8zu  %s\n", c->name.c_str(), res.max_rel_error, res.checked, res.excluded,
                pass ? "PASS" : "FAIL");
    rows.push_back({{"op", c->name},
                    {"max_rel_error", res.max_rel_error},
                    {"checked", res.checked},
                    {"excluded", res.excluded},
                    {"worst", res.worst},
                    {"pass", pass}});
  }
  if (man) {
    write_json(fs::path(a.out) / "gradcheck.json", rows);
    man->finish();
  }
  return ok ? 0 : 1;
}

struct InferArgs {
  std::string ckpt, config, image, hierarchy, out;
};

template <typename T>
std::pair<Tensor<float>, double> infer_with(const RunConfig& cfg, const InferArgs& a, const Tensor<float>& image) {
  auto net = load_model<T>(cfg, resolve_hierarchy(a.hierarchy, a.ckpt, config_hierarchy(cfg, a.config)), a.ckpt);
  Tensor<T> x(Shape{1, image.dim(0), image.dim(1), 3});
  for (std::size_t i = 0; i < image.size(); ++i) x[i] = static_cast<T>(image[i]);
  const auto t0 = std::chrono::steady_clock::now();
  const Tensor<T> y = net->forward(x);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  Tensor<float> v(Shape{y.dim(1), 3});
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(y[i]);
  return {std::move(v), ms};
}

int cmd_infer(const InferArgs& a) {
  const RunConfig cfg = read_run_config(a.config);
  const Tensor<float> image = read_ppm(a.image);
  require(image.dim(0) == cfg.network.input_size && image.dim(1) == cfg.network.input_size,
          "infer: image is " + std::to_string(image.dim(1)) + "x" + std::to_string(image.dim(0)) +
              " but the config expects " + std::to_string(cfg.network.input_size) + "x" +
              std::to_string(cfg.network.input_size));
  auto [v, ms] = cfg.network.precision == "float64" ? infer_with<double>(cfg, a, image) : infer_with<float>(cfg, a, image);
  if (const auto parent = fs::path(a.out).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_vtx(v, a.out);
  write_json(fs::path(a.out).replace_extension(".json"),
             {{"command", "infer"},
              {"version", SPECMESH_VERSION},
              {"ckpt", absolute(a.ckpt)},
              {"config", absolute(a.config)},
              {"image", absolute(a.image)},
              {"vertices", v.dim(0)},
              {"elapsed_ms", ms},
              {"finished", utc_now()}});
  std::printf("wrote %s (%zu vertices, forward %.1f ms)\n", a.out.c_str(), v.dim(0), ms);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_cap();
  CLI::App app{"specmesh: image to mesh regression with graph convolutions"};
  app.set_version_flag("--version", SPECMESH_VERSION);
  app.require_subcommand(1);

  SphereArgs sphere;
  auto* sp = app.add_subcommand("sphere", "Write a sphere mesh with an exact vertex count as OFF");
  sp->add_option("--vertices", sphere.vertices, "Vertex count")->capture_default_str();
  sp->add_option("--radius", sphere.radius, "Radius")->capture_default_str();
  sp->add_option("--out", sphere.out, "Output .off path")->required();

  HierarchyArgs hier;
  auto* hp = app.add_subcommand("hierarchy", "Build a sampling hierarchy from a mesh");
  hp->add_option("--mesh", hier.mesh, "Input OFF mesh")->required();
  hp->add_option("--schedule", hier.schedule, "Vertex counts, finest first, e.g. 1024,256,64,16")->required();
  hp->add_option("--out", hier.out, "Output directory")->required();

  SynthArgs synth;
  auto* yp = app.add_subcommand("synth", "Generate a synthetic depth-image dataset");
  yp->add_option("--template", synth.templ, "Template OFF mesh")->required();
  yp->add_option("--count", synth.count, "Number of samples")->capture_default_str();
  yp->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  yp->add_option("--basis-count", synth.spec.basis_count, "Deformation directions")->capture_default_str();
  yp->add_option("--coeff-range", synth.spec.coeff_range, "Coefficient bound")->capture_default_str();
  yp->add_option("--image-size", synth.spec.image_size, "Image side in pixels")->capture_default_str();
  yp->add_option("--yaw-range", synth.spec.yaw_range_degrees, "Yaw bound in degrees")->capture_default_str();
  yp->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  auto* tp = app.add_subcommand("train", "Train a model");
  tp->add_option("--config", train.config, "Run config JSON")->required();
  tp->add_option("--data", train.data, "Dataset directory")->required();
  tp->add_option("--hierarchy", train.hierarchy, "Hierarchy directory (default: network.hierarchy in the config)");
  tp->add_option("--out", train.out, "Output directory")->required();
  tp->add_option("--resume", train.resume, "Checkpoint to resume from");

  EvalArgs ev;
  auto* ep = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  ep->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  ep->add_option("--config", ev.config, "Run config JSON")->required();
  ep->add_option("--data", ev.data, "Dataset directory")->required();
  ep->add_option("--out", ev.out, "Output directory")->required();
  ep->add_option("--hierarchy", ev.hierarchy, "Hierarchy directory (default: recorded in the checkpoint)");
  ep->add_option("--mode", ev.mode, "2d or 3d distances")->check(CLI::IsMember({"2d", "3d"}))->capture_default_str();
  ep->add_flag("--landmarks-only", ev.landmarks_only, "Score the 68 landmark vertices only");

  GradcheckArgs gc;
  auto* gp = app.add_subcommand("gradcheck", "Finite-difference check of the registered ops");
  gp->add_option("--op", gc.op, "Op name");
  gp->add_flag("--all", gc.all, "Check every registered op");
  gp->add_option("--out", gc.out, "Optional output directory for gradcheck.json");

  InferArgs inf;
  auto* ip = app.add_subcommand("infer", "Predict a mesh for one image");
  ip->add_option("--ckpt", inf.ckpt, "Checkpoint")->required();
  ip->add_option("--config", inf.config, "Run config JSON")->required();
  ip->add_option("--image", inf.image, "Input PPM")->required();
  ip->add_option("--out", inf.out, "Output .vtx path")->required();
  ip->add_option("--hierarchy", inf.hierarchy, "Hierarchy directory (default: recorded in the checkpoint)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sp) return cmd_sphere(sphere);
    if (*hp) return cmd_hierarchy(hier);
    if (*yp) return cmd_synth(synth);
    if (*tp) return cmd_train(train);
    if (*ep) return cmd_eval(ev);
    if (*gp) return cmd_gradcheck(gc);
    if (*ip) return cmd_infer(inf);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 2;
}
