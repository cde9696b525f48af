#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "specmesh/core/binary_io.hpp"
#include "specmesh/core/error.hpp"
#include "specmesh/loss/losses.hpp"
#include "specmesh/net/config.hpp"

namespace specmesh {

/// Everything a training run depends on besides its data and hierarchy.
struct RunConfig {
  NetConfig network;
  std::uint64_t seed = 7;
  std::size_t batch_size = 48;
  std::size_t steps = 2000;
  double lr = 1e-3;
  double momentum = 0.9;
  double lr_decay = 0.99;
  LossSpec loss;
  /// "pixels": errors are measured in input-image pixels (normalized error
  /// times input_size / 2), the scale at which W and epsilon are set.
  /// "normalized": errors in [-1,1] viewing-box units.
  std::string loss_units = "pixels";
  bool augment = true;
  std::size_t log_every = 10;
  std::size_t checkpoint_every = 500;
  std::string init = "fan_in_uniform";

  void validate() const {
    network.validate();
    require(batch_size >= 1, "config: batch_size must be >= 1");
    require(std::isfinite(lr) && lr > 0.0, "config: lr must be positive");
    require(momentum >= 0.0 && momentum < 1.0, "config: momentum must lie in [0, 1)");
    require(lr_decay > 0.0 && lr_decay <= 1.0, "config: lr_decay must lie in (0, 1]");
    require(log_every >= 1 && checkpoint_every >= 1, "config: log_every and checkpoint_every must be >= 1");
    require(init == "fan_in_uniform", "config: only the fan_in_uniform init is implemented");
    require(loss_units == "pixels" || loss_units == "normalized", "config: loss_units must be pixels or normalized");
    loss.validate();
  }

  LossSpec training_loss() const {
    LossSpec s = loss;
    s.error_scale = loss_units == "pixels" ? static_cast<double>(network.input_size) / 2.0 : 1.0;
    return s;
  }

  /// The desk overfit setup: batch 8, the default loss, no augmentation.
  static RunConfig desk() {
    RunConfig c;
    c.network = NetConfig::desk();
    c.batch_size = 8;
    c.augment = false;
    return c;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json net;
  to_json(net, c.network);
  return {{"network", net},
          {"seed", c.seed},
          {"batch_size", c.batch_size},
          {"steps", c.steps},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"lr_decay", c.lr_decay},
          {"loss", {{"kind", to_string(c.loss.kind)}, {"w", c.loss.w}, {"epsilon", c.loss.epsilon}, {"beta", c.loss.beta}}},
          {"loss_units", c.loss_units},
          {"augment", c.augment},
          {"log_every", c.log_every},
          {"checkpoint_every", c.checkpoint_every},
          {"init", c.init}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  require(j.is_object(), "config: top level must be a JSON object");
  RunConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "network") {
        from_json(v, c.network);
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "batch_size") {
        c.batch_size = v.get<std::size_t>();
      } else if (key == "steps") {
        c.steps = v.get<std::size_t>();
      } else if (key == "lr") {
        c.lr = v.get<double>();
      } else if (key == "momentum") {
        c.momentum = v.get<double>();
      } else if (key == "lr_decay") {
        c.lr_decay = v.get<double>();
      } else if (key == "loss") {
        require(v.is_object(), "config: loss must be an object");
        for (const auto& [lk, lv] : v.items()) {
          if (lk == "kind") c.loss.kind = parse_loss_kind(lv.get<std::string>());
          else if (lk == "w") c.loss.w = lv.get<double>();
          else if (lk == "epsilon") c.loss.epsilon = lv.get<double>();
          else if (lk == "beta") c.loss.beta = lv.get<double>();
          else throw ValidationError("config: unknown loss key '" + lk + "'");
        }
      } else if (key == "loss_units") {
        c.loss_units = v.get<std::string>();
      } else if (key == "augment") {
        c.augment = v.get<bool>();
      } else if (key == "log_every") {
        c.log_every = v.get<std::size_t>();
      } else if (key == "checkpoint_every") {
        c.checkpoint_every = v.get<std::size_t>();
      } else if (key == "init") {
        c.init = v.get<std::string>();
      } else {
        throw ValidationError("config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig read_run_config(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline void write_run_config(const RunConfig& c, const std::string& path) {
  const std::string text = to_json(c).dump(2) + "\n";
  write_file_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

}  // namespace specmesh
