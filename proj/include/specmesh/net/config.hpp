#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "specmesh/core/error.hpp"

namespace specmesh {

enum class AggregationMode { full, no_up, no_down, shallow, none };

inline AggregationMode parse_aggregation_mode(const std::string& s) {
  if (s == "full") return AggregationMode::full;
  if (s == "no_up") return AggregationMode::no_up;
  if (s == "no_down") return AggregationMode::no_down;
  if (s == "shallow") return AggregationMode::shallow;
  if (s == "none") return AggregationMode::none;
  throw ValidationError("unknown aggregation_mode '" + s + "' (expected full, no_up, no_down, shallow or none)");
}

inline std::string to_string(AggregationMode m) {
  switch (m) {
    case AggregationMode::full: return "full";
    case AggregationMode::no_up: return "no_up";
    case AggregationMode::no_down: return "no_down";
    case AggregationMode::shallow: return "shallow";
    case AggregationMode::none: return "none";
  }
  return "?";
}

/// Architecture hyperparameters. Level i (1 = finest) has a map of
/// input_size / 2^i pixels per side and encoder_channels[i - 1] channels.
struct NetConfig {
  std::size_t input_size = 64;
  std::size_t levels = 4;
  std::vector<std::size_t> encoder_channels{8, 16, 32, 64};
  std::size_t embedding_hidden = 256;
  std::size_t embedding_dim = 128;
  std::size_t decoder_channels = 32;
  std::size_t growth = 16;
  std::size_t head_channels = 16;
  std::size_t cheb_order = 3;
  bool graph_bias = true;
  AggregationMode aggregation_mode = AggregationMode::full;
  std::string hierarchy;  // optional path to a hierarchy directory
  std::string precision = "float32";

  std::size_t map_size(std::size_t level) const { return input_size >> level; }
  std::size_t level_vertices(std::size_t level) const { return map_size(level) * map_size(level); }

  /// Vertex counts the decoder expects, finest level first.
  std::vector<std::size_t> expected_schedule() const {
    std::vector<std::size_t> s;
    for (std::size_t i = 1; i <= levels; ++i) s.push_back(level_vertices(i));
    return s;
  }

  void validate() const {
    require(levels >= 1 && levels <= 10, "config: levels must lie in [1, 10]");
    require(input_size == (std::size_t{4} << levels),
            "config: input_size must equal 4 * 2^levels (" + std::to_string(std::size_t{4} << levels) + " for " +
                std::to_string(levels) + " levels), got " + std::to_string(input_size));
    require(encoder_channels.size() == levels, "config: encoder_channels needs one entry per level (" +
                                                   std::to_string(levels) + "), got " +
                                                   std::to_string(encoder_channels.size()));
    for (std::size_t c : encoder_channels) require(c > 0, "config: encoder channel counts must be positive");
    require(embedding_hidden > 0 && embedding_dim > 0, "config: embedding widths must be positive");
    require(decoder_channels > 0 && growth > 0 && head_channels > 0, "config: decoder widths must be positive");
    require(cheb_order >= 1, "config: cheb_order must be >= 1");
    require(precision == "float32" || precision == "float64", "config: precision must be float32 or float64");
  }

  static NetConfig desk() { return NetConfig{}; }

  static NetConfig micro() {
    NetConfig c;
    c.input_size = 16;
    c.levels = 2;
    c.encoder_channels = {4, 6};
    c.embedding_hidden = 12;
    c.embedding_dim = 8;
    c.decoder_channels = 5;
    c.growth = 3;
    c.head_channels = 4;
    return c;
  }

  static NetConfig full_scale() {
    NetConfig c;
    c.input_size = 256;
    c.levels = 6;
    c.encoder_channels = {16, 32, 64, 128, 128, 128};
    c.embedding_hidden = 512;
    c.embedding_dim = 256;
    c.decoder_channels = 128;
    c.growth = 32;
    c.head_channels = 32;
    return c;
  }
};

inline void to_json(nlohmann::json& j, const NetConfig& c) {
  j = nlohmann::json{{"input_size", c.input_size},
                     {"levels", c.levels},
                     {"encoder_channels", c.encoder_channels},
                     {"embedding_hidden", c.embedding_hidden},
                     {"embedding_dim", c.embedding_dim},
                     {"decoder_channels", c.decoder_channels},
                     {"growth", c.growth},
                     {"head_channels", c.head_channels},
                     {"cheb_order", c.cheb_order},
                     {"graph_bias", c.graph_bias},
                     {"aggregation_mode", to_string(c.aggregation_mode)},
                     {"hierarchy", c.hierarchy},
                     {"precision", c.precision}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, NetConfig& c) {
  require(j.is_object(), "config: network section must be a JSON object");
  static const std::vector<std::string> known{"input_size",     "levels",          "encoder_channels", "embedding_hidden",
                                              "embedding_dim",  "decoder_channels", "growth",           "head_channels",
                                              "cheb_order",     "graph_bias",       "aggregation_mode", "hierarchy",
                                              "precision"};
  for (const auto& [key, _] : j.items())
    require(std::find(known.begin(), known.end(), key) != known.end(), "config: unknown network key '" + key + "'");
  try {
    if (j.contains("input_size")) c.input_size = j.at("input_size").get<std::size_t>();
    if (j.contains("levels")) c.levels = j.at("levels").get<std::size_t>();
    if (j.contains("encoder_channels")) c.encoder_channels = j.at("encoder_channels").get<std::vector<std::size_t>>();
    if (j.contains("embedding_hidden")) c.embedding_hidden = j.at("embedding_hidden").get<std::size_t>();
    if (j.contains("embedding_dim")) c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    if (j.contains("decoder_channels")) c.decoder_channels = j.at("decoder_channels").get<std::size_t>();
    if (j.contains("growth")) c.growth = j.at("growth").get<std::size_t>();
    if (j.contains("head_channels")) c.head_channels = j.at("head_channels").get<std::size_t>();
    if (j.contains("cheb_order")) c.cheb_order = j.at("cheb_order").get<std::size_t>();
    if (j.contains("graph_bias")) c.graph_bias = j.at("graph_bias").get<bool>();
    if (j.contains("aggregation_mode")) c.aggregation_mode = parse_aggregation_mode(j.at("aggregation_mode").get<std::string>());
    if (j.contains("hierarchy")) c.hierarchy = j.at("hierarchy").get<std::string>();
    if (j.contains("precision")) c.precision = j.at("precision").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
}

}  // namespace specmesh
