#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "nav/env.hpp"
#include "nav/model_params.hpp"

namespace nav {

struct EnvSection {
  int num_nodes = 30;
  double area_side = 16.0;
  double connect_radius = 3.6;
  int landmark_count = 32;
  double min_separation = 1.8;
  bool slot_gap_filter = true;
  bool distinct_neighbor_landmarks = true;
  int slots_n = 36;
  int feature_dim = 36;
  double noise_sigma = 0.0;
  int min_hops = 3;
  int max_hops = 6;
  int train_houses = 50;
  int unseen_houses = 20;
  int train_episodes = 3200;
  int val_seen_episodes = 100;
  int val_unseen_episodes = 100;
};

struct ModelSection {
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int grid_d = 5;
  double grid_s = 6.0;
  int t_max = 15;
  int bptt_horizon = 0;
};

struct TrainSection {
  int iterations = 2000;
  int batch = 8;
  double lr = 1e-3;
  double lr_min = 1e-4;  // linear decay floor; set equal to lr for a constant rate
  double gamma = 0.9;
  double clip_norm = 5.0;
  int eval_interval = 200;
  std::uint64_t seed = 7;
  int threads = 1;
  std::array<double, 4> alpha_teacher{0.2, 0.0, 0.0, 0.1};
  std::array<double, 4> alpha_student{0.0, 1.0, 0.4, 0.1};
  double success_bonus = 2.0;
  double value_coef = 0.5;
};

struct EvalSection {
  double success_radius = 3.0;
};

// Single JSON document, flat env/model/train/eval sections. CLI flags
// override file values; the file overrides the built-in defaults. Every
// default is materialized on load.
struct RunConfig {
  int version = 1;
  EnvSection env;
  ModelSection model;
  TrainSection train;
  EvalSection eval;

  ModelDims model_dims() const;
  EnvGenConfig gen_config() const;
  ObserveConfig observe_config() const;
  EpisodeConfig episode_config() const;

  void validate() const;  // throws ConfigError naming the offending field

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::string& path);
  void save_file(const std::string& path) const;
};

}  // namespace nav
