#include "nav/config.hpp"

#include <fstream>

namespace nav {

using nlohmann::json;

ModelDims RunConfig::model_dims() const {
  ModelDims d;
  d.hidden = model.hidden;
  d.layers = model.layers;
  d.heads = model.heads;
  d.grid_d = model.grid_d;
  d.grid_s = model.grid_s;
  d.t_max = model.t_max;
  d.bptt_horizon = model.bptt_horizon;
  d.vocab = vocab_size(env.landmark_count);
  d.feature_dim = env.feature_dim;
  d.max_instr_len = env.max_hops + 2;
  return d;
}

EnvGenConfig RunConfig::gen_config() const {
  EnvGenConfig g;
  g.num_nodes = env.num_nodes;
  g.area_side = env.area_side;
  g.connect_radius = env.connect_radius;
  g.landmark_count = env.landmark_count;
  g.min_separation = env.min_separation;
  g.slot_gap_filter = env.slot_gap_filter;
  g.distinct_neighbor_landmarks = env.distinct_neighbor_landmarks;
  g.slots_n = env.slots_n;
  return g;
}

ObserveConfig RunConfig::observe_config() const {
  ObserveConfig o;
  o.n = env.slots_n;
  o.feature_dim = env.feature_dim;
  o.noise_sigma = env.noise_sigma;
  o.landmark_count = env.landmark_count;
  return o;
}

EpisodeConfig RunConfig::episode_config() const { return {env.min_hops, env.max_hops}; }

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "': " + why);
  };
  if (env.num_nodes < 2) fail("env.num_nodes", "must be >= 2");
  if (env.area_side <= 0) fail("env.area_side", "must be positive");
  if (env.connect_radius <= 0) fail("env.connect_radius", "must be positive");
  if (env.landmark_count < 1) fail("env.landmark_count", "must be >= 1");
  if (env.min_separation <= 0) fail("env.min_separation", "must be positive");
  if (env.slots_n < 1) fail("env.slots_n", "must be >= 1");
  if (env.feature_dim < 4 + env.landmark_count)
    fail("env.feature_dim", "must be >= 4 + landmark_count");
  if (env.noise_sigma < 0) fail("env.noise_sigma", "must be >= 0");
  if (env.min_hops < 1) fail("env.min_hops", "must be >= 1");
  if (env.max_hops < env.min_hops) fail("env.max_hops", "must be >= min_hops");
  if (env.train_houses < 1) fail("env.train_houses", "must be >= 1");
  if (env.unseen_houses < 1) fail("env.unseen_houses", "must be >= 1");
  if (env.train_episodes < 1) fail("env.train_episodes", "must be >= 1");
  if (env.val_seen_episodes < 1) fail("env.val_seen_episodes", "must be >= 1");
  if (env.val_unseen_episodes < 1) fail("env.val_unseen_episodes", "must be >= 1");
  if (model.hidden < 1) fail("model.hidden", "must be >= 1");
  if (model.layers < 1) fail("model.layers", "must be >= 1");
  if (model.heads < 1) fail("model.heads", "must be >= 1");
  if (model.hidden % model.heads != 0) fail("model.hidden", "must be divisible by model.heads");
  if (model.grid_d != 0 && model.grid_d % 2 == 0) fail("model.grid_d", "must be 0 or odd");
  if (model.grid_d < 0) fail("model.grid_d", "must be >= 0");
  if (model.grid_s <= 0) fail("model.grid_s", "must be positive");
  if (model.t_max < 1) fail("model.t_max", "must be >= 1");
  if (model.bptt_horizon < 0) fail("model.bptt_horizon", "must be >= 0");
  if (train.iterations < 0) fail("train.iterations", "must be >= 0");
  if (train.batch < 1) fail("train.batch", "must be >= 1");
  if (train.lr <= 0) fail("train.lr", "must be positive");
  if (train.lr_min <= 0 || train.lr_min > train.lr)
    fail("train.lr_min", "must be in (0, lr]");
  if (train.gamma <= 0 || train.gamma > 1) fail("train.gamma", "must be in (0, 1]");
  if (train.clip_norm <= 0) fail("train.clip_norm", "must be positive");
  if (train.eval_interval < 1) fail("train.eval_interval", "must be >= 1");
  if (train.threads < 1) fail("train.threads", "must be >= 1");
  for (double a : train.alpha_teacher)
    if (a < 0) fail("train.alpha_teacher", "weights must be non-negative");
  for (double a : train.alpha_student)
    if (a < 0) fail("train.alpha_student", "weights must be non-negative");
  if (train.value_coef < 0) fail("train.value_coef", "must be >= 0");
  if (eval.success_radius <= 0) fail("eval.success_radius", "must be positive");
}

json RunConfig::to_json() const {
  json j;
  j["version"] = version;
  j["env"] = {{"num_nodes", env.num_nodes},
              {"area_side", env.area_side},
              {"connect_radius", env.connect_radius},
              {"landmark_count", env.landmark_count},
              {"min_separation", env.min_separation},
              {"slot_gap_filter", env.slot_gap_filter},
              {"distinct_neighbor_landmarks", env.distinct_neighbor_landmarks},
              {"slots_n", env.slots_n},
              {"feature_dim", env.feature_dim},
              {"noise_sigma", env.noise_sigma},
              {"min_hops", env.min_hops},
              {"max_hops", env.max_hops},
              {"train_houses", env.train_houses},
              {"unseen_houses", env.unseen_houses},
              {"train_episodes", env.train_episodes},
              {"val_seen_episodes", env.val_seen_episodes},
              {"val_unseen_episodes", env.val_unseen_episodes}};
  j["model"] = {{"hidden", model.hidden},   {"layers", model.layers},
                {"heads", model.heads},     {"grid_d", model.grid_d},
                {"grid_s", model.grid_s},   {"t_max", model.t_max},
                {"bptt_horizon", model.bptt_horizon}};
  j["train"] = {{"iterations", train.iterations},
                {"batch", train.batch},
                {"lr", train.lr},
                {"lr_min", train.lr_min},
                {"gamma", train.gamma},
                {"clip_norm", train.clip_norm},
                {"eval_interval", train.eval_interval},
                {"seed", train.seed},
                {"threads", train.threads},
                {"alpha_teacher", train.alpha_teacher},
                {"alpha_student", train.alpha_student},
                {"success_bonus", train.success_bonus},
                {"value_coef", train.value_coef}};
  j["eval"] = {{"success_radius", eval.success_radius}};
  return j;
}

namespace {

template <typename T>
void read_field(const json& j, const std::string& section, const std::string& key, T& out) {
  (void)section;
  (void)key;
  out = j.get<T>();
}

void apply_section(const json& j, const std::string& name, RunConfig& cfg) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    const std::string field = name + "." + k;
    try {
      if (name == "env") {
        auto& e = cfg.env;
        if (k == "num_nodes") read_field(v, name, k, e.num_nodes);
        else if (k == "area_side") read_field(v, name, k, e.area_side);
        else if (k == "connect_radius") read_field(v, name, k, e.connect_radius);
        else if (k == "landmark_count") read_field(v, name, k, e.landmark_count);
        else if (k == "min_separation") read_field(v, name, k, e.min_separation);
        else if (k == "slot_gap_filter") read_field(v, name, k, e.slot_gap_filter);
        else if (k == "distinct_neighbor_landmarks") read_field(v, name, k, e.distinct_neighbor_landmarks);
        else if (k == "slots_n") read_field(v, name, k, e.slots_n);
        else if (k == "feature_dim") read_field(v, name, k, e.feature_dim);
        else if (k == "noise_sigma") read_field(v, name, k, e.noise_sigma);
        else if (k == "min_hops") read_field(v, name, k, e.min_hops);
        else if (k == "max_hops") read_field(v, name, k, e.max_hops);
        else if (k == "train_houses") read_field(v, name, k, e.train_houses);
        else if (k == "unseen_houses") read_field(v, name, k, e.unseen_houses);
        else if (k == "train_episodes") read_field(v, name, k, e.train_episodes);
        else if (k == "val_seen_episodes") read_field(v, name, k, e.val_seen_episodes);
        else if (k == "val_unseen_episodes") read_field(v, name, k, e.val_unseen_episodes);
        else throw ConfigError("unknown config field '" + field + "'");
      } else if (name == "model") {
        auto& m = cfg.model;
        if (k == "hidden") read_field(v, name, k, m.hidden);
        else if (k == "layers") read_field(v, name, k, m.layers);
        else if (k == "heads") read_field(v, name, k, m.heads);
        else if (k == "grid_d") read_field(v, name, k, m.grid_d);
        else if (k == "grid_s") read_field(v, name, k, m.grid_s);
        else if (k == "t_max") read_field(v, name, k, m.t_max);
        else if (k == "bptt_horizon") read_field(v, name, k, m.bptt_horizon);
        else throw ConfigError("unknown config field '" + field + "'");
      } else if (name == "train") {
        auto& t = cfg.train;
        if (k == "iterations") read_field(v, name, k, t.iterations);
        else if (k == "batch") read_field(v, name, k, t.batch);
        else if (k == "lr") read_field(v, name, k, t.lr);
        else if (k == "lr_min") read_field(v, name, k, t.lr_min);
        else if (k == "gamma") read_field(v, name, k, t.gamma);
        else if (k == "clip_norm") read_field(v, name, k, t.clip_norm);
        else if (k == "eval_interval") read_field(v, name, k, t.eval_interval);
        else if (k == "seed") read_field(v, name, k, t.seed);
        else if (k == "threads") read_field(v, name, k, t.threads);
        else if (k == "alpha_teacher") read_field(v, name, k, t.alpha_teacher);
        else if (k == "alpha_student") read_field(v, name, k, t.alpha_student);
        else if (k == "success_bonus") read_field(v, name, k, t.success_bonus);
        else if (k == "value_coef") read_field(v, name, k, t.value_coef);
        else throw ConfigError("unknown config field '" + field + "'");
      } else if (name == "eval") {
        if (k == "success_radius") read_field(v, name, k, cfg.eval.success_radius);
        else throw ConfigError("unknown config field '" + field + "'");
      }
    } catch (const json::exception& ex) {
      throw ConfigError("config field '" + field + "': " + ex.what());
    }
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;  // defaults
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "version") {
      cfg.version = it.value().get<int>();
      if (cfg.version != 1)
        throw ConfigError("config field 'version': unsupported value " +
                          std::to_string(cfg.version));
    } else if (k == "env" || k == "model" || k == "train" || k == "eval") {
      apply_section(it.value(), k, cfg);
    } else {
      throw ConfigError("unknown config field '" + k + "'");
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw IoError("config file " + path + " is not valid JSON: " + ex.what());
  }
  return from_json(j);
}

void RunConfig::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  out << to_json().dump(2) << "\n";
}

}  // namespace nav
