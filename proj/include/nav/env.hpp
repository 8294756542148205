#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nav/errors.hpp"
#include "nav/geom.hpp"

namespace nav {

// ---- world -----------------------------------------------------------------

struct HouseNode {
  int id = 0;
  Vec2 location;
  int landmark = 0;
};

struct HouseGraph {
  int id = 0;
  std::uint64_t seed = 0;
  std::vector<HouseNode> nodes;
  std::vector<std::pair<int, int>> edges;  // a < b, sorted
  std::vector<std::vector<int>> adj;       // sorted neighbor ids, node-indexed

  void build_adjacency();
  bool adjacent(int a, int b) const;
  int node_count() const { return static_cast<int>(nodes.size()); }
};

struct EnvGenConfig {
  int num_nodes = 30;
  double area_side = 16.0;
  double connect_radius = 3.6;
  int landmark_count = 32;
  double min_separation = 1.8;
  // When true, candidate edges whose bearing would land in an already-used
  // panorama slot (given slots_n) are skipped, so observe() never sees a
  // slot collision.
  bool slot_gap_filter = true;
  int slots_n = 36;
  // When true, landmarks are assigned so that no node has two neighbors with
  // the same landmark id; landmark-sequence instructions then identify the
  // next node unambiguously at every step.
  bool distinct_neighbor_landmarks = true;
};

// Random geometric graph over uniform points, made connected with
// minimum-length bridge edges. Deterministic given the seed.
HouseGraph generate_house(const EnvGenConfig& cfg, std::uint64_t seed);

// ---- observation ------------------------------------------------------------

struct ViewSlot {
  std::vector<double> feature;
  int navigable_to = -1;  // neighbor node id, or -1
  double heading = 0.0;
  double elevation = 0.0;
};

struct Panorama {
  int node = -1;
  int k = 0;  // navigable slots occupy indices 0..k-1
  std::vector<ViewSlot> slots;
};

struct ObserveConfig {
  int n = 36;
  int feature_dim = 36;
  double noise_sigma = 0.0;
  int landmark_count = 32;
};

Panorama observe(const HouseGraph& house, int node, const ObserveConfig& cfg,
                 std::mt19937_64& rng);

// ---- paths ------------------------------------------------------------------

enum class PathWeight { Hops, Euclidean };

struct PathResult {
  std::vector<int> path;
  double length = 0.0;  // hop count or meters, per weight choice
};

// Minimal path under the chosen weight; among equals, the lexicographically
// smallest node-id sequence. Throws DomainError for disconnected pairs.
PathResult shortest_path(const HouseGraph& house, int a, int b, PathWeight w);

// Euclidean geodesic distance from src to every node (inf when unreachable).
std::vector<double> geodesic_from(const HouseGraph& house, int src);

// ---- episodes ----------------------------------------------------------------

struct Episode {
  int id = 0;
  int house_id = 0;
  const HouseGraph* house = nullptr;
  int start = 0;
  int goal = 0;
  std::vector<int> gt_path;
  double gt_length = 0.0;  // meters along gt_path
  std::vector<int> instruction;
  std::string instruction_text;
};

struct EpisodeConfig {
  int min_hops = 3;
  int max_hops = 6;
};

// Uniform draw over (start, goal) pairs whose canonical shortest path has a
// hop count within bounds.
Episode sample_episode(const HouseGraph& house, const EpisodeConfig& cfg, std::uint64_t seed);

// Instruction vocabulary: 0 = BOS, 1 = EOS, 2+i = landmark i.
constexpr int kTokenBos = 0;
constexpr int kTokenEos = 1;
constexpr int kLandmarkTokenBase = 2;
inline int vocab_size(int landmark_count) { return kLandmarkTokenBase + landmark_count; }

// [BOS, landmark(gt_path[1]), ..., landmark(gt_path[last]), EOS]
std::vector<int> render_instruction(const HouseGraph& house, const std::vector<int>& gt_path);
std::string instruction_text(const std::vector<int>& tokens);

// ---- traces & metrics ---------------------------------------------------------

struct StepRecord {
  int step = 0;  // 1-based
  std::string action_kind;
  int action_index = -1;
  int num_views = 0;    // k^t at decision time
  int num_history = 0;  // history actions offered at decision time
  int node = -1;  // node after executing the action
  Vec2 location;
  std::vector<int> path_nodes;  // nodes traversed by the action, endpoints included
  std::vector<double> policy;
  std::vector<double> target_dist;
  Vec2 target_argmax_center;  // absolute coordinates
  double dc = 0.0;            // straight-line error of the argmax center
  double travelled = 0.0;
  double loss_il = 0.0, loss_ht = 0.0, loss_t = 0.0;
  bool stop = false;
  bool forced_stop = false;
};

struct EpisodeTrace {
  int episode_id = -1;
  std::vector<int> visited;  // node sequence from the start, inclusive
  std::vector<StepRecord> steps;
  bool stopped = false;
};

struct EpisodeMetrics {
  bool success = false;
  double path_length = 0.0;
  double gt_length = 0.0;
  double final_error = 0.0;
  double oracle_error = 0.0;
};

struct MetricsReport {
  double sr = 0.0, spl = 0.0, osr = 0.0, ne = 0.0;
  std::vector<EpisodeMetrics> per_episode;
};

MetricsReport compute_metrics(std::span<const Episode> episodes,
                              std::span<const EpisodeTrace> traces, double success_radius);

// ---- teacher oracle ------------------------------------------------------------

struct ActionBinding;  // policy.hpp

// Index (into `bindings`) of the supervising action: stop at the goal;
// otherwise the on-gt-path action geodesically closest to the goal (ties
// prefer views over histories, then lower index); if nothing is on the path,
// the globally closest action.
int teacher_action(const Episode& episode, std::span<const ActionBinding> bindings,
                   const std::vector<double>& dist_from_goal, int current_node);

// ---- pools & serialization -----------------------------------------------------

struct EnvSplit {
  std::vector<HouseGraph> houses;
  std::vector<Episode> episodes;

  const HouseGraph* find_house(int house_id) const;
  void bind();  // resolve episode house pointers by id
};

void save_split(const EnvSplit& split, const std::string& split_name, const std::string& path);
EnvSplit load_split(const std::string& path);

// splitmix64-style seed derivation for independent deterministic streams
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace nav
