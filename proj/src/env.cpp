#include "nav/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>

#include "nav/policy.hpp"

namespace nav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

int nearest_slot(double bearing_rad, int n) {
  const double spacing = 2.0 * M_PI / n;
  int best = 0;
  double best_d = kInf;
  for (int j = 0; j < n; ++j) {
    double d = std::fabs(bearing_rad - spacing * j);
    d = std::min(d, 2.0 * M_PI - d);
    if (d < best_d - 1e-15) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

double edge_weight(const HouseGraph& h, int a, int b, PathWeight w) {
  return w == PathWeight::Hops ? 1.0 : distance(h.nodes[a].location, h.nodes[b].location);
}

std::vector<double> dijkstra(const HouseGraph& h, int src, PathWeight w) {
  std::vector<double> dist(h.nodes.size(), kInf);
  dist[src] = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  pq.push({0.0, src});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (int v : h.adj[u]) {
      const double nd = d + edge_weight(h, u, v, w);
      if (nd < dist[v]) {
        dist[v] = nd;
        pq.push({nd, v});
      }
    }
  }
  return dist;
}

// Reconstructs the lexicographically smallest minimal path a -> b given
// distances-to-b. Each hop picks the smallest-id neighbor that stays on a
// shortest path; the Dijkstra relaxation guarantees at least one exact match.
std::vector<int> lex_walk(const HouseGraph& h, int a, int b, const std::vector<double>& dist_to_b,
                          PathWeight w) {
  std::vector<int> path{a};
  int cur = a;
  while (cur != b) {
    int next = -1;
    for (int v : h.adj[cur]) {
      if (dist_to_b[v] + edge_weight(h, cur, v, w) == dist_to_b[cur]) {
        next = v;
        break;  // adj is sorted, first match is the smallest id
      }
    }
    if (next < 0) throw DomainError("shortest_path: walk reconstruction failed");
    path.push_back(next);
    cur = next;
  }
  return path;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void HouseGraph::build_adjacency() {
  adj.assign(nodes.size(), {});
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());
}

bool HouseGraph::adjacent(int a, int b) const {
  const auto& v = adj[a];
  return std::binary_search(v.begin(), v.end(), b);
}

HouseGraph generate_house(const EnvGenConfig& cfg, std::uint64_t seed) {
  if (cfg.num_nodes < 2) throw ConfigError("generate_house: num_nodes must be >= 2");
  const int max_attempts = 200;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> coord(0.0, cfg.area_side);
    std::uniform_int_distribution<int> lm(0, cfg.landmark_count - 1);

    // dart-throwing point placement respecting min_separation
    std::vector<Vec2> pts;
    bool placed_all = true;
    for (int i = 0; i < cfg.num_nodes; ++i) {
      bool ok = false;
      for (int dart = 0; dart < 1000 && !ok; ++dart) {
        Vec2 p{coord(rng), coord(rng)};
        ok = true;
        for (const Vec2& q : pts)
          if (distance(p, q) < cfg.min_separation) {
            ok = false;
            break;
          }
        if (ok) pts.push_back(p);
      }
      if (!ok) {
        placed_all = false;
        break;
      }
    }
    if (!placed_all) continue;

    HouseGraph h;
    h.seed = seed;
    for (int i = 0; i < cfg.num_nodes; ++i)
      h.nodes.push_back({i, pts[static_cast<size_t>(i)], cfg.distinct_neighbor_landmarks ? -1 : lm(rng)});

    // candidate edges within connect_radius, shortest first
    struct Cand {
      double len;
      int a, b;
    };
    std::vector<Cand> cands;
    for (int a = 0; a < cfg.num_nodes; ++a)
      for (int b = a + 1; b < cfg.num_nodes; ++b) {
        const double d = distance(pts[a], pts[b]);
        if (d <= cfg.connect_radius) cands.push_back({d, a, b});
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
      if (x.len != y.len) return x.len < y.len;
      if (x.a != y.a) return x.a < y.a;
      return x.b < y.b;
    });

    std::vector<std::set<int>> used_slots(static_cast<size_t>(cfg.num_nodes));
    auto slot_free = [&](int a, int b) {
      if (!cfg.slot_gap_filter) return true;
      const int sa = nearest_slot(bearing(pts[a], pts[b]), cfg.slots_n);
      const int sb = nearest_slot(bearing(pts[b], pts[a]), cfg.slots_n);
      return !used_slots[a].count(sa) && !used_slots[b].count(sb);
    };
    auto take_edge = [&](int a, int b) {
      if (cfg.slot_gap_filter) {
        used_slots[a].insert(nearest_slot(bearing(pts[a], pts[b]), cfg.slots_n));
        used_slots[b].insert(nearest_slot(bearing(pts[b], pts[a]), cfg.slots_n));
      }
      h.edges.emplace_back(a, b);
    };

    UnionFind uf(cfg.num_nodes);
    for (const Cand& c : cands)
      if (slot_free(c.a, c.b)) {
        take_edge(c.a, c.b);
        uf.unite(c.a, c.b);
      }

    // bridge remaining components with the shortest feasible cross edges
    bool bridged = true;
    while (bridged) {
      int roots = 0;
      for (int i = 0; i < cfg.num_nodes; ++i)
        if (uf.find(i) == i) ++roots;
      if (roots <= 1) break;
      std::vector<Cand> cross;
      for (int a = 0; a < cfg.num_nodes; ++a)
        for (int b = a + 1; b < cfg.num_nodes; ++b)
          if (uf.find(a) != uf.find(b)) cross.push_back({distance(pts[a], pts[b]), a, b});
      std::sort(cross.begin(), cross.end(), [](const Cand& x, const Cand& y) {
        if (x.len != y.len) return x.len < y.len;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
      });
      bridged = false;
      for (const Cand& c : cross)
        if (slot_free(c.a, c.b)) {
          take_edge(c.a, c.b);
          uf.unite(c.a, c.b);
          bridged = true;
          break;
        }
    }
    int roots = 0;
    for (int i = 0; i < cfg.num_nodes; ++i)
      if (uf.find(i) == i) ++roots;
    if (roots != 1) continue;

    std::sort(h.edges.begin(), h.edges.end());
    h.build_adjacency();

    if (cfg.distinct_neighbor_landmarks) {
      // color nodes so that siblings (nodes sharing a neighbor) differ
      std::vector<std::set<int>> conflicts(static_cast<size_t>(cfg.num_nodes));
      for (int u = 0; u < cfg.num_nodes; ++u)
        for (size_t a = 0; a < h.adj[static_cast<size_t>(u)].size(); ++a)
          for (size_t b = a + 1; b < h.adj[static_cast<size_t>(u)].size(); ++b) {
            conflicts[static_cast<size_t>(h.adj[static_cast<size_t>(u)][a])].insert(h.adj[static_cast<size_t>(u)][b]);
            conflicts[static_cast<size_t>(h.adj[static_cast<size_t>(u)][b])].insert(h.adj[static_cast<size_t>(u)][a]);
          }
      std::vector<int> palette(static_cast<size_t>(cfg.landmark_count));
      std::iota(palette.begin(), palette.end(), 0);
      bool colored = true;
      for (int v = 0; v < cfg.num_nodes && colored; ++v) {
        std::shuffle(palette.begin(), palette.end(), rng);
        int chosen = -1;
        for (int c : palette) {
          bool clash = false;
          for (int w : conflicts[static_cast<size_t>(v)])
            if (h.nodes[static_cast<size_t>(w)].landmark == c) {
              clash = true;
              break;
            }
          if (!clash) {
            chosen = c;
            break;
          }
        }
        if (chosen < 0) colored = false;
        h.nodes[static_cast<size_t>(v)].landmark = chosen;
      }
      if (!colored) continue;  // too few landmarks for this layout; retry
    }
    return h;
  }
  throw GenerationError(
      "generate_house: no valid layout after bounded retries; relax min_separation, "
      "connect_radius or slots_n");
}

Panorama observe(const HouseGraph& house, int node, const ObserveConfig& cfg,
                 std::mt19937_64& rng) {
  if (node < 0 || node >= house.node_count())
    throw DomainError("observe: node " + std::to_string(node) + " not in house");
  if (cfg.feature_dim < 4 + cfg.landmark_count)
    throw ConfigError("observe: feature_dim must be >= 4 + landmark_count");
  const Vec2 here = house.nodes[node].location;

  // assign each neighbor to the nearest-heading slot
  std::vector<int> slot_of;  // parallel to adj[node]
  std::vector<int> owner(static_cast<size_t>(cfg.n), -1);
  for (int nb : house.adj[node]) {
    const int s = nearest_slot(bearing(here, house.nodes[nb].location), cfg.n);
    if (owner[s] >= 0)
      throw DomainError("observe: neighbors " + std::to_string(owner[s]) + " and " +
                        std::to_string(nb) + " of node " + std::to_string(node) +
                        " collide in slot " + std::to_string(s) +
                        " (regenerate the house or raise n)");
    owner[s] = nb;
    slot_of.push_back(s);
  }

  const double spacing = 2.0 * M_PI / cfg.n;
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  Panorama pano;
  pano.node = node;
  pano.k = static_cast<int>(house.adj[node].size());

  auto make_slot = [&](int slot_idx, int neighbor) {
    ViewSlot vs;
    vs.heading = spacing * slot_idx;
    vs.elevation = 0.0;
    vs.navigable_to = neighbor;
    vs.feature.assign(static_cast<size_t>(cfg.feature_dim), 0.0);
    vs.feature[0] = std::sin(vs.heading);
    vs.feature[1] = std::cos(vs.heading);
    vs.feature[2] = std::sin(vs.elevation);
    vs.feature[3] = std::cos(vs.elevation);
    if (neighbor >= 0) vs.feature[static_cast<size_t>(4 + house.nodes[neighbor].landmark)] = 1.0;
    if (cfg.noise_sigma > 0.0)
      for (auto& f : vs.feature) f += noise(rng);
    return vs;
  };

  // navigable slots first, preserving heading order
  for (int s = 0; s < cfg.n; ++s)
    if (owner[s] >= 0) pano.slots.push_back(make_slot(s, owner[s]));
  for (int s = 0; s < cfg.n; ++s)
    if (owner[s] < 0) pano.slots.push_back(make_slot(s, -1));
  return pano;
}

PathResult shortest_path(const HouseGraph& house, int a, int b, PathWeight w) {
  if (a < 0 || a >= house.node_count() || b < 0 || b >= house.node_count())
    throw DomainError("shortest_path: node out of range");
  if (a == b) return {{a}, 0.0};
  const auto dist_to_b = dijkstra(house, b, w);
  if (!std::isfinite(dist_to_b[a]))
    throw DomainError("shortest_path: nodes " + std::to_string(a) + " and " + std::to_string(b) +
                      " are unreachable from each other");
  PathResult r;
  r.path = lex_walk(house, a, b, dist_to_b, w);
  r.length = dist_to_b[a];
  return r;
}

std::vector<double> geodesic_from(const HouseGraph& house, int src) {
  return dijkstra(house, src, PathWeight::Euclidean);
}

std::vector<int> render_instruction(const HouseGraph& house, const std::vector<int>& gt_path) {
  std::vector<int> tokens{kTokenBos};
  for (size_t i = 1; i < gt_path.size(); ++i)
    tokens.push_back(kLandmarkTokenBase + house.nodes[gt_path[i]].landmark);
  tokens.push_back(kTokenEos);
  return tokens;
}

std::string instruction_text(const std::vector<int>& tokens) {
  std::string s;
  for (int t : tokens) {
    if (!s.empty()) s += ' ';
    if (t == kTokenBos)
      s += "<bos>";
    else if (t == kTokenEos)
      s += "<eos>";
    else
      s += "lm" + std::to_string(t - kLandmarkTokenBase);
  }
  return s;
}

Episode sample_episode(const HouseGraph& house, const EpisodeConfig& cfg, std::uint64_t seed) {
  struct Pair {
    int s, g, hops;
  };
  std::vector<Pair> candidates;
  for (int g = 0; g < house.node_count(); ++g) {
    const auto dist_to_g = dijkstra(house, g, PathWeight::Euclidean);
    for (int s = 0; s < house.node_count(); ++s) {
      if (s == g || !std::isfinite(dist_to_g[s])) continue;
      const auto path = lex_walk(house, s, g, dist_to_g, PathWeight::Euclidean);
      const int hops = static_cast<int>(path.size()) - 1;
      if (hops >= cfg.min_hops && hops <= cfg.max_hops) candidates.push_back({s, g, hops});
    }
  }
  if (candidates.empty())
    throw GenerationError("sample_episode: house has no start/goal pair with hops in [" +
                          std::to_string(cfg.min_hops) + "," + std::to_string(cfg.max_hops) + "]");
  std::mt19937_64 rng(seed);
  const auto& pick =
      candidates[std::uniform_int_distribution<size_t>(0, candidates.size() - 1)(rng)];

  Episode ep;
  ep.house_id = house.id;
  ep.house = &house;
  ep.start = pick.s;
  ep.goal = pick.g;
  const auto pr = shortest_path(house, pick.s, pick.g, PathWeight::Euclidean);
  ep.gt_path = pr.path;
  ep.gt_length = pr.length;
  ep.instruction = render_instruction(house, ep.gt_path);
  ep.instruction_text = instruction_text(ep.instruction);
  return ep;
}

MetricsReport compute_metrics(std::span<const Episode> episodes,
                              std::span<const EpisodeTrace> traces, double success_radius) {
  if (episodes.size() != traces.size())
    throw DomainError("compute_metrics: episode/trace counts differ");
  MetricsReport rep;
  double sr = 0.0, spl = 0.0, osr = 0.0, ne = 0.0;
  for (size_t i = 0; i < episodes.size(); ++i) {
    const Episode& ep = episodes[i];
    const EpisodeTrace& tr = traces[i];
    if (!tr.stopped || tr.steps.empty() || !tr.steps.back().stop)
      throw DomainError("compute_metrics: trace " + std::to_string(tr.episode_id) +
                        " does not end with a stop");
    const auto dist_from_goal = geodesic_from(*ep.house, ep.goal);
    EpisodeMetrics m;
    m.gt_length = ep.gt_length;
    m.path_length = tr.steps.back().travelled;
    m.final_error = dist_from_goal[static_cast<size_t>(tr.visited.back())];
    m.oracle_error = kInf;
    for (int v : tr.visited)
      m.oracle_error = std::min(m.oracle_error, dist_from_goal[static_cast<size_t>(v)]);
    m.success = m.final_error <= success_radius;
    sr += m.success ? 1.0 : 0.0;
    spl += m.success ? m.gt_length / std::max(m.gt_length, m.path_length) : 0.0;
    osr += (m.oracle_error <= success_radius) ? 1.0 : 0.0;
    ne += m.final_error;
    rep.per_episode.push_back(m);
  }
  const double n = static_cast<double>(episodes.size());
  if (n > 0) {
    rep.sr = sr / n;
    rep.spl = spl / n;
    rep.osr = osr / n;
    rep.ne = ne / n;
  }
  return rep;
}

int teacher_action(const Episode& episode, std::span<const ActionBinding> bindings,
                   const std::vector<double>& dist_from_goal, int current_node) {
  if (bindings.empty()) throw DomainError("teacher_action: empty action space");
  if (current_node == episode.goal) {
    for (size_t i = 0; i < bindings.size(); ++i)
      if (bindings[i].kind == ActionKind::Stop) return static_cast<int>(i);
    throw DomainError("teacher_action: no stop action in the space");
  }
  auto kind_rank = [](ActionKind k) {
    switch (k) {
      case ActionKind::View: return 0;
      case ActionKind::History: return 1;
      case ActionKind::Stop: return 2;
    }
    return 3;
  };
  std::vector<bool> on_path(bindings.size(), false);
  bool any_on_path = false;
  for (size_t i = 0; i < bindings.size(); ++i) {
    for (int p : episode.gt_path)
      if (p == bindings[i].node) {
        on_path[i] = true;
        any_on_path = true;
        break;
      }
  }
  int best = -1;
  for (size_t i = 0; i < bindings.size(); ++i) {
    if (any_on_path && !on_path[i]) continue;
    if (best < 0) {
      best = static_cast<int>(i);
      continue;
    }
    const double da = dist_from_goal[static_cast<size_t>(bindings[i].node)];
    const double db = dist_from_goal[static_cast<size_t>(bindings[static_cast<size_t>(best)].node)];
    if (da < db || (da == db && kind_rank(bindings[i].kind) <
                                    kind_rank(bindings[static_cast<size_t>(best)].kind)))
      best = static_cast<int>(i);
  }
  return best;
}

const HouseGraph* EnvSplit::find_house(int house_id) const {
  for (const auto& h : houses)
    if (h.id == house_id) return &h;
  return nullptr;
}

void EnvSplit::bind() {
  for (auto& ep : episodes) {
    ep.house = find_house(ep.house_id);
    if (!ep.house)
      throw DomainError("EnvSplit: episode " + std::to_string(ep.id) + " references house " +
                        std::to_string(ep.house_id) + " which is not in the split");
  }
}

}  // namespace nav
