#include "nav/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace nav {

const char* action_kind_name(ActionKind k) {
  switch (k) {
    case ActionKind::View: return "view";
    case ActionKind::History: return "history";
    case ActionKind::Stop: return "stop";
  }
  return "?";
}

TargetGridSpec TargetGridSpec::make(int d, double s) {
  if (d < 0 || (d > 0 && d % 2 == 0)) throw ConfigError("grid d must be 0 or a positive odd number");
  if (s <= 0.0) throw ConfigError("grid s must be positive");
  TargetGridSpec g;
  g.d = d;
  g.s = s;
  const double half = (d - 1) / 2.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g.centers.push_back({(i - half) * s, (j - half) * s});
  return g;
}

int target_cell_index(const TargetGridSpec& grid, Vec2 rel_location) {
  if (grid.centers.empty()) throw DomainError("target_cell_index: grid has no cells");
  int best = 0;
  double best_d = distance(grid.centers[0], rel_location);
  for (int i = 1; i < grid.q(); ++i) {
    const double d = distance(grid.centers[static_cast<size_t>(i)], rel_location);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

AgentState AgentState::start(const HouseGraph& house, int start_node) {
  AgentState s;
  s.house = &house;
  s.current = start_node;
  s.start_loc = house.nodes[static_cast<size_t>(start_node)].location;
  s.walk = {start_node};
  s.step = 1;
  s.current_arrival_heading = 0.0;
  s.current_first_step = 1;
  return s;
}

bool AgentState::visited(int node) const {
  return std::find(walk.begin(), walk.end(), node) != walk.end();
}

std::vector<ActionBinding> build_action_space(const AgentState& state, const Panorama& pano,
                                              bool no_gas) {
  std::vector<ActionBinding> out;
  for (int i = 0; i < pano.k; ++i) {
    const int nb = pano.slots[static_cast<size_t>(i)].navigable_to;
    out.push_back({ActionKind::View, i, nb, state.house->nodes[static_cast<size_t>(nb)].location});
  }
  if (!no_gas) {
    for (size_t j = 0; j < state.history_nodes.size(); ++j) {
      const int node = state.history_nodes[j];
      out.push_back({ActionKind::History, static_cast<int>(j), node,
                     state.house->nodes[static_cast<size_t>(node)].location});
    }
  }
  out.push_back({ActionKind::Stop, 0, state.current,
                 state.house->nodes[static_cast<size_t>(state.current)].location});
  return out;
}

AdjacencyMatrix update_topology(const AgentState& state) {
  const int n = static_cast<int>(state.history_nodes.size());
  AdjacencyMatrix e = AdjacencyMatrix::make(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      e.at(i, j) =
          (i != j && state.house->adjacent(state.history_nodes[static_cast<size_t>(i)],
                                           state.history_nodes[static_cast<size_t>(j)]))
              ? 1
              : 0;
  return e;
}

namespace {

Tensor scalar_head(Embedder& emb, const HeadIds& head, const Tensor& gated_rows) {
  ModelParams& mp = emb.params();
  Tape& tape = emb.tape();
  Tensor h1 = linear(gated_rows, tape.param(mp.store, head.w1), tape.param(mp.store, head.b1));
  if (mp.dims.head_activation) h1 = gelu(h1);
  Tensor logits = linear(h1, tape.param(mp.store, head.w2), tape.param(mp.store, head.b2));
  return flatten(logits);
}

Tensor softmax_vec(Tape& tape, const Tensor& logits) {
  (void)tape;
  Mask all = Mask::all_true(1, logits.dim());
  return flatten(masked_softmax(as_row(logits), all));
}

}  // namespace

Tensor score_actions(Embedder& emb, const std::vector<ActionBinding>& bindings,
                     const StepResult& out, const AgentState& state) {
  ModelParams& mp = emb.params();
  Tape& tape = emb.tape();
  std::vector<Tensor> rows_list;
  for (const ActionBinding& a : bindings) {
    switch (a.kind) {
      case ActionKind::View:
        rows_list.push_back(slice_rows(out.views, a.index_within_kind, 1));
        break;
      case ActionKind::History:
        rows_list.push_back(slice_rows(out.histories, a.index_within_kind, 1));
        break;
      case ActionKind::Stop: {
        Tensor stop_tok = add(tape.param(mp.store, mp.stop_embed),
                              emb.position_encode_point(state.rel_of(state.current)));
        rows_list.push_back(as_row(stop_tok));
        break;
      }
    }
  }
  Tensor actions = concat_rows(rows_list);
  Tensor gated = mul_rowvec(actions, out.global);
  return softmax_vec(tape, scalar_head(emb, mp.policy_head, gated));
}

Tensor predict_target(Embedder& emb, const StepResult& out) {
  if (!out.targets.valid()) throw ShapeError("predict_target: no target tokens in this step");
  Tensor gated = mul_rowvec(out.targets, out.global);
  return softmax_vec(emb.tape(), scalar_head(emb, emb.params().target_head, gated));
}

PathResult shortest_path_within(const HouseGraph& house, const std::vector<char>& allowed, int a,
                                int b) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (!allowed[static_cast<size_t>(a)] || !allowed[static_cast<size_t>(b)])
    throw DomainError("shortest_path_within: endpoint outside the explored graph");
  if (a == b) return {{a}, 0.0};
  std::vector<double> dist(house.nodes.size(), kInf);
  dist[static_cast<size_t>(b)] = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  pq.push({0.0, b});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[static_cast<size_t>(u)]) continue;
    for (int v : house.adj[static_cast<size_t>(u)]) {
      if (!allowed[static_cast<size_t>(v)]) continue;
      const double nd = d + distance(house.nodes[static_cast<size_t>(u)].location,
                                     house.nodes[static_cast<size_t>(v)].location);
      if (nd < dist[static_cast<size_t>(v)]) {
        dist[static_cast<size_t>(v)] = nd;
        pq.push({nd, v});
      }
    }
  }
  if (!std::isfinite(dist[static_cast<size_t>(a)]))
    throw DomainError("shortest_path_within: target unreachable inside the explored graph");
  PathResult r;
  r.length = dist[static_cast<size_t>(a)];
  int cur = a;
  r.path.push_back(a);
  while (cur != b) {
    int next = -1;
    for (int v : house.adj[static_cast<size_t>(cur)]) {
      if (!allowed[static_cast<size_t>(v)]) continue;
      if (dist[static_cast<size_t>(v)] +
              distance(house.nodes[static_cast<size_t>(cur)].location,
                       house.nodes[static_cast<size_t>(v)].location) ==
          dist[static_cast<size_t>(cur)]) {
        next = v;
        break;
      }
    }
    if (next < 0) throw DomainError("shortest_path_within: path reconstruction failed");
    r.path.push_back(next);
    cur = next;
  }
  return r;
}

ExecResult execute_action(AgentState& state, const ActionBinding& action) {
  ExecResult res;
  if (action.kind == ActionKind::Stop) {
    res.stopped = true;
    res.arrived = state.current;
    return res;
  }
  const HouseGraph& house = *state.house;
  if (action.kind == ActionKind::View) {
    if (!house.adjacent(state.current, action.node))
      throw DomainError("execute_action: view target is not adjacent to the current node");
    res.path = {state.current, action.node};
    res.step_distance = distance(house.nodes[static_cast<size_t>(state.current)].location,
                                 house.nodes[static_cast<size_t>(action.node)].location);
  } else {
    std::vector<char> allowed(house.nodes.size(), 0);
    for (int v : state.walk) allowed[static_cast<size_t>(v)] = 1;
    PathResult pr = shortest_path_within(house, allowed, state.current, action.node);
    res.path = pr.path;
    res.step_distance = pr.length;
  }
  const bool fresh = !state.visited(action.node);
  for (size_t i = 1; i < res.path.size(); ++i) state.walk.push_back(res.path[i]);
  state.travelled += res.step_distance;
  if (res.path.size() >= 2) {
    const int from = res.path[res.path.size() - 2];
    state.current_arrival_heading = bearing(house.nodes[static_cast<size_t>(from)].location,
                                            house.nodes[static_cast<size_t>(action.node)].location);
  }
  state.current = action.node;
  state.step += 1;
  if (fresh) state.current_first_step = state.step;
  res.arrived = action.node;
  return res;
}

}  // namespace nav
