#pragma once

#include <vector>

#include "nav/embedder.hpp"
#include "nav/env.hpp"
#include "nav/grid.hpp"
#include "nav/transformer.hpp"

namespace nav {

enum class ActionKind { View, History, Stop };

struct ActionBinding {
  ActionKind kind = ActionKind::Stop;
  int index_within_kind = 0;  // view slot index / history list index / 0
  int node = -1;              // bound node id
  Vec2 location;              // absolute coordinates of the bound node
};

const char* action_kind_name(ActionKind k);

// Episode-scoped agent state: the explored world plus the recurrent token
// carries. History entries cover distinct previously-occupied nodes in
// first-departure order, so the token list matches the action space exactly.
struct AgentState {
  const HouseGraph* house = nullptr;
  int current = -1;
  Vec2 start_loc;
  int step = 1;  // decision step, 1-based

  std::vector<int> walk;  // full node sequence including the current node
  std::vector<int> history_nodes;
  std::vector<Tensor> history_tokens;  // aligned with history_nodes
  Tensor global_tok;                   // [H]
  Tensor target_toks;                  // [q x H]; invalid when IST is off
  double travelled = 0.0;

  // bookkeeping for the current node's eventual history token
  double current_arrival_heading = 0.0;
  int current_first_step = 1;

  static AgentState start(const HouseGraph& house, int start_node);
  bool visited(int node) const;
  Vec2 rel(Vec2 abs) const { return abs - start_loc; }
  Vec2 rel_of(int node) const { return house->nodes[node].location - start_loc; }
};

// k view actions, then one action per history node, then stop. With no_gas
// the history block is omitted.
std::vector<ActionBinding> build_action_space(const AgentState& state, const Panorama& pano,
                                              bool no_gas);

// Adjacency over the history nodes within the explored graph (visited nodes,
// observed navigability). Symmetric by construction.
AdjacencyMatrix update_topology(const AgentState& state);

// pi = softmax(MLP(token_a ⊙ g)) over the action space. The stop token is a
// learned embedding plus f_P(current location).
Tensor score_actions(Embedder& emb, const std::vector<ActionBinding>& bindings,
                     const StepResult& out, const AgentState& state);

// P = softmax(MLP(c_i ⊙ g)) over the q grid cells, separate head weights.
Tensor predict_target(Embedder& emb, const StepResult& out);

struct ExecResult {
  bool stopped = false;
  int arrived = -1;
  double step_distance = 0.0;
  std::vector<int> path;  // nodes traversed, including endpoints (moves only)
};

// view: one edge; history: shortest path inside the explored graph, billed in
// full; stop: terminal. Updates walk/travelled/current and the history list
// bookkeeping for the departed node (token append is the caller's job, since
// it needs the embedder).
ExecResult execute_action(AgentState& state, const ActionBinding& action);

// Shortest path restricted to an allowed node set (the explored graph).
PathResult shortest_path_within(const HouseGraph& house, const std::vector<char>& allowed, int a,
                                int b);

}  // namespace nav
