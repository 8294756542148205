#include "nav/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "nav/checkpoint.hpp"

namespace nav {

using nlohmann::json;

namespace {

Tensor sum_terms(std::vector<Tensor>& terms) {
  Tensor acc = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

int argmax_index(const std::vector<double>& v) {
  int best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<size_t>(best)]) best = static_cast<int>(i);
  return best;
}

int sample_index(const std::vector<double>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (r < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

std::vector<double> returns_to_go(const std::vector<double>& rewards, double gamma) {
  std::vector<double> g(rewards.size(), 0.0);
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

double shaped_reward(const std::vector<double>& dist_to_goal, int prev_node, int new_node,
                     bool terminal, bool success, double success_bonus) {
  if (terminal) return success ? success_bonus : -success_bonus;
  return dist_to_goal[static_cast<size_t>(prev_node)] - dist_to_goal[static_cast<size_t>(new_node)];
}

Tensor policy_gradient_loss(Tape& tape, const std::vector<Tensor>& nll_steps,
                            const std::vector<Tensor>& values, const std::vector<double>& rewards,
                            double gamma, double value_coef) {
  if (nll_steps.size() != values.size() || nll_steps.size() != rewards.size())
    throw ShapeError("policy_gradient_loss: step vectors have different lengths");
  const auto g = returns_to_go(rewards, gamma);
  Tensor acc = tape.scalar_leaf(0.0);
  for (size_t i = 0; i < nll_steps.size(); ++i) {
    const double advantage = g[i] - values[i].values()[0];
    acc = add(acc, scale(nll_steps[i], advantage));
    Tensor diff = sub(tape.leaf({1}, {g[i]}), values[i]);
    acc = add(acc, scale(sum(mul(diff, diff)), value_coef));
  }
  return acc;
}

Tensor total_loss(Tape& tape, const LossTerms& terms, const LossWeights& w) {
  auto check = [](const std::optional<Tensor>& t, const char* name) {
    if (t && !std::isfinite(t->values()[0]))
      throw DivergenceError(std::string("total_loss: component ") + name + " is not finite");
  };
  check(terms.il, "il");
  check(terms.rl, "rl");
  check(terms.ht, "ht");
  check(terms.t, "t");
  Tensor acc = tape.scalar_leaf(0.0);
  if (terms.il) acc = add(acc, scale(*terms.il, w.il));
  if (terms.rl) acc = add(acc, scale(*terms.rl, w.rl));
  if (terms.ht) acc = add(acc, scale(*terms.ht, w.ht));
  if (terms.t) acc = add(acc, scale(*terms.t, w.t));
  return acc;
}

RolloutResult rollout(ModelParams& mp, Tape& tape, const Episode& episode,
                      const RolloutOptions& opt) {
  const HouseGraph& house = *episode.house;
  const bool use_ist = !opt.flags.no_ist && mp.dims.grid_d > 0;
  Embedder emb(mp, tape, opt.flags);
  std::mt19937_64 rng(opt.seed);
  const auto dist_goal = geodesic_from(house, episode.goal);
  const Vec2 goal_loc = house.nodes[static_cast<size_t>(episode.goal)].location;

  TargetGridSpec grid;
  if (use_ist) grid = TargetGridSpec::make(mp.dims.grid_d, mp.dims.grid_s);

  AgentState state = AgentState::start(house, episode.start);
  InstructionEncoding instr = emb.encode_instruction(episode.instruction);
  state.global_tok = emb.global_init(instr.sentence);
  if (use_ist) state.target_toks = emb.target_tokens_init(grid, instr.sentence);
  const int gt_cell = use_ist ? target_cell_index(grid, state.rel(goal_loc)) : -1;

  std::vector<Tensor> il_terms, ht_terms, t_terms, rl_nll, rl_values;
  std::vector<double> rewards;

  RolloutResult res;
  res.trace.episode_id = episode.id;

  bool stopped = false;
  for (int t = 1; t <= opt.t_max && !stopped; ++t) {
    Panorama pano = observe(house, state.current, opt.obs, rng);
    std::vector<Vec2> slot_rel(pano.slots.size());
    for (size_t i = 0; i < pano.slots.size(); ++i) {
      const int nb = pano.slots[i].navigable_to;
      slot_rel[i] = (nb >= 0) ? state.rel_of(nb) : state.rel_of(state.current);
    }
    Tensor views = emb.embed_views(pano, slot_rel);

    AdjacencyMatrix adjacency = update_topology(state);
    StepCarry carry;
    carry.global = state.global_tok;
    carry.q = use_ist ? grid.q() : 0;
    if (use_ist) carry.targets = state.target_toks;
    carry.hist = static_cast<int>(state.history_nodes.size());
    if (carry.hist > 0) carry.histories = concat_rows(state.history_tokens);

    StepResult sout =
        forward_step(mp, tape, carry, instr.tokens, views, adjacency, opt.flags, opt.capture);

    std::vector<ActionBinding> bindings = build_action_space(state, pano, opt.flags.no_gas);
    Tensor pi = score_actions(emb, bindings, sout, state);
    Tensor target_probs;
    int argmax_cell = -1;
    if (use_ist) {
      target_probs = predict_target(emb, sout);
      argmax_cell = argmax_index(target_probs.values());
    }

    int teach = -1;
    if (opt.mode == RolloutMode::Teacher || opt.mode == RolloutMode::Student ||
        opt.source == PolicySource::Oracle)
      teach = teacher_action(episode, bindings, dist_goal, state.current);

    int choice = -1;
    switch (opt.mode) {
      case RolloutMode::Teacher:
        choice = teach;
        break;
      case RolloutMode::Student:
        choice = sample_index(pi.values(), rng);
        break;
      case RolloutMode::Greedy:
        if (opt.source == PolicySource::Oracle) choice = teach;
        else if (opt.source == PolicySource::Random)
          choice = static_cast<int>(
              std::uniform_int_distribution<size_t>(0, bindings.size() - 1)(rng));
        else choice = argmax_index(pi.values());
        break;
    }

    StepRecord rec;
    rec.step = t;
    rec.num_views = pano.k;
    rec.num_history = opt.flags.no_gas ? 0 : static_cast<int>(state.history_nodes.size());
    if (opt.mode == RolloutMode::Teacher) {
      Tensor nll = nll_from_distribution(pi, teach);
      rec.loss_il = nll.values()[0];
      il_terms.push_back(nll);
    } else if (opt.mode == RolloutMode::Student) {
      rl_nll.push_back(nll_from_distribution(pi, choice));
      // the baseline regresses on g without shaping the trunk
      Tensor value = add(matmul(detach(sout.global), tape.param(mp.store, mp.value_w)),
                         tape.param(mp.store, mp.value_b));
      rl_values.push_back(value);
      Tensor nll_ht = nll_from_distribution(pi, teach);
      rec.loss_ht = nll_ht.values()[0];
      ht_terms.push_back(nll_ht);
    }
    if (use_ist && opt.mode != RolloutMode::Greedy) {
      Tensor nll_t = nll_from_distribution(target_probs, gt_cell);
      rec.loss_t = nll_t.values()[0];
      t_terms.push_back(nll_t);
    }

    const ActionBinding& act = bindings[static_cast<size_t>(choice)];
    // the departing node's fresh token (Eq.-1 style) joins the carry
    if (act.kind != ActionKind::Stop &&
        std::find(state.history_nodes.begin(), state.history_nodes.end(), state.current) ==
            state.history_nodes.end()) {
      Tensor htok = emb.history_token(pano, state.current_arrival_heading, 0.0,
                                      state.current_first_step, state.rel_of(state.current));
      state.history_nodes.push_back(state.current);
      state.history_tokens.push_back(htok);
    }
    const int prev = state.current;
    ExecResult ex = execute_action(state, act);
    stopped = ex.stopped;

    if (opt.mode == RolloutMode::Student) {
      const bool succ =
          ex.stopped && dist_goal[static_cast<size_t>(state.current)] <= opt.success_radius;
      rewards.push_back(
          shaped_reward(dist_goal, prev, state.current, ex.stopped, succ, opt.success_bonus));
    }

    // refined outputs become next step's carried inputs
    state.global_tok = sout.global;
    if (use_ist) state.target_toks = sout.targets;
    for (int j = 0; j < carry.hist; ++j) state.history_tokens[static_cast<size_t>(j)] = row(sout.histories, j);

    if (!stopped && mp.dims.bptt_horizon > 0 && t % mp.dims.bptt_horizon == 0) {
      state.global_tok = detach(state.global_tok);
      if (use_ist) state.target_toks = detach(state.target_toks);
      for (auto& h : state.history_tokens) h = detach(h);
    }

    rec.action_kind = action_kind_name(act.kind);
    rec.action_index = choice;
    rec.node = state.current;
    rec.location = house.nodes[static_cast<size_t>(state.current)].location;
    rec.path_nodes = ex.path;
    rec.policy = pi.values();
    if (use_ist) {
      rec.target_dist = target_probs.values();
      rec.target_argmax_center = state.start_loc + grid.centers[static_cast<size_t>(argmax_cell)];
      rec.dc = distance(rec.target_argmax_center, goal_loc);
    }
    rec.travelled = state.travelled;
    rec.stop = ex.stopped;
    res.trace.steps.push_back(rec);
  }

  if (!stopped) {
    // episode cap reached: force a terminal stop at the current node
    if (opt.mode == RolloutMode::Student && !rewards.empty()) {
      const bool succ = dist_goal[static_cast<size_t>(state.current)] <= opt.success_radius;
      rewards.back() += succ ? opt.success_bonus : -opt.success_bonus;
    }
    StepRecord rec;
    rec.step = static_cast<int>(res.trace.steps.size()) + 1;
    rec.action_kind = "stop";
    rec.action_index = -1;
    rec.node = state.current;
    rec.location = house.nodes[static_cast<size_t>(state.current)].location;
    rec.travelled = state.travelled;
    rec.stop = true;
    rec.forced_stop = true;
    res.trace.steps.push_back(rec);
  }
  res.trace.visited = state.walk;
  res.trace.stopped = true;
  res.final_error = dist_goal[static_cast<size_t>(state.current)];
  res.success = res.final_error <= opt.success_radius;

  if (opt.mode == RolloutMode::Teacher) {
    res.terms.il = sum_terms(il_terms);
    if (!t_terms.empty()) res.terms.t = sum_terms(t_terms);
  } else if (opt.mode == RolloutMode::Student) {
    res.terms.rl =
        policy_gradient_loss(tape, rl_nll, rl_values, rewards, opt.gamma, opt.value_coef);
    res.terms.ht = sum_terms(ht_terms);
    if (!t_terms.empty()) res.terms.t = sum_terms(t_terms);
  }
  if (opt.mode != RolloutMode::Greedy) {
    res.total = total_loss(tape, res.terms, opt.weights);
    res.has_loss = true;
    res.il = res.terms.il ? res.terms.il->values()[0] : 0.0;
    res.rl = res.terms.rl ? res.terms.rl->values()[0] : 0.0;
    res.ht = res.terms.ht ? res.terms.ht->values()[0] : 0.0;
    res.t = res.terms.t ? res.terms.t->values()[0] : 0.0;
    res.total_value = res.total.values()[0];
  }
  return res;
}

EvalResult evaluate(ModelParams& mp, const EnvSplit& split, const RunConfig& cfg,
                    const AblationFlags& flags, PolicySource source, std::uint64_t seed,
                    bool keep_traces) {
  const int n = static_cast<int>(split.episodes.size());
  std::vector<EpisodeTrace> traces(static_cast<size_t>(n));
  std::string error_msg;
#pragma omp parallel for num_threads(cfg.train.threads) schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      Tape tape;
      RolloutOptions opt;
      opt.mode = RolloutMode::Greedy;
      opt.source = source;
      opt.flags = flags;
      opt.success_radius = cfg.eval.success_radius;
      opt.t_max = cfg.model.t_max;
      opt.obs = cfg.observe_config();
      opt.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
      RolloutResult r = rollout(mp, tape, split.episodes[static_cast<size_t>(i)], opt);
      traces[static_cast<size_t>(i)] = std::move(r.trace);
    } catch (const std::exception& ex) {
#pragma omp critical
      error_msg = ex.what();
    }
  }
  if (!error_msg.empty()) throw DomainError("evaluate: " + error_msg);

  EvalResult out;
  out.metrics = compute_metrics(split.episodes, traces, cfg.eval.success_radius);

  const std::array<double, 4> fracs{0.25, 0.5, 0.75, 1.0};
  std::array<double, 4> sums{0, 0, 0, 0};
  int counted = 0;
  int lt3 = 0, mid = 0, ge6 = 0;
  for (const auto& tr : traces) {
    std::vector<double> dcs;
    for (const auto& s : tr.steps)
      if (!s.target_dist.empty()) dcs.push_back(s.dc);
    if (dcs.empty()) continue;
    ++counted;
    const int S = static_cast<int>(dcs.size());
    for (size_t f = 0; f < fracs.size(); ++f) {
      int idx = static_cast<int>(std::ceil(fracs[f] * S));
      idx = std::clamp(idx, 1, S);
      sums[f] += dcs[static_cast<size_t>(idx - 1)];
    }
    const int mid_idx = std::clamp(static_cast<int>(std::ceil(0.5 * S)), 1, S);
    const double d50 = dcs[static_cast<size_t>(mid_idx - 1)];
    if (d50 < 3.0) ++lt3;
    else if (d50 < 6.0) ++mid;
    else ++ge6;
  }
  out.dc.episodes = counted;
  if (counted > 0) {
    for (size_t f = 0; f < fracs.size(); ++f) out.dc.mean_at_frac[f] = sums[f] / counted;
    out.dc.bin_lt3 = static_cast<double>(lt3) / counted;
    out.dc.bin_3to6 = static_cast<double>(mid) / counted;
    out.dc.bin_ge6 = static_cast<double>(ge6) / counted;
  }
  if (keep_traces) out.traces = std::move(traces);
  return out;
}

namespace {

json metrics_json(const MetricsReport& m) {
  return {{"sr", m.sr}, {"spl", m.spl}, {"osr", m.osr}, {"ne", m.ne}};
}

json dc_json(const DcReport& d) {
  return {{"mean_at_25", d.mean_at_frac[0]},
          {"mean_at_50", d.mean_at_frac[1]},
          {"mean_at_75", d.mean_at_frac[2]},
          {"mean_at_100", d.mean_at_frac[3]},
          {"bin_lt3", d.bin_lt3},
          {"bin_3to6", d.bin_3to6},
          {"bin_ge6", d.bin_ge6},
          {"episodes", d.episodes}};
}

}  // namespace

TrainResult train(ModelParams& mp, const RunConfig& cfg, const AblationFlags& flags,
                  const EnvSplit& train_split, const EnvSplit& val_seen,
                  const EnvSplit& val_unseen, const std::string& out_dir, int start_iteration) {
  TrainResult result;
  const int batch = cfg.train.batch;
  const int N = static_cast<int>(train_split.episodes.size());
  if (N == 0) throw DomainError("train: empty training split");

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir + "/train_log.jsonl", std::ios::app);
    if (!log) throw IoError("cannot open train log in " + out_dir);
  }
  auto write_checkpoint = [&](int iteration) {
    if (out_dir.empty()) return;
    CheckpointMeta meta{cfg, flags, iteration, cfg.train.seed};
    save_checkpoint(out_dir + "/ckpt_latest.tdsp", mp, meta);
  };

  // per-epoch shuffled episode order, derived statelessly from the seed
  int cached_epoch = -1;
  std::vector<int> perm(static_cast<size_t>(N));
  auto episode_for = [&](std::int64_t flat) -> const Episode& {
    const int epoch = static_cast<int>(flat / N);
    const int pos = static_cast<int>(flat % N);
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), 0);
      std::mt19937_64 erng(mix_seed(cfg.train.seed, 0xE70C000ULL + static_cast<std::uint64_t>(epoch)));
      std::shuffle(perm.begin(), perm.end(), erng);
      cached_epoch = epoch;
    }
    return train_split.episodes[static_cast<size_t>(perm[static_cast<size_t>(pos)])];
  };

  for (int it = start_iteration; it < cfg.train.iterations; ++it) {
    const bool teacher = (it % 2 == 0);
    const RolloutMode mode = teacher ? RolloutMode::Teacher : RolloutMode::Student;
    const LossWeights w = teacher ? teacher_weights(cfg.train) : student_weights(cfg.train);

    std::vector<const Episode*> eps(static_cast<size_t>(batch));
    for (int slot = 0; slot < batch; ++slot)
      eps[static_cast<size_t>(slot)] =
          &episode_for(static_cast<std::int64_t>(it) * batch + slot);

    std::vector<Tape> tapes(static_cast<size_t>(batch));
    std::vector<double> il(static_cast<size_t>(batch), 0.0), rl(static_cast<size_t>(batch), 0.0),
        ht(static_cast<size_t>(batch), 0.0), lt(static_cast<size_t>(batch), 0.0),
        tot(static_cast<size_t>(batch), 0.0);
    bool diverged = false;
    bool failed = false;
    std::string msg;
#pragma omp parallel for num_threads(cfg.train.threads) schedule(static)
    for (int slot = 0; slot < batch; ++slot) {
      try {
        RolloutOptions opt;
        opt.mode = mode;
        opt.flags = flags;
        opt.weights = w;
        opt.gamma = cfg.train.gamma;
        opt.success_bonus = cfg.train.success_bonus;
        opt.value_coef = cfg.train.value_coef;
        opt.success_radius = cfg.eval.success_radius;
        opt.t_max = cfg.model.t_max;
        opt.obs = cfg.observe_config();
        opt.seed = mix_seed(cfg.train.seed,
                            static_cast<std::uint64_t>(it) * 1000003ULL + static_cast<std::uint64_t>(slot));
        Tape& tape = tapes[static_cast<size_t>(slot)];
        RolloutResult r = rollout(mp, tape, *eps[static_cast<size_t>(slot)], opt);
        tape.backward(scale(r.total, 1.0 / batch));
        il[static_cast<size_t>(slot)] = r.il;
        rl[static_cast<size_t>(slot)] = r.rl;
        ht[static_cast<size_t>(slot)] = r.ht;
        lt[static_cast<size_t>(slot)] = r.t;
        tot[static_cast<size_t>(slot)] = r.total_value;
      } catch (const DivergenceError& ex) {
#pragma omp critical
        {
          diverged = true;
          msg = ex.what();
        }
      } catch (const std::exception& ex) {
#pragma omp critical
        {
          failed = true;
          msg = ex.what();
        }
      }
    }
    if (failed && !diverged) throw DomainError("train: " + msg);
    if (!diverged) {
      for (auto& tape : tapes) tape.merge_param_grads(mp.store);
      mp.store.clip_grad_norm(cfg.train.clip_norm);
      const double frac = cfg.train.iterations <= 1
                              ? 1.0
                              : static_cast<double>(it) / (cfg.train.iterations - 1);
      const double lr = cfg.train.lr + (cfg.train.lr_min - cfg.train.lr) * frac;
      try {
        mp.store.adam_step(lr);
      } catch (const DivergenceError& ex) {
        diverged = true;
        msg = ex.what();
      }
      mp.store.zero_grads();
    }
    if (diverged) {
      // abort, retaining the last good checkpoint on disk
      if (log) {
        log << json{{"type", "abort"}, {"iteration", it}, {"error", msg}}.dump() << "\n";
        log.flush();
      }
      result.diverged = true;
      result.iterations_done = it;
      return result;
    }

    auto mean = [&](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    IterationLog lg;
    lg.iteration = it;
    lg.mode = teacher ? "teacher" : "student";
    lg.il = mean(il);
    lg.rl = mean(rl);
    lg.ht = mean(ht);
    lg.t = mean(lt);
    lg.total = mean(tot);
    lg.recomputed_total = w.il * lg.il + w.rl * lg.rl + w.ht * lg.ht + w.t * lg.t;
    result.logs.push_back(lg);
    if (log) {
      log << json{{"type", "iteration"}, {"iteration", it},     {"mode", lg.mode},
                  {"loss_il", lg.il},    {"loss_rl", lg.rl},    {"loss_ht", lg.ht},
                  {"loss_t", lg.t},      {"loss_total", lg.total}}
                 .dump()
          << "\n";
    }

    const bool do_eval =
        ((it + 1) % cfg.train.eval_interval == 0) || (it + 1 == cfg.train.iterations);
    if (do_eval) {
      EvalPoint pt;
      pt.iteration = it + 1;
      auto seen = evaluate(mp, val_seen, cfg, flags, PolicySource::Model,
                           mix_seed(cfg.train.seed, 0x5EE7000ULL + static_cast<std::uint64_t>(it)), false);
      auto unseen = evaluate(mp, val_unseen, cfg, flags, PolicySource::Model,
                             mix_seed(cfg.train.seed, 0x075EE7000ULL + static_cast<std::uint64_t>(it)), false);
      pt.seen = seen.metrics;
      pt.unseen = unseen.metrics;
      pt.dc_unseen = unseen.dc;
      result.evals.push_back(pt);
      if (log) {
        log << json{{"type", "eval"},
                    {"iteration", it + 1},
                    {"seen", metrics_json(pt.seen)},
                    {"unseen", metrics_json(pt.unseen)},
                    {"dc_unseen", dc_json(pt.dc_unseen)}}
                   .dump()
            << "\n";
        log.flush();
      }
      write_checkpoint(it + 1);
    }
  }
  result.iterations_done = cfg.train.iterations;
  if (result.evals.empty() && cfg.train.iterations == start_iteration) write_checkpoint(start_iteration);
  return result;
}

}  // namespace nav
