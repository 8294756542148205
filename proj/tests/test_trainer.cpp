#include <cmath>
#include <cstring>
#include <random>

#include <doctest.h>

#include "nav/pool.hpp"
#include "nav/trainer.hpp"
#include "oracles.hpp"

using namespace nav;

namespace {

// small end-to-end fixture: tiny houses, short episodes, small model
RunConfig tiny_cfg() {
  RunConfig cfg;
  cfg.env.num_nodes = 10;
  cfg.env.area_side = 12.0;
  cfg.env.connect_radius = 4.5;
  cfg.env.landmark_count = 6;
  cfg.env.min_separation = 1.6;
  cfg.env.slots_n = 10;
  cfg.env.feature_dim = 10;
  cfg.env.min_hops = 2;
  cfg.env.max_hops = 3;
  cfg.env.train_houses = 3;
  cfg.env.unseen_houses = 2;
  cfg.env.train_episodes = 48;
  cfg.env.val_seen_episodes = 8;
  cfg.env.val_unseen_episodes = 8;
  cfg.model.hidden = 24;
  cfg.model.layers = 1;
  cfg.model.heads = 4;
  cfg.model.grid_d = 3;
  cfg.model.grid_s = 4.0;
  cfg.model.t_max = 8;
  cfg.train.iterations = 8;
  cfg.train.batch = 4;
  cfg.train.eval_interval = 4;
  cfg.train.seed = 77;
  cfg.validate();
  return cfg;
}

RolloutOptions opts_for(const RunConfig& cfg, RolloutMode mode, std::uint64_t seed) {
  RolloutOptions o;
  o.mode = mode;
  o.weights = mode == RolloutMode::Teacher ? teacher_weights(cfg.train) : student_weights(cfg.train);
  o.gamma = cfg.train.gamma;
  o.success_bonus = cfg.train.success_bonus;
  o.value_coef = cfg.train.value_coef;
  o.success_radius = cfg.eval.success_radius;
  o.t_max = cfg.model.t_max;
  o.obs = cfg.observe_config();
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("returns_to_go: gamma=1 single step, and a 5-step forward-sum oracle") {
  CHECK(returns_to_go({3.5}, 1.0) == std::vector<double>{3.5});
  const std::vector<double> r{1.0, -2.0, 0.5, 4.0, -1.0};
  const double gamma = 0.9;
  auto g = returns_to_go(r, gamma);
  for (size_t t = 0; t < r.size(); ++t) {
    double want = 0.0;
    for (size_t k = t; k < r.size(); ++k) want += std::pow(gamma, static_cast<double>(k - t)) * r[k];
    CHECK(g[t] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("shaped_reward: progress, success bonus, failure penalty") {
  //   0 --4m-- 1 --4m-- 2(goal)
  HouseGraph h;
  h.nodes = {{0, {0, 0}, 0}, {1, {4, 0}, 1}, {2, {8, 0}, 2}};
  h.edges = {{0, 1}, {1, 2}};
  h.build_adjacency();
  const auto dist = geodesic_from(h, 2);
  CHECK(shaped_reward(dist, 0, 1, false, false, 2.0) == doctest::Approx(4.0));
  CHECK(shaped_reward(dist, 1, 0, false, false, 2.0) == doctest::Approx(-4.0));
  CHECK(shaped_reward(dist, 2, 2, true, true, 2.0) == 2.0);
  CHECK(shaped_reward(dist, 0, 0, true, false, 2.0) == -2.0);
}

TEST_CASE("policy_gradient_loss: decomposes into the log-pi and value terms") {
  Tape t;
  std::vector<double> rewards{1.0, -0.5, 2.0};
  const double gamma = 0.9, coef = 0.5;
  auto g = returns_to_go(rewards, gamma);

  std::vector<Tensor> nll, values;
  std::vector<double> nll_vals{0.7, 1.2, 0.3}, val_vals{0.2, -0.1, 1.5};
  for (int i = 0; i < 3; ++i) {
    // stand-ins with the right shapes; gradients are not the point here
    nll.push_back(t.scalar_leaf(nll_vals[static_cast<size_t>(i)]));
    values.push_back(t.leaf({1}, {val_vals[static_cast<size_t>(i)]}));
  }
  double want = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double adv = g[static_cast<size_t>(i)] - val_vals[static_cast<size_t>(i)];
    want += nll_vals[static_cast<size_t>(i)] * adv + coef * adv * adv;
  }
  Tensor loss = policy_gradient_loss(t, nll, values, rewards, gamma, coef);
  CHECK(loss.values()[0] == doctest::Approx(want).epsilon(1e-12));

  // all advantages zero -> only the (vanishing) value term remains
  std::vector<Tensor> exact;
  for (int i = 0; i < 3; ++i) exact.push_back(t.leaf({1}, {g[static_cast<size_t>(i)]}));
  CHECK(policy_gradient_loss(t, nll, exact, rewards, gamma, coef).values()[0] ==
        doctest::Approx(0.0));
}

TEST_CASE("total_loss: paper presets, zero weights, and non-finite components") {
  Tape t;
  LossTerms terms;
  terms.il = t.scalar_leaf(2.0);
  terms.t = t.scalar_leaf(3.0);
  CHECK(total_loss(t, terms, {0.2, 0.0, 0.0, 0.1}).values()[0] ==
        doctest::Approx(0.2 * 2.0 + 0.1 * 3.0).epsilon(1e-12));

  LossTerms student;
  student.rl = t.scalar_leaf(1.5);
  student.ht = t.scalar_leaf(0.5);
  student.t = t.scalar_leaf(3.0);
  CHECK(total_loss(t, student, {0.0, 1.0, 0.4, 0.1}).values()[0] ==
        doctest::Approx(1.0 * 1.5 + 0.4 * 0.5 + 0.1 * 3.0).epsilon(1e-12));

  CHECK(total_loss(t, terms, {0, 0, 0, 0}).values()[0] == 0.0);

  Tape loose;
  loose.finite_checks = false;
  LossTerms bad;
  bad.ht = loose.scalar_leaf(std::numeric_limits<double>::infinity());
  CHECK_THROWS_WITH_AS(total_loss(loose, bad, {0, 0, 1, 0}), doctest::Contains("ht"),
                       DivergenceError);
}

TEST_CASE("teacher rollout on a 1-hop episode: two decisions, L_IL adds both steps") {
  RunConfig cfg = tiny_cfg();
  HouseGraph h;
  h.nodes = {{0, {0, 0}, 2}, {1, {4, 0}, 4}};
  h.edges = {{0, 1}};
  h.build_adjacency();
  h.id = 0;
  Episode ep = sample_episode(h, {1, 1}, 3);
  ep.id = 0;
  ModelParams mp = ModelParams::init(cfg.model_dims(), 5);

  Tape tape;
  RolloutResult r = rollout(mp, tape, ep, opts_for(cfg, RolloutMode::Teacher, 9));
  REQUIRE(r.trace.steps.size() == 2);
  CHECK(r.trace.steps[0].action_kind == "view");
  CHECK(r.trace.steps[1].action_kind == "stop");
  CHECK(r.success);
  CHECK(r.final_error == 0.0);
  CHECK(r.il ==
        doctest::Approx(r.trace.steps[0].loss_il + r.trace.steps[1].loss_il).epsilon(1e-12));
  CHECK(r.il == doctest::Approx(-std::log(r.trace.steps[0].policy[static_cast<size_t>(
                    r.trace.steps[0].action_index)]) -
                std::log(r.trace.steps[1].policy[static_cast<size_t>(
                    r.trace.steps[1].action_index)]))
                    .epsilon(1e-9));
}

TEST_CASE("teacher rollouts reproduce the ground-truth path exactly (SR 1 by construction)") {
  RunConfig cfg = tiny_cfg();
  EnvPool pool = generate_pool(cfg, 11);
  ModelParams mp = ModelParams::init(cfg.model_dims(), 6);
  for (int i = 0; i < 30; ++i) {
    const Episode& ep = pool.train.episodes[static_cast<size_t>(i % pool.train.episodes.size())];
    Tape tape;
    RolloutResult r = rollout(mp, tape, ep, opts_for(cfg, RolloutMode::Teacher, 100 + static_cast<std::uint64_t>(i)));
    CHECK(r.success);
    CHECK(r.trace.visited == ep.gt_path);
    CHECK(r.trace.steps.back().action_kind == "stop");
    CHECK(!r.trace.steps.back().forced_stop);
  }
}

TEST_CASE("rollout: target loss matches -log P[gt cell] at every step, constant index") {
  RunConfig cfg = tiny_cfg();
  EnvPool pool = generate_pool(cfg, 12);
  ModelParams mp = ModelParams::init(cfg.model_dims(), 7);
  const Episode& ep = pool.train.episodes[0];
  TargetGridSpec grid = TargetGridSpec::make(cfg.model.grid_d, cfg.model.grid_s);
  const Vec2 start = ep.house->nodes[static_cast<size_t>(ep.start)].location;
  const Vec2 goal = ep.house->nodes[static_cast<size_t>(ep.goal)].location;
  const int gt_cell = target_cell_index(grid, goal - start);

  Tape tape;
  RolloutResult r = rollout(mp, tape, ep, opts_for(cfg, RolloutMode::Teacher, 13));
  double sum_t = 0.0;
  for (const auto& s : r.trace.steps) {
    REQUIRE(!s.target_dist.empty());
    CHECK(s.loss_t ==
          doctest::Approx(-std::log(s.target_dist[static_cast<size_t>(gt_cell)])).epsilon(1e-9));
    sum_t += s.loss_t;
  }
  CHECK(r.t == doctest::Approx(sum_t).epsilon(1e-9));
}

TEST_CASE("student rollout: distributions are proper, action space sizes match, losses build") {
  RunConfig cfg = tiny_cfg();
  EnvPool pool = generate_pool(cfg, 14);
  ModelParams mp = ModelParams::init(cfg.model_dims(), 8);
  for (int i = 0; i < 10; ++i) {
    Tape tape;
    const Episode& ep = pool.train.episodes[static_cast<size_t>(i)];
    RolloutResult r = rollout(mp, tape, ep, opts_for(cfg, RolloutMode::Student, 200 + static_cast<std::uint64_t>(i)));
    CHECK(r.has_loss);
    CHECK(std::isfinite(r.total_value));
    for (const auto& s : r.trace.steps) {
      if (s.forced_stop) continue;
      double sum = 0.0;
      for (double p : s.policy) sum += p;
      CHECK(std::fabs(sum - 1.0) <= 1e-6);
      double sum_p = 0.0;
      for (double p : s.target_dist) sum_p += p;
      CHECK(std::fabs(sum_p - 1.0) <= 1e-6);
      CHECK(static_cast<int>(s.policy.size()) == s.num_views + s.num_history + 1);
    }
    // backward works end to end
    tape.backward(r.total);
    tape.merge_param_grads(mp.store);
  }
  mp.store.zero_grads();
}

TEST_CASE("teacher preset leaves the value head untouched; alpha scaling is exactly linear") {
  RunConfig cfg = tiny_cfg();
  EnvPool pool = generate_pool(cfg, 15);
  ModelParams mp = ModelParams::init(cfg.model_dims(), 9);
  const Episode& ep = pool.train.episodes[0];

  auto grads_with = [&](LossWeights w) {
    mp.store.zero_grads();
    Tape tape;
    RolloutOptions o = opts_for(cfg, RolloutMode::Teacher, 33);
    o.weights = w;
    RolloutResult r = rollout(mp, tape, ep, o);
    tape.backward(r.total);
    tape.merge_param_grads(mp.store);
    std::vector<std::vector<double>> out;
    out.push_back(mp.store.at(mp.value_w).grad);
    out.push_back(mp.store.at(mp.policy_head.w1).grad);
    out.push_back(mp.store.at(mp.target_head.w1).grad);
    return out;
  };

  auto base = grads_with({0.2, 0.0, 0.0, 0.1});
  for (double g : base[0]) CHECK(g == 0.0);  // value head reached by no teacher-mode loss

  auto doubled_il = grads_with({0.4, 0.0, 0.0, 0.1});
  for (size_t i = 0; i < base[1].size(); ++i) CHECK(doubled_il[1][i] == 2.0 * base[1][i]);
  // target-head gradients are untouched by alpha1
  CHECK(doubled_il[2] == base[2]);

  auto doubled_t = grads_with({0.2, 0.0, 0.0, 0.2});
  for (size_t i = 0; i < base[2].size(); ++i) CHECK(doubled_t[2][i] == 2.0 * base[2][i]);
  mp.store.zero_grads();
}

TEST_CASE("train: loss log invariant, determinism, and resume continuity") {
  RunConfig cfg = tiny_cfg();
  cfg.train.lr_min = cfg.train.lr;  // constant rate so a shorter first leg shares the schedule
  EnvPool pool = generate_pool(cfg, 16);

  auto run = [&]() {
    ModelParams mp = ModelParams::init(cfg.model_dims(), cfg.train.seed);
    TrainResult tr = train(mp, cfg, {}, pool.train, pool.val_seen, pool.val_unseen, "");
    return std::pair{std::move(mp), std::move(tr)};
  };
  auto [mp1, tr1] = run();
  auto [mp2, tr2] = run();

  CHECK(!tr1.diverged);
  CHECK(tr1.iterations_done == cfg.train.iterations);
  REQUIRE(!tr1.logs.empty());
  for (const auto& lg : tr1.logs) CHECK(std::fabs(lg.total - lg.recomputed_total) <= 1e-9);
  CHECK(!tr1.evals.empty());

  // bitwise-identical parameters across reruns
  for (int pid = 0; pid < mp1.store.count(); ++pid) {
    const auto& a = mp1.store.at(pid).value;
    const auto& b = mp2.store.at(pid).value;
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }

  // resuming from iteration k matches the uninterrupted run bitwise
  RunConfig half = cfg;
  half.train.iterations = cfg.train.iterations / 2;
  ModelParams mph = ModelParams::init(half.model_dims(), cfg.train.seed);
  train(mph, half, {}, pool.train, pool.val_seen, pool.val_unseen, "");
  TrainResult rest = train(mph, cfg, {}, pool.train, pool.val_seen, pool.val_unseen, "",
                           half.train.iterations);
  CHECK(rest.iterations_done == cfg.train.iterations);
  REQUIRE(!rest.logs.empty());
  CHECK(rest.logs.front().iteration == half.train.iterations);
  for (int pid = 0; pid < mp1.store.count(); ++pid) {
    const auto& a = mp1.store.at(pid).value;
    const auto& b = mph.store.at(pid).value;
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("evaluate: oracle policy is perfect, random policy is not") {
  RunConfig cfg = tiny_cfg();
  EnvPool pool = generate_pool(cfg, 17);
  ModelParams mp = ModelParams::init(cfg.model_dims(), 10);

  EvalResult oracle = evaluate(mp, pool.val_unseen, cfg, {}, PolicySource::Oracle, 5, true);
  CHECK(oracle.metrics.sr == 1.0);
  CHECK(oracle.metrics.spl == doctest::Approx(1.0));
  for (const auto& tr : oracle.traces) CHECK(tr.stopped);

  EvalResult random = evaluate(mp, pool.val_unseen, cfg, {}, PolicySource::Random, 5, false);
  CHECK(random.metrics.sr < oracle.metrics.sr);
  CHECK(random.metrics.spl <= random.metrics.sr);
  CHECK(random.metrics.osr >= random.metrics.sr);
}

TEST_CASE("ablation flags change the rollout surface") {
  RunConfig cfg = tiny_cfg();
  EnvPool pool = generate_pool(cfg, 18);
  ModelParams mp = ModelParams::init(cfg.model_dims(), 11);
  const Episode& ep = pool.train.episodes[0];

  {
    Tape tape;
    RolloutOptions o = opts_for(cfg, RolloutMode::Teacher, 1);
    o.flags.no_ist = true;
    RolloutResult r = rollout(mp, tape, ep, o);
    CHECK(r.t == 0.0);
    for (const auto& s : r.trace.steps) CHECK(s.target_dist.empty());
  }
  {
    Tape tape;
    RolloutOptions o = opts_for(cfg, RolloutMode::Student, 2);
    o.flags.no_gas = true;
    RolloutResult r = rollout(mp, tape, ep, o);
    for (const auto& s : r.trace.steps) CHECK(s.action_kind != "history");
  }
}

TEST_CASE("1-hop smoke environment reaches SR 1.0 on the seen split within 500 iterations") {
  RunConfig cfg;
  cfg.env.num_nodes = 8;
  cfg.env.area_side = 10.0;
  cfg.env.connect_radius = 4.0;
  cfg.env.landmark_count = 8;
  cfg.env.min_separation = 1.6;
  cfg.env.slots_n = 10;
  cfg.env.feature_dim = 12;
  cfg.env.min_hops = 1;
  cfg.env.max_hops = 1;
  cfg.env.train_houses = 4;
  cfg.env.unseen_houses = 2;
  cfg.env.train_episodes = 64;
  cfg.env.val_seen_episodes = 24;
  cfg.env.val_unseen_episodes = 8;
  cfg.model.hidden = 32;
  cfg.model.layers = 1;
  cfg.model.heads = 4;
  cfg.model.grid_d = 3;
  cfg.model.grid_s = 4.0;
  cfg.model.t_max = 4;
  cfg.train.iterations = 500;
  cfg.train.batch = 8;
  cfg.train.eval_interval = 50;
  cfg.train.seed = 21;
  cfg.validate();
  EnvPool pool = generate_pool(cfg, 21);
  ModelParams mp = ModelParams::init(cfg.model_dims(), 21);
  TrainResult tr = train(mp, cfg, {}, pool.train, pool.val_seen, pool.val_unseen, "");
  REQUIRE(!tr.evals.empty());
  double best_seen = 0.0;
  for (const auto& ev : tr.evals) best_seen = std::max(best_seen, ev.seen.sr);
  CHECK(best_seen == 1.0);
}

TEST_CASE("divergent parameters abort training with the divergence path") {
  RunConfig cfg = tiny_cfg();
  cfg.train.iterations = 2;
  EnvPool pool = generate_pool(cfg, 19);
  ModelParams mp = ModelParams::init(cfg.model_dims(), 12);
  mp.store.at(mp.policy_head.w1).value[0] = std::numeric_limits<double>::infinity();
  TrainResult tr = train(mp, cfg, {}, pool.train, pool.val_seen, pool.val_unseen, "");
  CHECK(tr.diverged);
}
