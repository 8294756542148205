// Acceptance suite: one line per criterion, nonzero exit on any failure.
// The learnability / ablation / target-error criteria share nine trained
// models (three variants x three seeds) on the default synthetic task.

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "nav/checkpoint.hpp"
#include "nav/kernels.hpp"
#include "nav/pool.hpp"
#include "nav/trainer.hpp"
#include "oracles.hpp"

using namespace nav;

namespace {

int g_failures = 0;
int g_threads = 2;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s  (%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double cpu_seconds() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<double>(ru.ru_utime.tv_sec) + 1e-6 * static_cast<double>(ru.ru_utime.tv_usec) +
         static_cast<double>(ru.ru_stime.tv_sec) + 1e-6 * static_cast<double>(ru.ru_stime.tv_usec);
}

double wall_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> randv(std::mt19937_64& rng, size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// The default synthetic task with the test-speed observation setting and the
// evaluation cadence criterion 7 needs (an eval point at 10% of training).
RunConfig task_config() {
  RunConfig cfg;
  cfg.env.slots_n = 12;
  cfg.model.t_max = 10;
  cfg.train.iterations = 1600;
  cfg.train.eval_interval = 160;
  cfg.train.threads = g_threads;
  cfg.validate();
  return cfg;
}

RunConfig small_config() {
  RunConfig cfg;
  cfg.env.num_nodes = 12;
  cfg.env.area_side = 13.0;
  cfg.env.connect_radius = 4.2;
  cfg.env.landmark_count = 8;
  cfg.env.min_separation = 1.6;
  cfg.env.slots_n = 10;
  cfg.env.feature_dim = 12;
  cfg.env.min_hops = 2;
  cfg.env.max_hops = 4;
  cfg.env.train_houses = 8;
  cfg.env.unseen_houses = 4;
  cfg.env.train_episodes = 128;
  cfg.env.val_seen_episodes = 16;
  cfg.env.val_unseen_episodes = 16;
  cfg.model.hidden = 24;
  cfg.model.layers = 1;
  cfg.model.heads = 4;
  cfg.model.grid_d = 3;
  cfg.model.grid_s = 4.0;
  cfg.model.t_max = 8;
  cfg.train.batch = 4;
  cfg.train.threads = 1;
  cfg.validate();
  return cfg;
}

RolloutOptions rollout_opts(const RunConfig& cfg, RolloutMode mode, std::uint64_t seed) {
  RolloutOptions o;
  o.mode = mode;
  o.weights =
      mode == RolloutMode::Teacher ? teacher_weights(cfg.train) : student_weights(cfg.train);
  o.gamma = cfg.train.gamma;
  o.success_bonus = cfg.train.success_bonus;
  o.value_coef = cfg.train.value_coef;
  o.success_radius = cfg.eval.success_radius;
  o.t_max = cfg.model.t_max;
  o.obs = cfg.observe_config();
  o.seed = seed;
  return o;
}

// ---- criterion 1: autodiff correctness --------------------------------------

bool fd_weighted_graph(std::mt19937_64& rng, std::string* why) {
  // random shapes through matmul -> gelu -> layer_norm -> masked_softmax
  const int m = 1 + static_cast<int>(rng() % 5);
  const int k = 1 + static_cast<int>(rng() % 6);
  const int n = 2 + static_cast<int>(rng() % 5);
  const auto av = randv(rng, static_cast<size_t>(m) * k);
  const auto bv = randv(rng, static_cast<size_t>(k) * n);
  const auto gv = randv(rng, static_cast<size_t>(n), 0.5, 1.5);
  const auto biasv = randv(rng, static_cast<size_t>(n));
  const auto wv = randv(rng, static_cast<size_t>(m) * n);
  Mask mask = Mask::all_true(m, n);
  if (n > 1)
    for (int r = 0; r < m; ++r) mask.at(r, static_cast<int>(rng() % static_cast<unsigned>(n))) = 0;
  for (int r = 0; r < m; ++r) mask.at(r, 0) = 1;

  auto build = [&](const std::vector<double>& x, Tape& t, Tensor& a, Tensor& b) {
    a = t.leaf({m, k}, {x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m) * k}, true);
    b = t.leaf({k, n}, {x.begin() + static_cast<std::ptrdiff_t>(m) * k, x.end()}, true);
    Tensor h = gelu(matmul(a, b));
    Tensor ln = layer_norm(h, t.leaf({n}, gv), t.leaf({n}, biasv));
    Tensor sm = masked_softmax(ln, mask);
    return sum(mul(sm, t.leaf({m, n}, wv)));
  };
  std::vector<double> x0 = av;
  x0.insert(x0.end(), bv.begin(), bv.end());
  Tape t;
  Tensor a, b;
  Tensor loss = build(x0, t, a, b);
  t.backward(loss);
  std::vector<double> analytic = a.grad();
  analytic.insert(analytic.end(), b.grad().begin(), b.grad().end());
  return oracles::fd_gradient_check(
      [&](const std::vector<double>& x) {
        Tape tt;
        Tensor aa, bb;
        return build(x, tt, aa, bb).values()[0];
      },
      x0, analytic, 1e-4, 1e-5, why);
}

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(4101);
  std::string why;
  bool ok = true;
  int shapes = 0;
  for (int trial = 0; trial < 24 && ok; ++trial) {
    ok = fd_weighted_graph(rng, &why);
    ++shapes;
  }

  // end-to-end gradient of a one-step episode against finite differences
  RunConfig cfg = small_config();
  cfg.model.t_max = 1;  // a single decision, then the episode cap
  EnvPool pool = generate_pool(cfg, 41);
  ModelParams mp = ModelParams::init(cfg.model_dims(), 42);
  // jitter every parameter to a generic point: zero-initialized biases would
  // put some layer norms at their zero-variance kink, where central
  // differences are meaningless
  {
    std::mt19937_64 jrng(4103);
    std::normal_distribution<double> jn(0.0, 0.03);
    for (int pid = 0; pid < mp.store.count(); ++pid)
      for (auto& v : mp.store.at(pid).value) v += jn(jrng);
  }
  const Episode& ep = pool.train.episodes[0];
  auto loss_value = [&]() {
    Tape tape;
    RolloutResult r = rollout(mp, tape, ep, rollout_opts(cfg, RolloutMode::Teacher, 7));
    return r.total.values()[0];
  };
  mp.store.zero_grads();
  {
    Tape tape;
    RolloutResult r = rollout(mp, tape, ep, rollout_opts(cfg, RolloutMode::Teacher, 7));
    tape.backward(r.total);
    tape.merge_param_grads(mp.store);
  }
  std::mt19937_64 pick(4102);
  int checked = 0;
  for (int c = 0; c < 40 && ok; ++c) {
    const int pid = static_cast<int>(pick() % static_cast<unsigned>(mp.store.count()));
    auto& p = mp.store.at(pid);
    const size_t idx = pick() % p.value.size();
    const double keep = p.value[idx];
    const double h = 1e-5;
    p.value[idx] = keep + h;
    const double fp = loss_value();
    p.value[idx] = keep - h;
    const double fm = loss_value();
    p.value[idx] = keep;
    const double numeric = (fp - fm) / (2 * h);
    const double analytic = p.grad[idx];
    const double scale = std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
    if (std::fabs(numeric - analytic) > 1e-4 * scale) {
      ok = false;
      why = "end-to-end grad of " + p.name + "[" + std::to_string(idx) + "] " +
            std::to_string(analytic) + " vs " + std::to_string(numeric);
    }
    ++checked;
  }
  const double secs = wall_seconds(t0);
  if (secs >= 60.0) ok = false;
  char detail[160];
  std::snprintf(detail, sizeof detail, "%d op shapes + %d end-to-end components, %.1fs%s%s",
                shapes, checked, secs, ok ? "" : "; ", ok ? "" : why.c_str());
  report(1, "autodiff matches central finite differences", ok, detail);
}

// ---- criterion 2: exact mask enforcement ------------------------------------

void criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelDims d;
  d.hidden = 32;
  d.layers = 2;
  d.heads = 4;
  d.grid_d = 3;
  d.grid_s = 2.0;
  d.t_max = 10;
  d.vocab = 8;
  d.feature_dim = 8;
  d.max_instr_len = 8;
  ModelParams mp = ModelParams::init(d, 4201);
  std::mt19937_64 rng(4202);
  bool ok = true;
  std::string why;
  int graphs = 0;

  for (int trial = 0; trial < 100 && ok; ++trial, ++graphs) {
    const int hist = 2 + static_cast<int>(rng() % 7);
    const int m = 2 + static_cast<int>(rng() % 4);
    const int nv = 2 + static_cast<int>(rng() % 4);
    const int q = 9;
    AdjacencyMatrix e = AdjacencyMatrix::make(hist);
    std::bernoulli_distribution coin(0.45);
    for (int i = 0; i < hist; ++i)
      for (int j = i + 1; j < hist; ++j) e.at(i, j) = e.at(j, i) = coin(rng) ? 1 : 0;

    Tape t;
    StepCarry carry;
    carry.global = t.leaf({d.hidden}, randv(rng, static_cast<size_t>(d.hidden)));
    carry.q = q;
    carry.targets = t.leaf({q, d.hidden}, randv(rng, static_cast<size_t>(q) * d.hidden));
    carry.hist = hist;
    carry.histories = t.leaf({hist, d.hidden}, randv(rng, static_cast<size_t>(hist) * d.hidden));
    Tensor instr = t.leaf({m, d.hidden}, randv(rng, static_cast<size_t>(m) * d.hidden));
    Tensor views = t.leaf({nv, d.hidden}, randv(rng, static_cast<size_t>(nv) * d.hidden));
    AttnCapture cap;
    forward_step(mp, t, carry, instr, views, e, {}, &cap);
    const TokenLayout layout{m, q, hist, nv};
    const int off = layout.hist_off();
    const int N = layout.total();
    for (int l = 0; l < d.layers && ok; ++l)
      for (int h = 0; h < d.heads && ok; ++h) {
        const auto& w = cap.at(l, h);
        for (int i = 0; i < hist && ok; ++i)
          for (int j = 0; j < hist && ok; ++j)
            if (i != j && !e.at(i, j) &&
                w[static_cast<size_t>(off + i) * N + (off + j)] != 0.0) {
              ok = false;
              why = "nonzero masked weight at graph " + std::to_string(trial);
            }
      }
  }

  // permutation consistency on a subset
  for (int trial = 0; trial < 20 && ok; ++trial) {
    const int hist = 3 + static_cast<int>(rng() % 4);
    AdjacencyMatrix e = AdjacencyMatrix::make(hist);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < hist; ++i)
      for (int j = i + 1; j < hist; ++j) e.at(i, j) = e.at(j, i) = coin(rng) ? 1 : 0;
    std::vector<int> perm(static_cast<size_t>(hist));
    for (int i = 0; i < hist; ++i) perm[static_cast<size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);

    const auto hv = randv(rng, static_cast<size_t>(hist) * d.hidden);
    const auto gv = randv(rng, static_cast<size_t>(d.hidden));
    const auto iv = randv(rng, 2u * d.hidden);
    const auto vv = randv(rng, 2u * d.hidden);
    auto run = [&](bool permuted) {
      Tape t;
      StepCarry carry;
      carry.global = t.leaf({d.hidden}, gv);
      carry.hist = hist;
      std::vector<double> h2(hv.size());
      AdjacencyMatrix e2 = AdjacencyMatrix::make(hist);
      for (int i = 0; i < hist; ++i) {
        const int src = permuted ? perm[static_cast<size_t>(i)] : i;
        std::copy(hv.begin() + static_cast<std::ptrdiff_t>(src) * d.hidden,
                  hv.begin() + static_cast<std::ptrdiff_t>(src + 1) * d.hidden,
                  h2.begin() + static_cast<std::ptrdiff_t>(i) * d.hidden);
        for (int j = 0; j < hist; ++j)
          e2.at(i, j) = e.at(permuted ? perm[static_cast<size_t>(i)] : i,
                             permuted ? perm[static_cast<size_t>(j)] : j);
      }
      carry.histories = t.leaf({hist, d.hidden}, h2);
      StepResult out = forward_step(mp, t, carry, t.leaf({2, d.hidden}, iv),
                                    t.leaf({2, d.hidden}, vv), e2, {});
      return std::tuple{out.global.values(), out.histories.values(), out.views.values()};
    };
    auto [g1, h1, v1] = run(false);
    auto [g2, h2, v2] = run(true);
    auto close = [](double a, double b) {
      return std::fabs(a - b) <= 1e-11 * std::max({1.0, std::fabs(a), std::fabs(b)});
    };
    for (size_t i = 0; i < g1.size() && ok; ++i)
      if (!close(g1[i], g2[i])) ok = false;
    for (size_t i = 0; i < v1.size() && ok; ++i)
      if (!close(v1[i], v2[i])) ok = false;
    for (int i = 0; i < hist && ok; ++i)
      for (int c = 0; c < d.hidden && ok; ++c)
        if (!close(h2[static_cast<size_t>(i) * d.hidden + c],
                   h1[static_cast<size_t>(perm[static_cast<size_t>(i)]) * d.hidden + c]))
          ok = false;
    if (!ok) why = "permutation consistency broke at trial " + std::to_string(trial);
  }

  const double secs = wall_seconds(t0);
  if (secs >= 60.0) ok = false;
  char detail[160];
  std::snprintf(detail, sizeof detail, "%d random explored graphs + 20 permutations, %.1fs%s%s",
                graphs, secs, ok ? "" : "; ", ok ? "" : why.c_str());
  report(2, "adjacency mask enforced exactly at every layer/head", ok, detail);
}

// ---- criterion 3: distribution sanity ---------------------------------------

void criterion3() {
  RunConfig cfg = small_config();
  EnvPool pool = generate_pool(cfg, 43);
  ModelParams mp = ModelParams::init(cfg.model_dims(), 4301);
  bool ok = true;
  std::string why;
  int rollouts = 0, steps = 0;
  for (int i = 0; i < 1000 && ok; ++i, ++rollouts) {
    Tape tape;
    const Episode& ep = pool.train.episodes[static_cast<size_t>(i) % pool.train.episodes.size()];
    RolloutResult r =
        rollout(mp, tape, ep, rollout_opts(cfg, RolloutMode::Student, 9000 + static_cast<std::uint64_t>(i)));
    for (const auto& s : r.trace.steps) {
      if (s.forced_stop) continue;
      ++steps;
      double sp = 0.0;
      for (double p : s.policy) sp += p;
      double st = 0.0;
      for (double p : s.target_dist) st += p;
      if (std::fabs(sp - 1.0) > 1e-6 || std::fabs(st - 1.0) > 1e-6) {
        ok = false;
        why = "distribution sum off at rollout " + std::to_string(i);
      }
      if (static_cast<int>(s.policy.size()) != s.num_views + s.num_history + 1) {
        ok = false;
        why = "action-space size mismatch at rollout " + std::to_string(i);
      }
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof detail, "%d rollouts, %d decision steps%s%s", rollouts, steps,
                ok ? "" : "; ", ok ? "" : why.c_str());
  report(3, "pi and P are proper distributions; |A| = k + (t-1) + 1", ok, detail);
}

// ---- criterion 4: oracle equivalences ---------------------------------------

void criterion4() {
  bool ok = true;
  std::string why;

  TargetGridSpec grid = TargetGridSpec::make(5, 6.0);
  std::mt19937_64 rng(4401);
  std::uniform_real_distribution<double> u(-25.0, 25.0);
  for (int i = 0; i < 100000 && ok; ++i) {
    const Vec2 p{u(rng), u(rng)};
    if (target_cell_index(grid, p) != oracles::nearest_center(grid.centers, p)) {
      ok = false;
      why = "nearest-center mismatch";
    }
  }

  EnvGenConfig gcfg;
  gcfg.num_nodes = 14;
  int backtracks = 0;
  for (int trial = 0; trial < 2000 && backtracks < 1000 && ok; ++trial) {
    HouseGraph h = generate_house(gcfg, 44000 + static_cast<std::uint64_t>(trial));
    AgentState s =
        AgentState::start(h, static_cast<int>(rng() % static_cast<unsigned>(h.node_count())));
    for (int step = 0; step < 6; ++step) {
      const auto& nb = h.adj[static_cast<size_t>(s.current)];
      const int next = nb[rng() % nb.size()];
      if (std::find(s.history_nodes.begin(), s.history_nodes.end(), s.current) ==
          s.history_nodes.end())
        s.history_nodes.push_back(s.current);
      execute_action(s, {ActionKind::View, 0, next, h.nodes[static_cast<size_t>(next)].location});
    }
    if (s.history_nodes.empty()) continue;
    const int target = s.history_nodes[rng() % s.history_nodes.size()];
    std::vector<char> allowed(h.nodes.size(), 0);
    for (int v : s.walk) allowed[static_cast<size_t>(v)] = 1;
    const double want = oracles::dfs_shortest(h, allowed, s.current, target);
    ExecResult r = execute_action(
        s, {ActionKind::History, 0, target, h.nodes[static_cast<size_t>(target)].location});
    if (std::fabs(r.step_distance - want) > 1e-9 * std::max(1.0, want)) {
      ok = false;
      why = "backtrack length off at trial " + std::to_string(trial);
    }
    ++backtracks;
  }

  int teacher_states = 0;
  ObserveConfig obs;
  obs.n = 36;
  obs.feature_dim = 4 + gcfg.landmark_count;
  obs.landmark_count = gcfg.landmark_count;
  for (int trial = 0; trial < 400 && teacher_states < 1000 && ok; ++trial) {
    HouseGraph h = generate_house(gcfg, 45000 + static_cast<std::uint64_t>(trial));
    Episode ep;
    try {
      ep = sample_episode(h, {2, 5}, 46000 + static_cast<std::uint64_t>(trial));
    } catch (const GenerationError&) {
      continue;
    }
    const auto fw = oracles::floyd_warshall(h);
    const auto dist = geodesic_from(h, ep.goal);
    AgentState s = AgentState::start(h, ep.start);
    std::mt19937_64 orng(47000 + static_cast<std::uint64_t>(trial));
    for (int step = 0; step < 5; ++step) {
      Panorama pano = observe(h, s.current, obs, orng);
      auto bindings = build_action_space(s, pano, false);
      const int got = teacher_action(ep, bindings, dist, s.current);
      const int want = oracles::teacher_scan(ep, bindings, fw, s.current);
      ++teacher_states;
      if (got != want) {
        ok = false;
        why = "teacher mismatch at trial " + std::to_string(trial);
        break;
      }
      // wander somewhere to diversify the sampled states
      const auto& nb = h.adj[static_cast<size_t>(s.current)];
      const int next = nb[orng() % nb.size()];
      if (std::find(s.history_nodes.begin(), s.history_nodes.end(), s.current) ==
          s.history_nodes.end())
        s.history_nodes.push_back(s.current);
      execute_action(s, {ActionKind::View, 0, next, h.nodes[static_cast<size_t>(next)].location});
    }
  }

  char detail[200];
  std::snprintf(detail, sizeof detail,
                "1e5 grid points, %d backtracks, %d teacher states%s%s", backtracks,
                teacher_states, ok ? "" : "; ", ok ? "" : why.c_str());
  report(4, "grid index, backtrack length and teacher action match brute force", ok, detail);
}

// ---- criteria 5-7: trained models -------------------------------------------

struct TrainedRun {
  TrainResult result;
  double cpu_secs = 0.0;
};

TrainedRun run_training(const RunConfig& base, const AblationFlags& flags, std::uint64_t seed,
                        const EnvPool& pool) {
  RunConfig cfg = base;
  cfg.train.seed = seed;
  ModelParams mp = ModelParams::init(cfg.model_dims(), seed);
  const double c0 = cpu_seconds();
  TrainedRun run;
  run.result = train(mp, cfg, flags, pool.train, pool.val_seen, pool.val_unseen, "");
  run.cpu_secs = cpu_seconds() - c0;
  return run;
}

void criteria567() {
  RunConfig cfg = task_config();
  EnvPool pool = generate_pool(cfg, 57);
  const std::vector<std::uint64_t> seeds{101, 202, 303};

  std::vector<TrainedRun> full, no_ist, st_only;
  for (std::uint64_t s : seeds) {
    full.push_back(run_training(cfg, AblationFlags{false, false, false}, s, pool));
    std::printf("    [info] full seed %llu: seen %.2f unseen %.2f (%.0f cpu-s)\n",
                static_cast<unsigned long long>(s), full.back().result.evals.back().seen.sr,
                full.back().result.evals.back().unseen.sr, full.back().cpu_secs);
    std::fflush(stdout);
  }
  for (std::uint64_t s : seeds) {
    no_ist.push_back(run_training(cfg, AblationFlags{true, false, false}, s, pool));
    std::printf("    [info] no-IST seed %llu: unseen %.2f (%.0f cpu-s)\n",
                static_cast<unsigned long long>(s), no_ist.back().result.evals.back().unseen.sr,
                no_ist.back().cpu_secs);
    std::fflush(stdout);
  }
  for (std::uint64_t s : seeds) {
    st_only.push_back(run_training(cfg, AblationFlags{true, true, false}, s, pool));
    std::printf("    [info] no-GAS-no-IST seed %llu: unseen %.2f (%.0f cpu-s)\n",
                static_cast<unsigned long long>(s), st_only.back().result.evals.back().unseen.sr,
                st_only.back().cpu_secs);
    std::fflush(stdout);
  }

  // criterion 5
  {
    std::vector<double> seen, unseen;
    double max_cpu = 0.0;
    for (const auto& r : full) {
      seen.push_back(r.result.evals.back().seen.sr);
      unseen.push_back(r.result.evals.back().unseen.sr);
      max_cpu = std::max(max_cpu, r.cpu_secs);
    }
    const double med_seen = median3(seen), med_unseen = median3(unseen);
    const bool ok = med_seen >= 0.80 && med_unseen >= 0.60 && max_cpu <= 1800.0;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "median seen SR %.3f (need >= 0.80), unseen %.3f (need >= 0.60), max cpu %.0fs "
                  "(cap 1800s)",
                  med_seen, med_unseen, max_cpu);
    report(5, "full model learns the default task", ok, detail);
  }

  // criterion 6
  {
    std::vector<double> f, ni, so;
    for (const auto& r : full) f.push_back(r.result.evals.back().unseen.sr);
    for (const auto& r : no_ist) ni.push_back(r.result.evals.back().unseen.sr);
    for (const auto& r : st_only) so.push_back(r.result.evals.back().unseen.sr);
    const double mf = median3(f), mni = median3(ni), mso = median3(so);
    const bool ok = mf >= mni && mni >= mso;
    char detail[160];
    std::snprintf(detail, sizeof detail, "unseen SR medians: full %.3f >= no-IST %.3f >= no-GAS-no-IST %.3f",
                  mf, mni, mso);
    report(6, "ablation ordering is directional", ok, detail);
  }

  // criterion 7
  {
    std::vector<double> dc25, dc75, ge6_first, ge6_final;
    for (const auto& r : full) {
      const auto& final_dc = r.result.evals.back().dc_unseen;
      const auto& first_dc = r.result.evals.front().dc_unseen;
      dc25.push_back(final_dc.mean_at_frac[0]);
      dc75.push_back(final_dc.mean_at_frac[2]);
      ge6_first.push_back(first_dc.bin_ge6);
      ge6_final.push_back(final_dc.bin_ge6);
    }
    const double m25 = median3(dc25), m75 = median3(dc75);
    const double g_first = median3(ge6_first), g_final = median3(ge6_final);
    const bool ok = m75 <= m25 && g_final <= g_first;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "median d_c at 75%% %.2f <= at 25%% %.2f; ge6 share final %.2f <= at 10%% of "
                  "training %.2f",
                  m75, m25, g_final, g_first);
    report(7, "target error shrinks within episodes and across training", ok, detail);
  }

  // criterion 8 reuses the full-model logs for the alpha-weighted identity
  {
    bool ok = true;
    std::string why;
    int checked = 0;
    for (const auto& r : full)
      for (const auto& lg : r.result.logs) {
        ++checked;
        if (std::fabs(lg.total - lg.recomputed_total) > 1e-9) {
          ok = false;
          why = "log mismatch at iteration " + std::to_string(lg.iteration);
        }
      }

    // teacher preset grads and exact alpha scaling on a small fixture
    RunConfig small = small_config();
    EnvPool spool = generate_pool(small, 58);
    ModelParams mp = ModelParams::init(small.model_dims(), 580);
    auto grads_with = [&](LossWeights w) {
      mp.store.zero_grads();
      Tape tape;
      RolloutOptions o = rollout_opts(small, RolloutMode::Teacher, 581);
      o.weights = w;
      RolloutResult r = rollout(mp, tape, spool.train.episodes[0], o);
      tape.backward(r.total);
      tape.merge_param_grads(mp.store);
      return std::tuple{mp.store.at(mp.value_w).grad, mp.store.at(mp.policy_head.w1).grad,
                        mp.store.at(mp.target_head.w1).grad};
    };
    auto [v1, p1, t1] = grads_with({0.2, 0.0, 0.0, 0.1});
    for (double g : v1)
      if (g != 0.0) {
        ok = false;
        why = "teacher preset leaked gradient into the value head";
      }
    auto [v2, p2, t2] = grads_with({0.4, 0.0, 0.0, 0.2});
    for (size_t i = 0; i < p1.size() && ok; ++i)
      if (p2[i] != 2.0 * p1[i]) {
        ok = false;
        why = "alpha1 scaling is not exactly linear";
      }
    for (size_t i = 0; i < t1.size() && ok; ++i)
      if (t2[i] != 2.0 * t1[i]) {
        ok = false;
        why = "alpha4 scaling is not exactly linear";
      }
    mp.store.zero_grads();
    char detail[160];
    std::snprintf(detail, sizeof detail, "%d iteration logs within 1e-9; preset and scaling%s%s",
                  checked, ok ? " hold" : " broke: ", ok ? "" : why.c_str());
    report(8, "loss plumbing: weighted total, teacher preset, alpha linearity", ok, detail);
  }
}

// ---- criterion 9: reproducibility -------------------------------------------

void criterion9() {
  RunConfig cfg = small_config();
  cfg.train.iterations = 30;
  cfg.train.eval_interval = 15;
  cfg.train.threads = 1;
  EnvPool pool = generate_pool(cfg, 59);

  namespace fs = std::filesystem;
  const std::string d1 = "/tmp/nav_acc_rep1", d2 = "/tmp/nav_acc_rep2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  auto run = [&](const std::string& dir) {
    ModelParams mp = ModelParams::init(cfg.model_dims(), cfg.train.seed);
    train(mp, cfg, {}, pool.train, pool.val_seen, pool.val_unseen, dir);
  };
  run(d1);
  run(d2);
  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  };
  const std::string b1 = slurp(d1 + "/ckpt_latest.tdsp");
  const std::string b2 = slurp(d2 + "/ckpt_latest.tdsp");
  bool ok = !b1.empty() && b1 == b2;
  std::string detail = "two single-threaded runs, checkpoints " +
                       std::string(b1 == b2 ? "byte-identical" : "DIFFER");

  // round-trip: reload-save bytes stable and metrics exactly preserved
  LoadedCheckpoint lc = load_checkpoint(d1 + "/ckpt_latest.tdsp");
  save_checkpoint(d1 + "/rt.tdsp", lc.mp, lc.meta);
  LoadedCheckpoint lc2 = load_checkpoint(d1 + "/rt.tdsp");
  if (slurp(d1 + "/rt.tdsp") != b1) {
    ok = false;
    detail += "; resave differs";
  }
  EvalResult ea = evaluate(lc.mp, pool.val_unseen, cfg, {}, PolicySource::Model, 90, false);
  EvalResult eb = evaluate(lc2.mp, pool.val_unseen, cfg, {}, PolicySource::Model, 90, false);
  if (ea.metrics.sr != eb.metrics.sr || ea.metrics.spl != eb.metrics.spl ||
      ea.metrics.ne != eb.metrics.ne || ea.metrics.osr != eb.metrics.osr) {
    ok = false;
    detail += "; round-trip metrics differ";
  } else {
    detail += "; round-trip metrics exact";
  }
  report(9, "bitwise-reproducible training and exact checkpoint round-trip", ok, detail);
}

// ---- criterion 10: metrics definitional cases --------------------------------

void criterion10() {
  HouseGraph h;
  h.nodes = {{0, {0, 0}, 0}, {1, {2.5, 0}, 1}, {2, {6, 0}, 2}};
  h.edges = {{0, 1}, {1, 2}};
  h.build_adjacency();
  Episode ep;
  ep.house = &h;
  ep.start = 0;
  ep.goal = 1;
  ep.gt_path = {0, 1};
  ep.gt_length = 2.5;

  auto mk_trace = [&](std::vector<int> walk) {
    EpisodeTrace tr;
    tr.episode_id = 0;
    tr.visited = walk;
    double travelled = 0;
    for (size_t i = 0; i + 1 < walk.size(); ++i)
      travelled += distance(h.nodes[static_cast<size_t>(walk[i])].location,
                            h.nodes[static_cast<size_t>(walk[i + 1])].location);
    StepRecord s;
    s.step = 1;
    s.action_kind = "stop";
    s.node = walk.back();
    s.travelled = travelled;
    s.stop = true;
    tr.steps.push_back(s);
    tr.stopped = true;
    return tr;
  };

  bool ok = true;
  std::string why;
  {
    auto tr = mk_trace({0, 1});
    auto m = compute_metrics({&ep, 1}, {&tr, 1}, 3.0);
    if (m.sr != 1.0 || std::fabs(m.spl - 1.0) > 1e-12) {
      ok = false;
      why = "exact path should give SR 1, SPL 1";
    }
  }
  {
    auto tr = mk_trace({0, 1, 2});
    auto m = compute_metrics({&ep, 1}, {&tr, 1}, 3.0);
    if (!(m.sr == 0.0 && m.osr == 1.0)) {
      ok = false;
      why = "pass-within-radius-but-stop-outside should be OSR-only";
    }
    if (!(m.spl <= m.sr && m.osr >= m.sr)) {
      ok = false;
      why = "SPL<=SR or OSR>=SR violated";
    }
  }
  {
    HouseGraph far;
    far.nodes = {{0, {0, 0}, 0}, {1, {10, 0}, 1}};
    far.edges = {{0, 1}};
    far.build_adjacency();
    Episode e2;
    e2.house = &far;
    e2.start = 0;
    e2.goal = 1;
    e2.gt_path = {0, 1};
    e2.gt_length = 10;
    EpisodeTrace tr;
    tr.episode_id = 0;
    tr.visited = {0};
    StepRecord s;
    s.step = 1;
    s.action_kind = "stop";
    s.node = 0;
    s.stop = true;
    tr.steps.push_back(s);
    tr.stopped = true;
    auto m = compute_metrics({&e2, 1}, {&tr, 1}, 3.0);
    if (!(m.sr == 0.0 && m.spl == 0.0 && std::fabs(m.ne - 10.0) < 1e-12)) {
      ok = false;
      why = "stop-at-start case off";
    }
  }
  report(10, "metrics reproduce the definitional cases", ok, ok ? "3 hand cases" : why);
}

}  // namespace

int main(int argc, char** argv) {
  int threads = 2;
  bool skip_heavy = false;  // development aid: criteria 5-8 are not validated
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) threads = std::atoi(argv[i + 1]);
    if (std::strcmp(argv[i], "--skip-heavy") == 0) skip_heavy = true;
  }
  g_threads = threads;
  kernels::set_parallel(threads > 1);

  std::printf("acceptance suite (training threads: %d)\n", threads);
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  if (skip_heavy)
    std::printf("[SKIP] criteria 5-8 not run (--skip-heavy)\n");
  else
    criteria567();
  criterion9();
  criterion10();
  if (skip_heavy) {
    std::printf("INCOMPLETE: heavy criteria skipped; run without --skip-heavy\n");
    return 2;
  }
  std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "OK" : "FAILED", g_failures);
  return g_failures == 0 ? 0 : 1;
}
