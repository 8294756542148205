#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nav/checkpoint.hpp"
#include "nav/config.hpp"
#include "nav/kernels.hpp"
#include "nav/pool.hpp"
#include "nav/trainer.hpp"
#include "nav/viz.hpp"

namespace {

using nav::AblationFlags;
using nav::RunConfig;
using nlohmann::json;

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

RunConfig resolve_config(const CommonArgs& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : RunConfig::load_file(c.config_path);
  if (c.seed_set) cfg.train.seed = c.seed;
  if (c.threads > 0) cfg.train.threads = c.threads;
  cfg.validate();
  nav::kernels::set_parallel(cfg.train.threads > 1);
#ifdef _OPENMP
  omp_set_num_threads(cfg.train.threads);
#endif
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& c) {
  cmd->add_option("--config", c.config_path, "JSON config file");
  cmd->add_option("--seed", c.seed, "override train.seed")->each([&](const std::string&) {
    c.seed_set = true;
  });
  cmd->add_option("--threads", c.threads, "worker threads (1 = bitwise-reproducible)");
}

void print_metrics(const std::string& tag, const nav::MetricsReport& m) {
  std::printf("%s  SR %.4f  SPL %.4f  NE %.3f  OSR %.4f\n", tag.c_str(), m.sr, m.spl, m.ne, m.osr);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n == 0 ? 0.0 : (n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
}

int run_gen_env(const CommonArgs& common, const std::string& out_dir) {
  RunConfig cfg = resolve_config(common);
  nav::EnvPool pool = nav::generate_pool(cfg, cfg.train.seed);
  nav::save_pool(pool, out_dir);
  cfg.save_file(out_dir + "/config.json");
  std::printf("wrote %s/{train,val_seen,val_unseen}.json (%zu train houses, %zu unseen)\n",
              out_dir.c_str(), pool.train.houses.size(), pool.val_unseen.houses.size());
  return 0;
}

int run_train(const CommonArgs& common, const std::string& env_dir, const std::string& out_dir,
              const std::string& resume_path, const AblationFlags& flags) {
  RunConfig cfg = resolve_config(common);
  nav::EnvPool pool = nav::load_pool(env_dir);
  nav::ModelParams mp;
  int start_iteration = 0;
  if (!resume_path.empty()) {
    nav::LoadedCheckpoint lc = nav::load_checkpoint(resume_path);
    mp = std::move(lc.mp);
    cfg = lc.meta.cfg;
    if (common.seed_set) cfg.train.seed = common.seed;
    if (common.threads > 0) cfg.train.threads = common.threads;
    start_iteration = lc.meta.iteration;
    std::printf("resuming from %s at iteration %d\n", resume_path.c_str(), start_iteration);
  } else {
    mp = nav::ModelParams::init(cfg.model_dims(), cfg.train.seed);
  }
  nav::TrainResult tr =
      nav::train(mp, cfg, flags, pool.train, pool.val_seen, pool.val_unseen, out_dir, start_iteration);
  if (tr.diverged) {
    std::fprintf(stderr, "training diverged at iteration %d; last good checkpoint retained\n",
                 tr.iterations_done);
    return 2;
  }
  if (!tr.evals.empty()) {
    print_metrics("final seen  ", tr.evals.back().seen);
    print_metrics("final unseen", tr.evals.back().unseen);
  }
  std::printf("checkpoint: %s/ckpt_latest.tdsp\n", out_dir.c_str());
  return 0;
}

int run_eval(const CommonArgs& common, const std::string& ckpt_path, const std::string& split_path,
             const AblationFlags& cli_flags, const std::string& policy,
             const std::string& traces_out, const std::string& out_json) {
  nav::LoadedCheckpoint lc = nav::load_checkpoint(ckpt_path);
  RunConfig cfg = lc.meta.cfg;
  if (common.seed_set) cfg.train.seed = common.seed;
  if (common.threads > 0) cfg.train.threads = common.threads;
  nav::kernels::set_parallel(cfg.train.threads > 1);
#ifdef _OPENMP
  omp_set_num_threads(cfg.train.threads);
#endif

  AblationFlags flags = cli_flags;
  nav::require_flag_compatibility(lc.meta.flags, flags);

  nav::EnvSplit split = nav::load_split(split_path);
  nav::PolicySource source = nav::PolicySource::Model;
  if (policy == "oracle") source = nav::PolicySource::Oracle;
  else if (policy == "random") source = nav::PolicySource::Random;
  else if (policy != "model") throw nav::ConfigError("--policy must be model|oracle|random");

  nav::EvalResult res = nav::evaluate(lc.mp, split, cfg, flags, source,
                                      nav::mix_seed(cfg.train.seed, 0xEFA1ULL), true);
  print_metrics("eval", res.metrics);
  std::printf("d_c mean at progress 25/50/75/100%%: %.3f %.3f %.3f %.3f (episodes %d)\n",
              res.dc.mean_at_frac[0], res.dc.mean_at_frac[1], res.dc.mean_at_frac[2],
              res.dc.mean_at_frac[3], res.dc.episodes);
  std::printf("d_c bins at 50%%: <3: %.3f  [3,6): %.3f  >=6: %.3f\n", res.dc.bin_lt3,
              res.dc.bin_3to6, res.dc.bin_ge6);
  if (!traces_out.empty()) nav::save_traces_jsonl(res.traces, traces_out);
  if (!out_json.empty()) {
    json j{{"sr", res.metrics.sr},
           {"spl", res.metrics.spl},
           {"ne", res.metrics.ne},
           {"osr", res.metrics.osr},
           {"dc_mean_at", res.dc.mean_at_frac},
           {"dc_bins", {res.dc.bin_lt3, res.dc.bin_3to6, res.dc.bin_ge6}}};
    std::ofstream out(out_json);
    if (!out) throw nav::IoError("cannot write " + out_json);
    out << j.dump(2) << "\n";
  }
  return 0;
}

struct SweepPoint {
  std::string name;
  AblationFlags flags;
  int grid_d = -1;      // -1 = keep config
  double grid_s = -1;   // -1 = keep config
  double alpha3 = -1;   // -1 = keep config
  double alpha4 = -1;
};

int run_ablate(const CommonArgs& common, const std::string& env_dir, const std::string& sweep,
               int seeds, double budget_minutes, const std::string& out_csv) {
  RunConfig base = resolve_config(common);
  nav::EnvPool pool = nav::load_pool(env_dir);

  std::vector<SweepPoint> points;
  if (sweep == "components") {
    points.push_back({"baseline", AblationFlags{true, true, true}});
    points.push_back({"st", AblationFlags{true, true, false}});
    points.push_back({"st_gas", AblationFlags{true, false, false}});
    points.push_back({"full", AblationFlags{false, false, false}});
  } else if (sweep == "grid_d") {
    for (int d : {0, 3, 5, 7}) {
      SweepPoint p{"d=" + std::to_string(d), {}};
      p.grid_d = d;
      points.push_back(p);
    }
  } else if (sweep == "spacing_s") {
    for (double s : {4.0, 6.0, 8.0, 10.0}) {
      SweepPoint p{"s=" + std::to_string(static_cast<int>(s)), {}};
      p.grid_s = s;
      points.push_back(p);
    }
  } else if (sweep == "alpha34") {
    for (double a3 : {0.2, 0.4, 0.6})
      for (double a4 : {0.05, 0.1, 0.2}) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "a3=%.2f,a4=%.2f", a3, a4);
        SweepPoint p{buf, {}};
        p.alpha3 = a3;
        p.alpha4 = a4;
        points.push_back(p);
      }
  } else {
    throw nav::ConfigError("--sweep must be components|grid_d|spacing_s|alpha34");
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto minutes_used = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  };

  struct Row {
    std::string point;
    int seed;
    double sr, spl;
    bool done;
  };
  std::vector<Row> rows;
  for (const auto& pt : points) {
    for (int s = 0; s < seeds; ++s) {
      if (budget_minutes > 0 && minutes_used() > budget_minutes) {
        rows.push_back({pt.name, s, 0.0, 0.0, false});
        continue;
      }
      RunConfig cfg = base;
      if (pt.grid_d >= 0) cfg.model.grid_d = pt.grid_d;
      if (pt.grid_s > 0) cfg.model.grid_s = pt.grid_s;
      if (pt.alpha3 >= 0) cfg.train.alpha_student[2] = pt.alpha3;
      if (pt.alpha4 >= 0) {
        cfg.train.alpha_student[3] = pt.alpha4;
        cfg.train.alpha_teacher[3] = pt.alpha4;
      }
      cfg.train.seed = nav::mix_seed(base.train.seed, 0xAB1A7EULL + static_cast<std::uint64_t>(s));
      nav::ModelParams mp = nav::ModelParams::init(cfg.model_dims(), cfg.train.seed);
      nav::TrainResult tr =
          nav::train(mp, cfg, pt.flags, pool.train, pool.val_seen, pool.val_unseen, "", 0);
      if (tr.diverged || tr.evals.empty()) {
        rows.push_back({pt.name, s, 0.0, 0.0, false});
        continue;
      }
      const auto& last = tr.evals.back().unseen;
      rows.push_back({pt.name, s, last.sr, last.spl, true});
      std::printf("[%s seed %d] unseen SR %.3f SPL %.3f (%.1f min elapsed)\n", pt.name.c_str(), s,
                  last.sr, last.spl, minutes_used());
    }
  }

  std::ofstream out(out_csv);
  if (!out) throw nav::IoError("cannot write " + out_csv);
  out << "sweep,point,seed,status,sr_unseen,spl_unseen,median_sr_unseen,median_spl_unseen\n";
  for (const auto& pt : points) {
    std::vector<double> srs, spls;
    for (const auto& r : rows)
      if (r.point == pt.name && r.done) {
        srs.push_back(r.sr);
        spls.push_back(r.spl);
      }
    const double msr = median(srs), mspl = median(spls);
    for (const auto& r : rows) {
      if (r.point != pt.name) continue;
      char buf[256];
      std::snprintf(buf, sizeof buf, "%s,%s,%d,%s,%.4f,%.4f,%.4f,%.4f\n", sweep.c_str(),
                    pt.name.c_str(), r.seed, r.done ? "done" : "skipped", r.sr, r.spl, msr, mspl);
      out << buf;
    }
  }
  std::printf("wrote %s (%zu rows)\n", out_csv.c_str(), rows.size());
  return 0;
}

int run_viz(const std::string& trace_path, const std::string& env_path, int episode_id,
            const std::string& out_svg) {
  nav::EnvSplit split = nav::load_split(env_path);
  std::vector<nav::EpisodeTrace> traces = nav::load_traces_jsonl(trace_path);
  if (traces.empty()) throw nav::DomainError("viz: trace file holds no steps");
  const nav::EpisodeTrace* trace = nullptr;
  if (episode_id < 0) {
    trace = &traces.front();
    episode_id = trace->episode_id;
  } else {
    for (const auto& t : traces)
      if (t.episode_id == episode_id) trace = &t;
    if (!trace)
      throw nav::DomainError("viz: trace file has no episode " + std::to_string(episode_id));
  }
  const nav::Episode* ep = nullptr;
  for (const auto& e : split.episodes)
    if (e.id == episode_id) ep = &e;
  if (!ep)
    throw nav::DomainError("viz: env file has no episode " + std::to_string(episode_id) +
                           " (episode id mismatch)");
  nav::write_trace_svg(*ep->house, *ep, *trace, out_svg);
  std::printf("wrote %s\n", out_svg.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transformer navigation planner on synthetic graph worlds"};
  app.require_subcommand(1);

  CommonArgs c_gen, c_train, c_eval, c_ablate;
  std::string gen_out = "env";
  auto* gen = app.add_subcommand("gen-env", "generate train/val_seen/val_unseen splits");
  add_common(gen, c_gen);
  gen->add_option("--out", gen_out, "output directory");

  std::string train_env = "env", train_out = "run", train_resume;
  AblationFlags train_flags, eval_flags;
  auto* tr = app.add_subcommand("train", "train a model on a generated pool");
  add_common(tr, c_train);
  tr->add_option("--env-dir", train_env, "directory with the generated splits");
  tr->add_option("--out", train_out, "output directory (checkpoints, logs)");
  tr->add_option("--resume", train_resume, "checkpoint to resume from");
  tr->add_flag("--ablate-ist", train_flags.no_ist, "train without target tokens / target loss");
  tr->add_flag("--ablate-gas", train_flags.no_gas, "train without history actions");
  tr->add_flag("--ablate-st", train_flags.no_st, "train without adjacency mask / f_P terms");

  std::string eval_ckpt, eval_split, eval_policy = "model", eval_traces, eval_json;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_common(ev, c_eval);
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  ev->add_option("--split", eval_split, "split JSON file")->required();
  ev->add_flag("--ablate-ist", eval_flags.no_ist, "disable target tokens at inference");
  ev->add_flag("--ablate-gas", eval_flags.no_gas, "disable history actions at inference");
  ev->add_flag("--ablate-st", eval_flags.no_st, "disable mask / positions at inference");
  ev->add_option("--policy", eval_policy, "model|oracle|random (harness checks)");
  ev->add_option("--traces", eval_traces, "write per-step traces JSONL here");
  ev->add_option("--out", eval_json, "write a metrics JSON report here");

  std::string ab_env = "env", ab_sweep = "components", ab_out = "sweep.csv";
  int ab_seeds = 3;
  double ab_budget = 0.0;
  auto* ab = app.add_subcommand("ablate", "train/eval a sweep and write a CSV table");
  add_common(ab, c_ablate);
  ab->add_option("--env-dir", ab_env, "directory with the generated splits");
  ab->add_option("--sweep", ab_sweep, "components|grid_d|spacing_s|alpha34");
  ab->add_option("--seeds", ab_seeds, "seeds per point (>=3 recommended)");
  ab->add_option("--budget-minutes", ab_budget, "wall-clock budget; points beyond it are skipped");
  ab->add_option("--out", ab_out, "output CSV path");

  std::string viz_trace, viz_env, viz_out = "trace.svg";
  int viz_episode = -1;
  auto* vz = app.add_subcommand("viz", "render one traced episode as SVG");
  vz->add_option("--trace", viz_trace, "trace JSONL from eval --traces")->required();
  vz->add_option("--env", viz_env, "split JSON with the matching houses/episodes")->required();
  vz->add_option("--episode-id", viz_episode, "episode to draw (default: first in trace)");
  vz->add_option("--out", viz_out, "output SVG path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_env(c_gen, gen_out);
    if (tr->parsed()) return run_train(c_train, train_env, train_out, train_resume, train_flags);
    if (ev->parsed())
      return run_eval(c_eval, eval_ckpt, eval_split, eval_flags, eval_policy, eval_traces,
                      eval_json);
    if (ab->parsed()) return run_ablate(c_ablate, ab_env, ab_sweep, ab_seeds, ab_budget, ab_out);
    if (vz->parsed()) return run_viz(viz_trace, viz_env, viz_episode, viz_out);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
