#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nav/config.hpp"
#include "nav/env.hpp"
#include "nav/policy.hpp"

namespace nav {

struct LossWeights {
  double il = 0.0, rl = 0.0, ht = 0.0, t = 0.0;
};

inline LossWeights teacher_weights(const TrainSection& t) {
  return {t.alpha_teacher[0], t.alpha_teacher[1], t.alpha_teacher[2], t.alpha_teacher[3]};
}
inline LossWeights student_weights(const TrainSection& t) {
  return {t.alpha_student[0], t.alpha_student[1], t.alpha_student[2], t.alpha_student[3]};
}

enum class RolloutMode { Teacher, Student, Greedy };
enum class PolicySource { Model, Oracle, Random };  // greedy-mode action choice

struct RolloutOptions {
  RolloutMode mode = RolloutMode::Teacher;
  PolicySource source = PolicySource::Model;
  AblationFlags flags;
  LossWeights weights;
  double gamma = 0.9;
  double success_bonus = 2.0;
  double value_coef = 0.5;
  double success_radius = 3.0;
  int t_max = 15;
  ObserveConfig obs;
  std::uint64_t seed = 0;
  AttnCapture* capture = nullptr;  // records the last forward step when set
};

struct LossTerms {
  std::optional<Tensor> il, rl, ht, t;
};

struct RolloutResult {
  EpisodeTrace trace;
  bool has_loss = false;
  Tensor total;  // weighted total, valid when has_loss
  LossTerms terms;
  double il = 0.0, rl = 0.0, ht = 0.0, t = 0.0;  // component values
  double total_value = 0.0;
  bool success = false;
  double final_error = 0.0;
};

// One full episode on one tape: embeds the instruction once, runs the
// recurrent masked-transformer steps, chooses actions per mode, executes
// them (including explored-graph backtracks) and assembles the mode's loss.
RolloutResult rollout(ModelParams& mp, Tape& tape, const Episode& episode,
                      const RolloutOptions& opt);

// potential-difference shaping; terminal steps earn +/- the success bonus
double shaped_reward(const std::vector<double>& dist_to_goal, int prev_node, int new_node,
                     bool terminal, bool success, double success_bonus);

// sum_t [ -log pi(a_t) * (G_t - b_t) + value_coef * (G_t - b_t)^2 ], with the
// advantage treated as a constant in the log-pi term.
Tensor policy_gradient_loss(Tape& tape, const std::vector<Tensor>& nll_steps,
                            const std::vector<Tensor>& values, const std::vector<double>& rewards,
                            double gamma, double value_coef);

// alpha-weighted sum; throws DivergenceError naming a non-finite component.
Tensor total_loss(Tape& tape, const LossTerms& terms, const LossWeights& w);

// discounted return-to-go for each step
std::vector<double> returns_to_go(const std::vector<double>& rewards, double gamma);

// ---- evaluation -------------------------------------------------------------

struct DcReport {
  // mean d_c over episodes at 25/50/75/100% episode progress
  std::array<double, 4> mean_at_frac{0, 0, 0, 0};
  // shares of episodes at 50% progress falling in d_c bins <3, [3,6), >=6
  double bin_lt3 = 0, bin_3to6 = 0, bin_ge6 = 0;
  int episodes = 0;
};

struct EvalResult {
  MetricsReport metrics;
  DcReport dc;
  std::vector<EpisodeTrace> traces;
};

EvalResult evaluate(ModelParams& mp, const EnvSplit& split, const RunConfig& cfg,
                    const AblationFlags& flags, PolicySource source, std::uint64_t seed,
                    bool keep_traces);

// ---- training ----------------------------------------------------------------

struct EvalPoint {
  int iteration = 0;
  MetricsReport seen, unseen;
  DcReport dc_unseen;
};

struct IterationLog {
  int iteration = 0;
  std::string mode;
  double il = 0, rl = 0, ht = 0, t = 0, total = 0;
  double recomputed_total = 0;
};

struct TrainResult {
  int iterations_done = 0;
  bool diverged = false;
  std::vector<EvalPoint> evals;
  std::vector<IterationLog> logs;
};

// Alternates teacher/student 1:1, averages losses over the batch, clips the
// global gradient norm and applies one Adam step per iteration. Periodically
// evaluates on the held-out splits and checkpoints. out_dir may be empty to
// keep everything in memory (tests).
TrainResult train(ModelParams& mp, const RunConfig& cfg, const AblationFlags& flags,
                  const EnvSplit& train_split, const EnvSplit& val_seen,
                  const EnvSplit& val_unseen, const std::string& out_dir,
                  int start_iteration = 0);

}  // namespace nav
