#include "nav/model_params.hpp"

#include <random>

#include "nav/errors.hpp"

namespace nav {

namespace {

constexpr double kInitStd = 0.02;

std::vector<double> normal_init(std::mt19937_64& rng, std::int64_t n, double std_dev) {
  std::normal_distribution<double> dist(0.0, std_dev);
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = dist(rng);
  return v;
}

std::vector<double> zeros(std::int64_t n) { return std::vector<double>(static_cast<size_t>(n), 0.0); }
std::vector<double> ones(std::int64_t n) { return std::vector<double>(static_cast<size_t>(n), 1.0); }

}  // namespace

ModelParams ModelParams::init(const ModelDims& dims, std::uint64_t seed) {
  if (dims.hidden % dims.heads != 0)
    throw ConfigError("model.hidden must be divisible by model.heads");
  ModelParams mp;
  mp.dims = dims;
  std::mt19937_64 rng(seed);
  const int H = dims.hidden;
  auto& s = mp.store;

  auto w = [&](const std::string& name, int r, int c) {
    return s.add(name, {r, c}, normal_init(rng, static_cast<std::int64_t>(r) * c, kInitStd));
  };
  auto b = [&](const std::string& name, int n) { return s.add(name, {n}, zeros(n)); };
  auto g = [&](const std::string& name, int n) { return s.add(name, {n}, ones(n)); };

  mp.instr_embed = w("instr.embed", dims.vocab, H);
  mp.instr_pos = w("instr.pos", dims.max_instr_len, H);
  mp.instr_ln_g = g("instr.ln_g", H);
  mp.instr_ln_b = b("instr.ln_b", H);

  mp.fp_w = w("fp.w", 2, H);
  mp.fp_b = b("fp.b", H);
  mp.fp_ln_g = g("fp.ln_g", H);
  mp.fp_ln_b = b("fp.ln_b", H);

  mp.fa_w = w("fa.w", 4, H);
  mp.fa_b = b("fa.b", H);
  mp.fa_ln_g = g("fa.ln_g", H);
  mp.fa_ln_b = b("fa.ln_b", H);

  mp.fv_w = w("fv.w", dims.feature_dim, H);
  mp.fv_b = b("fv.b", H);
  mp.fv_ln_g = g("fv.ln_g", H);
  mp.fv_ln_b = b("fv.ln_b", H);

  mp.ft_table = w("ft.table", dims.t_max + 1, H);

  mp.view_w = w("view.w", dims.feature_dim, H);
  mp.view_b = b("view.b", H);
  mp.view_ln_g = g("view.ln_g", H);
  mp.view_ln_b = b("view.ln_b", H);

  mp.stop_embed = s.add("stop.embed", {H}, normal_init(rng, H, kInitStd));

  for (int l = 0; l < dims.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerIds ids{};
    ids.wq = w(p + "wq", H, H);
    ids.bq = b(p + "bq", H);
    ids.wk = w(p + "wk", H, H);
    ids.bk = b(p + "bk", H);
    ids.wv = w(p + "wv", H, H);
    ids.bv = b(p + "bv", H);
    ids.wo = w(p + "wo", H, H);
    ids.bo = b(p + "bo", H);
    ids.ln1_g = g(p + "ln1_g", H);
    ids.ln1_b = b(p + "ln1_b", H);
    ids.ff1_w = w(p + "ff1_w", H, 4 * H);
    ids.ff1_b = b(p + "ff1_b", 4 * H);
    ids.ff2_w = w(p + "ff2_w", 4 * H, H);
    ids.ff2_b = b(p + "ff2_b", H);
    ids.ln2_g = g(p + "ln2_g", H);
    ids.ln2_b = b(p + "ln2_b", H);
    mp.layers.push_back(ids);
  }

  mp.policy_head.w1 = w("policy.w1", H, H);
  mp.policy_head.b1 = b("policy.b1", H);
  mp.policy_head.w2 = w("policy.w2", H, 1);
  mp.policy_head.b2 = b("policy.b2", 1);

  mp.target_head.w1 = w("target.w1", H, H);
  mp.target_head.b1 = b("target.b1", H);
  mp.target_head.w2 = w("target.w2", H, 1);
  mp.target_head.b2 = b("target.b2", 1);

  mp.value_w = w("value.w", H, 1);
  mp.value_b = b("value.b", 1);
  return mp;
}

}  // namespace nav
