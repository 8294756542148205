#pragma once

#include <cstdint>
#include <vector>

#include "nav/params.hpp"

namespace nav {

// Inference-/training-time switches for the ablation sweeps. no_ist drops the
// target tokens and the target loss; no_gas restricts the policy to views +
// stop; no_st replaces the adjacency mask with all-true and zeroes every
// positional-encoder contribution.
struct AblationFlags {
  bool no_ist = false;
  bool no_gas = false;
  bool no_st = false;
};

struct ModelDims {
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int grid_d = 5;
  double grid_s = 6.0;
  int t_max = 15;
  int bptt_horizon = 0;  // detach carried tokens every this many steps; 0 = never
  int vocab = 18;
  int feature_dim = 20;
  int max_instr_len = 8;
  bool head_activation = true;  // GELU between the two scalar-head layers

  int head_dim() const { return hidden / heads; }
};

struct LayerIds {
  int wq, bq, wk, bk, wv, bv, wo, bo;
  int ln1_g, ln1_b;
  int ff1_w, ff1_b, ff2_w, ff2_b;
  int ln2_g, ln2_b;
};

// Two linear layers to a scalar logit.
struct HeadIds {
  int w1, b1, w2, b2;
};

// Every trainable array of the model, created in a fixed order so that
// checkpoints and seeded initialization are reproducible.
struct ModelParams {
  ModelDims dims;
  ParamStore store;

  // instruction encoder
  int instr_embed, instr_pos, instr_ln_g, instr_ln_b;
  // shared position encoder f_P
  int fp_w, fp_b, fp_ln_g, fp_ln_b;
  // action-direction encoder f_A
  int fa_w, fa_b, fa_ln_g, fa_ln_b;
  // panorama pooling encoder f_V
  int fv_w, fv_b, fv_ln_g, fv_ln_b;
  // temporal table f_T, rows 0..t_max
  int ft_table;
  // view-content projection
  int view_w, view_b, view_ln_g, view_ln_b;
  int stop_embed;
  std::vector<LayerIds> layers;
  HeadIds policy_head, target_head;
  int value_w, value_b;

  static ModelParams init(const ModelDims& dims, std::uint64_t seed);
};

}  // namespace nav
