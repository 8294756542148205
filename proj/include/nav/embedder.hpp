#pragma once

#include <vector>

#include "nav/env.hpp"
#include "nav/grid.hpp"
#include "nav/model_params.hpp"
#include "nav/tensor.hpp"

namespace nav {

struct InstructionEncoding {
  Tensor sentence;  // x0, [H]
  Tensor tokens;    // x1..xm, [m x H]
  int m = 0;
};

// Builds the five token families on one episode tape. All positional terms go
// through the shared f_P parameters; locations are relative to the episode
// start.
class Embedder {
 public:
  Embedder(ModelParams& mp, Tape& tape, AblationFlags flags = {})
      : mp_(mp), tape_(tape), flags_(flags) {}

  // f_P over a [R x 2] location matrix -> [R x H]; zeros when no_st.
  Tensor position_encode(const Tensor& rel_locations);
  Tensor position_encode_point(Vec2 rel);  // [H]

  // Per-token layer_norm(embedding + positional); sentence = layer_norm(mean).
  InstructionEncoding encode_instruction(const std::vector<int>& token_ids);

  // f_V(panorama) + f_A(r) + f_T(t) + f_P(l)
  Tensor history_token(const Panorama& pano, double heading, double elevation, int t, Vec2 rel);

  // layer_norm(linear(feature_i)) + f_P(l_i); non-navigable slots use the
  // observing node's own location.
  Tensor embed_views(const Panorama& pano, const std::vector<Vec2>& slot_rel_locations);

  // c_i^0 = f_P(center_i) * x0 (Hadamard) -> [q x H]
  Tensor target_tokens_init(const TargetGridSpec& grid, const Tensor& sentence);

  // g^0 = x0 (copy)
  Tensor global_init(const Tensor& sentence);

  ModelParams& params() { return mp_; }
  Tape& tape() { return tape_; }
  const AblationFlags& flags() const { return flags_; }

 private:
  ModelParams& mp_;
  Tape& tape_;
  AblationFlags flags_;
};

// (sin theta, cos theta, sin phi, cos phi)
std::vector<double> direction_encoding(double heading, double elevation);

}  // namespace nav
