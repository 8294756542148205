#include "nav/embedder.hpp"

#include <array>
#include <cmath>

namespace nav {

std::vector<double> direction_encoding(double heading, double elevation) {
  return {std::sin(heading), std::cos(heading), std::sin(elevation), std::cos(elevation)};
}

Tensor Embedder::position_encode(const Tensor& rel_locations) {
  int R, C;
  if (rel_locations.rank() == 2) {
    R = rel_locations.rows();
    C = rel_locations.cols();
  } else {
    R = 1;
    C = rel_locations.dim();
  }
  if (C != 2) throw ShapeError("position_encode: locations must have 2 columns");
  if (flags_.no_st) {
    std::vector<int> shape = rel_locations.rank() == 2 ? std::vector<int>{R, mp_.dims.hidden}
                                                       : std::vector<int>{mp_.dims.hidden};
    std::vector<double> z(static_cast<size_t>(R) * mp_.dims.hidden, 0.0);
    return tape_.leaf(std::move(shape), std::move(z));
  }
  Tensor y = linear(rel_locations, tape_.param(mp_.store, mp_.fp_w), tape_.param(mp_.store, mp_.fp_b));
  return layer_norm(y, tape_.param(mp_.store, mp_.fp_ln_g), tape_.param(mp_.store, mp_.fp_ln_b));
}

Tensor Embedder::position_encode_point(Vec2 rel) {
  return position_encode(tape_.leaf({2}, {rel.x, rel.y}));
}

InstructionEncoding Embedder::encode_instruction(const std::vector<int>& token_ids) {
  const int m = static_cast<int>(token_ids.size());
  if (m < 1) throw DomainError("encode_instruction: empty instruction");
  if (m > mp_.dims.max_instr_len)
    throw DomainError("encode_instruction: instruction length " + std::to_string(m) +
                      " exceeds the positional table (" + std::to_string(mp_.dims.max_instr_len) +
                      ")");
  Tensor embed = tape_.param(mp_.store, mp_.instr_embed);
  Tensor pos = tape_.param(mp_.store, mp_.instr_pos);
  std::vector<Tensor> rows;
  for (int i = 0; i < m; ++i) {
    const int id = token_ids[static_cast<size_t>(i)];
    if (id < 0 || id >= mp_.dims.vocab)
      throw DomainError("encode_instruction: token id " + std::to_string(id) +
                        " outside vocabulary of size " + std::to_string(mp_.dims.vocab));
    rows.push_back(as_row(add(row(embed, id), row(pos, i))));
  }
  Tensor stacked = concat_rows(rows);
  Tensor g = tape_.param(mp_.store, mp_.instr_ln_g);
  Tensor b = tape_.param(mp_.store, mp_.instr_ln_b);
  InstructionEncoding enc;
  enc.m = m;
  enc.tokens = layer_norm(stacked, g, b);
  enc.sentence = layer_norm(mean_rows(enc.tokens), g, b);
  return enc;
}

Tensor Embedder::history_token(const Panorama& pano, double heading, double elevation, int t,
                               Vec2 rel) {
  if (t < 1 || t > mp_.dims.t_max)
    throw DomainError("history_token: step " + std::to_string(t) +
                      " outside the temporal table range [1," + std::to_string(mp_.dims.t_max) +
                      "]");
  const int F = mp_.dims.feature_dim;
  std::vector<double> pooled(static_cast<size_t>(F), 0.0);
  for (const auto& s : pano.slots)
    for (int f = 0; f < F; ++f) pooled[static_cast<size_t>(f)] += s.feature[static_cast<size_t>(f)];
  for (auto& v : pooled) v /= static_cast<double>(pano.slots.size());

  Tensor fv = layer_norm(linear(tape_.leaf({F}, std::move(pooled)),
                                tape_.param(mp_.store, mp_.fv_w), tape_.param(mp_.store, mp_.fv_b)),
                         tape_.param(mp_.store, mp_.fv_ln_g), tape_.param(mp_.store, mp_.fv_ln_b));
  Tensor fa = layer_norm(linear(tape_.leaf({4}, direction_encoding(heading, elevation)),
                                tape_.param(mp_.store, mp_.fa_w), tape_.param(mp_.store, mp_.fa_b)),
                         tape_.param(mp_.store, mp_.fa_ln_g), tape_.param(mp_.store, mp_.fa_ln_b));
  Tensor ft = row(tape_.param(mp_.store, mp_.ft_table), t);
  Tensor fp = position_encode_point(rel);
  return add(add(fv, fa), add(ft, fp));
}

Tensor Embedder::embed_views(const Panorama& pano, const std::vector<Vec2>& slot_rel_locations) {
  const int n = static_cast<int>(pano.slots.size());
  if (static_cast<int>(slot_rel_locations.size()) != n)
    throw ShapeError("embed_views: slot location count does not match panorama");
  const int F = mp_.dims.feature_dim;
  std::vector<double> feats;
  feats.reserve(static_cast<size_t>(n) * F);
  for (const auto& s : pano.slots) feats.insert(feats.end(), s.feature.begin(), s.feature.end());
  Tensor content = layer_norm(
      linear(tape_.leaf({n, F}, std::move(feats)), tape_.param(mp_.store, mp_.view_w),
             tape_.param(mp_.store, mp_.view_b)),
      tape_.param(mp_.store, mp_.view_ln_g), tape_.param(mp_.store, mp_.view_ln_b));
  std::vector<double> locs;
  locs.reserve(static_cast<size_t>(n) * 2);
  for (const auto& l : slot_rel_locations) {
    locs.push_back(l.x);
    locs.push_back(l.y);
  }
  Tensor fp = position_encode(tape_.leaf({n, 2}, std::move(locs)));
  return add(content, fp);
}

Tensor Embedder::target_tokens_init(const TargetGridSpec& grid, const Tensor& sentence) {
  std::vector<double> centers;
  centers.reserve(static_cast<size_t>(grid.q()) * 2);
  for (const auto& c : grid.centers) {
    centers.push_back(c.x);
    centers.push_back(c.y);
  }
  Tensor fp = position_encode(tape_.leaf({grid.q(), 2}, std::move(centers)));
  return mul_rowvec(fp, sentence);
}

Tensor Embedder::global_init(const Tensor& sentence) { return copy(sentence); }

}  // namespace nav
