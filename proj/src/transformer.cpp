#include "nav/transformer.hpp"

#include <cmath>

namespace nav {

Mask build_attention_mask(const TokenLayout& layout, const AdjacencyMatrix& adjacency) {
  if (adjacency.n != layout.hist)
    throw ShapeError("build_attention_mask: adjacency size " + std::to_string(adjacency.n) +
                     " does not match " + std::to_string(layout.hist) + " history tokens");
  for (int i = 0; i < adjacency.n; ++i)
    for (int j = i + 1; j < adjacency.n; ++j)
      if (adjacency.at(i, j) != adjacency.at(j, i))
        throw DomainError("build_attention_mask: adjacency is not symmetric at (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
  const int total = layout.total();
  Mask m = Mask::all_true(total, total);
  const int off = layout.hist_off();
  for (int i = 0; i < layout.hist; ++i)
    for (int j = 0; j < layout.hist; ++j)
      m.at(off + i, off + j) = (i == j) ? 1 : adjacency.at(i, j);
  return m;
}

Tensor attention_layer(ModelParams& mp, Tape& tape, const Tensor& tokens, const Mask& mask,
                       int layer_index, AttnCapture* capture) {
  const LayerIds& L = mp.layers[static_cast<size_t>(layer_index)];
  const int heads = mp.dims.heads;
  const int dh = mp.dims.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  auto P = [&](int pid) { return tape.param(mp.store, pid); };

  Tensor q = linear(tokens, P(L.wq), P(L.bq));
  Tensor k = linear(tokens, P(L.wk), P(L.bk));
  Tensor v = linear(tokens, P(L.wv), P(L.bv));

  std::vector<Tensor> head_outs;
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
    Tensor attn = masked_softmax(scores, mask);
    if (capture) capture->weights.push_back(attn.values());
    head_outs.push_back(matmul(attn, vh));
  }
  Tensor merged = concat_cols(head_outs);
  Tensor proj = linear(merged, P(L.wo), P(L.bo));
  Tensor x1 = layer_norm(add(tokens, proj), P(L.ln1_g), P(L.ln1_b));
  Tensor ff = linear(gelu(linear(x1, P(L.ff1_w), P(L.ff1_b))), P(L.ff2_w), P(L.ff2_b));
  return layer_norm(add(x1, ff), P(L.ln2_g), P(L.ln2_b));
}

StepResult forward_step(ModelParams& mp, Tape& tape, const StepCarry& carry,
                        const Tensor& instr_tokens, const Tensor& view_tokens,
                        const AdjacencyMatrix& adjacency, const AblationFlags& flags,
                        AttnCapture* capture) {
  const int m = instr_tokens.rows();
  const int n = view_tokens.rows();
  const int q = flags.no_ist ? 0 : carry.q;
  const int hist = carry.hist;
  if (!flags.no_ist && carry.q > 0 && !carry.targets.valid())
    throw ShapeError("forward_step: carry declares target tokens but none were provided");
  if (hist > 0 && (!carry.histories.valid() || carry.histories.rows() != hist))
    throw ShapeError("forward_step: history token count does not match the declared layout");

  TokenLayout layout{m, q, hist, n};
  std::vector<Tensor> parts;
  parts.push_back(as_row(carry.global));
  parts.push_back(instr_tokens);
  if (q > 0) parts.push_back(carry.targets);
  if (hist > 0) parts.push_back(carry.histories);
  parts.push_back(view_tokens);
  Tensor tokens = concat_rows(parts);

  AdjacencyMatrix eff = adjacency;
  if (flags.no_st) {
    eff = AdjacencyMatrix::make(hist);
    for (auto& x : eff.a) x = 1;
  }
  Mask mask = build_attention_mask(layout, eff);

  if (capture) {
    capture->tokens = layout.total();
    capture->layers = mp.dims.layers;
    capture->heads = mp.dims.heads;
    capture->weights.clear();
  }
  for (int l = 0; l < mp.dims.layers; ++l)
    tokens = attention_layer(mp, tape, tokens, mask, l, capture);

  StepResult out;
  out.global = row(tokens, 0);
  if (q > 0) out.targets = slice_rows(tokens, layout.target_off(), q);
  if (hist > 0) out.histories = slice_rows(tokens, layout.hist_off(), hist);
  out.views = slice_rows(tokens, layout.view_off(), n);
  return out;
}

}  // namespace nav
