#pragma once

#include <vector>

#include "nav/model_params.hpp"
#include "nav/tensor.hpp"

namespace nav {

// Symmetric boolean adjacency over the history tokens' nodes.
struct AdjacencyMatrix {
  int n = 0;
  std::vector<unsigned char> a;

  static AdjacencyMatrix make(int n) { return {n, std::vector<unsigned char>(static_cast<size_t>(n) * n, 0)}; }
  unsigned char& at(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }
  unsigned char at(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }
};

// Token order is fixed: [global | instruction | targets | histories | views].
struct TokenLayout {
  int m = 0;     // instruction tokens
  int q = 0;     // target tokens
  int hist = 0;  // history tokens
  int n = 0;     // view tokens

  int total() const { return 1 + m + q + hist + n; }
  int instr_off() const { return 1; }
  int target_off() const { return 1 + m; }
  int hist_off() const { return 1 + m + q; }
  int view_off() const { return 1 + m + q + hist; }
};

// All-true mask except the history-history block, which is overwritten by the
// explored-graph adjacency with a forced-true diagonal. Throws DomainError on
// an asymmetric adjacency.
Mask build_attention_mask(const TokenLayout& layout, const AdjacencyMatrix& adjacency);

// Post-softmax attention weights, copied out for inspection in tests.
struct AttnCapture {
  int tokens = 0;
  int layers = 0;
  int heads = 0;
  std::vector<std::vector<double>> weights;  // [layer*heads + head] -> N*N row-major

  const std::vector<double>& at(int layer, int head) const {
    return weights[static_cast<size_t>(layer) * heads + head];
  }
};

// One multi-head attention block: masked softmax attention, output
// projection, residual + layer norm, feed-forward (4H, GELU), residual +
// layer norm.
Tensor attention_layer(ModelParams& mp, Tape& tape, const Tensor& tokens, const Mask& mask,
                       int layer_index, AttnCapture* capture = nullptr);

struct StepCarry {
  Tensor global;     // [H]
  Tensor targets;    // [q x H]; invalid when IST is off
  Tensor histories;  // [hist x H]; invalid when empty
  int hist = 0;
  int q = 0;
};

struct StepResult {
  Tensor global;     // [H]
  Tensor targets;    // [q x H]; invalid when IST is off
  Tensor histories;  // [hist x H]; invalid when empty
  Tensor views;      // [n x H]
};

// Stacks the five token families, runs every layer under the topology mask,
// and splits the outputs. Instruction outputs are discarded (the inputs are
// reused next step).
StepResult forward_step(ModelParams& mp, Tape& tape, const StepCarry& carry,
                        const Tensor& instr_tokens, const Tensor& view_tokens,
                        const AdjacencyMatrix& adjacency, const AblationFlags& flags,
                        AttnCapture* capture = nullptr);

}  // namespace nav
