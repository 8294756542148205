#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nav/errors.hpp"

namespace nav {

class Tape;
class ParamStore;

// Lightweight handle into a Tape. Rank 0 (scalar), 1 (vector) and 2 (matrix)
// are supported; all storage is row-major 64-bit floats.
struct Tensor {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const std::vector<int>& shape() const;
  int rank() const;
  std::int64_t numel() const;
  int rows() const;  // rank-2 only
  int cols() const;  // rank-2 only
  int dim() const;   // rank-1 only
  const std::vector<double>& values() const;
  const std::vector<double>& grad() const;  // empty until backward touches it
  double scalar() const;                    // numel()==1 only
};

// Boolean mask for attention / masked softmax. Not differentiated.
struct Mask {
  int rows = 0;
  int cols = 0;
  std::vector<unsigned char> on;

  static Mask all_true(int rows, int cols) { return Mask{rows, cols, std::vector<unsigned char>(static_cast<size_t>(rows) * cols, 1)}; }
  unsigned char& at(int r, int c) { return on[static_cast<size_t>(r) * cols + c]; }
  unsigned char at(int r, int c) const { return on[static_cast<size_t>(r) * cols + c]; }
};

// Records every operation in order; backward replays the record in exact
// reverse. One tape per episode; parameters live outside in a ParamStore and
// appear on the tape as cached leaf nodes whose gradients are merged back
// explicitly (single-writer phase).
class Tape {
 public:
  Tensor leaf(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
  Tensor scalar_leaf(double v, bool requires_grad = false);
  Tensor param(ParamStore& store, int pid);

  // Propagates d(loss)/d(node) to every node recorded at or before loss.
  // Gradients accumulate additively across calls until clear().
  void backward(const Tensor& loss);

  // Adds this tape's parameter gradients into the store, in parameter order.
  void merge_param_grads(ParamStore& store) const;

  void clear();
  int node_count() const { return static_cast<int>(nodes_.size()); }

  // When true (default) every op result is scanned for non-finite values.
  bool finite_checks = true;

  // --- internal surface used by the op implementations ---
  struct Node {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily during backward
    bool requires_grad = false;
    int param_id = -1;
    std::function<void(Tape&)> back;  // null for leaves
  };
  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  int emplace(std::vector<int> shape, std::vector<double> values, bool requires_grad,
              std::function<void(Tape&)> back, const char* opname);
  double* grad_ptr(int id);  // allocates zero-filled grad on first use

 private:
  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;  // pid -> node id
};

// ---- operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor scale(const Tensor& a, double s);

// matrix [R x D] combined row-by-row with vector [D]
Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor mul_rowvec(const Tensor& m, const Tensor& v);

Tensor masked_softmax(const Tensor& logits, const Mask& mask);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor gelu(const Tensor& x);
Tensor nll_from_distribution(const Tensor& probs, int target_index);

Tensor sum(const Tensor& x);
Tensor mean_rows(const Tensor& x);  // [R x D] -> [D]

Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, int begin, int count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, int begin, int count);
Tensor row(const Tensor& x, int r);     // [R x D] -> [D]
Tensor as_row(const Tensor& v);         // [D] -> [1 x D]
Tensor flatten(const Tensor& x);        // any -> rank-1
Tensor copy(const Tensor& x);           // value copy, gradient passes through
Tensor detach(const Tensor& x);         // value copy, gradient severed

}  // namespace nav
