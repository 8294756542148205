#include "nav/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "nav/kernels.hpp"
#include "nav/params.hpp"

namespace nav {

namespace {

std::int64_t numel_of(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] void shape_fail(const char* op, const std::vector<int>& a, const std::vector<int>& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

void require_same_tape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.tape != b.tape) throw ShapeError(std::string(op) + ": operands from different tapes");
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Interpret a tensor as a matrix: rank-1 [k] reads as [1 x k].
void as_matrix(const Tensor& t, int& r, int& c) {
  const auto& s = t.shape();
  if (s.size() == 2) {
    r = s[0];
    c = s[1];
  } else if (s.size() == 1) {
    r = 1;
    c = s[0];
  } else {
    throw ShapeError("expected rank-1 or rank-2 tensor, got " + shape_str(s));
  }
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

const std::vector<int>& Tensor::shape() const { return tape->node(id).shape; }
int Tensor::rank() const { return static_cast<int>(shape().size()); }
std::int64_t Tensor::numel() const { return numel_of(shape()); }
int Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows(): tensor is not rank-2");
  return shape()[0];
}
int Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols(): tensor is not rank-2");
  return shape()[1];
}
int Tensor::dim() const {
  if (rank() != 1) throw ShapeError("dim(): tensor is not rank-1");
  return shape()[0];
}
const std::vector<double>& Tensor::values() const { return tape->node(id).value; }
const std::vector<double>& Tensor::grad() const { return tape->node(id).grad; }
double Tensor::scalar() const {
  if (numel() != 1) throw ShapeError("scalar(): tensor has more than one element");
  return values()[0];
}

// ---- Tape ------------------------------------------------------------------

int Tape::emplace(std::vector<int> shape, std::vector<double> values, bool requires_grad,
                  std::function<void(Tape&)> back, const char* opname) {
  if (numel_of(shape) != static_cast<std::int64_t>(values.size()))
    throw ShapeError(std::string(opname) + ": value count does not match shape " +
                     shape_str(shape));
  if (finite_checks && !all_finite(values))
    throw DivergenceError(std::string("non-finite value produced by ") + opname);
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(values);
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::leaf(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  int id = emplace(std::move(shape), std::move(values), requires_grad, nullptr, "leaf");
  return Tensor{this, id};
}

Tensor Tape::scalar_leaf(double v, bool requires_grad) {
  return leaf({}, {v}, requires_grad);
}

Tensor Tape::param(ParamStore& store, int pid) {
  auto it = param_nodes_.find(pid);
  if (it != param_nodes_.end()) return Tensor{this, it->second};
  const auto& p = store.at(pid);
  int id = emplace(p.shape, p.value, true, nullptr, "param");
  nodes_[static_cast<size_t>(id)].param_id = pid;
  param_nodes_.emplace(pid, id);
  return Tensor{this, id};
}

double* Tape::grad_ptr(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad.data();
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape != this) throw ShapeError("backward: loss from a different tape");
  const Node& ln = node(loss.id);
  if (numel_of(ln.shape) != 1)
    throw ShapeError("backward: loss must be scalar, got " + shape_str(ln.shape));
  grad_ptr(loss.id)[0] += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.back && n.requires_grad && !n.grad.empty()) n.back(*this);
  }
}

void Tape::merge_param_grads(ParamStore& store) const {
  for (int pid = 0; pid < store.count(); ++pid) {
    auto it = param_nodes_.find(pid);
    if (it == param_nodes_.end()) continue;
    const Node& n = node(it->second);
    if (n.grad.empty()) continue;
    auto& g = store.at(pid).grad;
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  }
}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
}

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_same_tape("matmul", a, b);
  Tape& t = *a.tape;
  int m, k, k2, n;
  as_matrix(a, m, k);
  as_matrix(b, k2, n);
  if (b.rank() != 2) throw ShapeError("matmul: right operand must be rank-2");
  if (k != k2) shape_fail("matmul", a.shape(), b.shape());

  std::vector<double> out(static_cast<size_t>(m) * n);
  kernels::matmul(a.values().data(), b.values().data(), out.data(), m, k, n);

  const bool rg = t.node(a.id).requires_grad || t.node(b.id).requires_grad;
  std::vector<int> oshape = (a.rank() == 1) ? std::vector<int>{n} : std::vector<int>{m, n};
  int aid = a.id, bid = b.id;
  int id = t.emplace(std::move(oshape), std::move(out), rg, nullptr, "matmul");
  if (rg) {
    t.node(id).back = [aid, bid, id, m, k, n](Tape& tp) {
      const double* gout = tp.node(id).grad.data();
      if (tp.node(aid).requires_grad)
        kernels::matmul_acc_grad_a(gout, tp.node(bid).value.data(), tp.grad_ptr(aid), m, k, n);
      if (tp.node(bid).requires_grad)
        kernels::matmul_acc_grad_b(tp.node(aid).value.data(), gout, tp.grad_ptr(bid), m, k, n);
    };
  }
  return Tensor{&t, id};
}

Tensor transpose(const Tensor& a) {
  Tape& t = *a.tape;
  if (a.rank() != 2) throw ShapeError("transpose: tensor is not rank-2");
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(static_cast<size_t>(r) * c);
  const auto& av = a.values();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<size_t>(j) * r + i] = av[static_cast<size_t>(i) * c + j];
  const bool rg = t.node(a.id).requires_grad;
  int aid = a.id;
  int id = t.emplace({c, r}, std::move(out), rg, nullptr, "transpose");
  if (rg) {
    t.node(id).back = [aid, id, r, c](Tape& tp) {
      const auto& g = tp.node(id).grad;
      double* ga = tp.grad_ptr(aid);
      for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) ga[static_cast<size_t>(i) * c + j] += g[static_cast<size_t>(j) * r + i];
    };
  }
  return Tensor{&t, id};
}

namespace {

enum class EwKind { Add, Sub, Mul };

Tensor elementwise_binary(const char* name, EwKind kind, const Tensor& a, const Tensor& b) {
  require_same_tape(name, a, b);
  Tape& t = *a.tape;
  if (a.shape() != b.shape()) shape_fail(name, a.shape(), b.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  switch (kind) {
    case EwKind::Add:
      for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
      break;
    case EwKind::Sub:
      for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
      break;
    case EwKind::Mul:
      for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
      break;
  }
  const bool rg = t.node(a.id).requires_grad || t.node(b.id).requires_grad;
  int aid = a.id, bid = b.id;
  int id = t.emplace(a.shape(), std::move(out), rg, nullptr, name);
  if (rg) {
    t.node(id).back = [aid, bid, id, kind](Tape& tp) {
      const auto& g = tp.node(id).grad;
      if (tp.node(aid).requires_grad) {
        double* ga = tp.grad_ptr(aid);
        if (kind == EwKind::Mul) {
          const auto& bv2 = tp.node(bid).value;
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
        } else {
          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
      }
      if (tp.node(bid).requires_grad) {
        double* gb = tp.grad_ptr(bid);
        if (kind == EwKind::Mul) {
          const auto& av2 = tp.node(aid).value;
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
        } else if (kind == EwKind::Sub) {
          for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        } else {
          for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
      }
    };
  }
  return Tensor{&t, id};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise_binary("add", EwKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise_binary("sub", EwKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise_binary("mul", EwKind::Mul, a, b); }

Tensor scale(const Tensor& a, double s) {
  Tape& t = *a.tape;
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  const bool rg = t.node(a.id).requires_grad;
  int aid = a.id;
  int id = t.emplace(a.shape(), std::move(out), rg, nullptr, "scale");
  if (rg) {
    t.node(id).back = [aid, id, s](Tape& tp) {
      const auto& g = tp.node(id).grad;
      double* ga = tp.grad_ptr(aid);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    };
  }
  return Tensor{&t, id};
}

namespace {

Tensor rowvec_binary(const char* name, bool is_mul, const Tensor& m, const Tensor& v) {
  require_same_tape(name, m, v);
  Tape& t = *m.tape;
  if (m.rank() != 2 || v.rank() != 1 || m.cols() != v.dim()) shape_fail(name, m.shape(), v.shape());
  const int R = m.rows(), D = m.cols();
  const auto& mv = m.values();
  const auto& vv = v.values();
  std::vector<double> out(mv.size());
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < D; ++c) {
      const size_t i = static_cast<size_t>(r) * D + c;
      out[i] = is_mul ? mv[i] * vv[c] : mv[i] + vv[c];
    }
  const bool rg = t.node(m.id).requires_grad || t.node(v.id).requires_grad;
  int mid = m.id, vid = v.id;
  int id = t.emplace(m.shape(), std::move(out), rg, nullptr, name);
  if (rg) {
    t.node(id).back = [mid, vid, id, R, D, is_mul](Tape& tp) {
      const auto& g = tp.node(id).grad;
      if (tp.node(mid).requires_grad) {
        double* gm = tp.grad_ptr(mid);
        if (is_mul) {
          const auto& vv2 = tp.node(vid).value;
          for (int r = 0; r < R; ++r)
            for (int c = 0; c < D; ++c) {
              const size_t i = static_cast<size_t>(r) * D + c;
              gm[i] += g[i] * vv2[c];
            }
        } else {
          for (size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
        }
      }
      if (tp.node(vid).requires_grad) {
        double* gv = tp.grad_ptr(vid);
        if (is_mul) {
          const auto& mv2 = tp.node(mid).value;
          for (int c = 0; c < D; ++c) {
            double s = 0.0;
            for (int r = 0; r < R; ++r) {
              const size_t i = static_cast<size_t>(r) * D + c;
              s += g[i] * mv2[i];
            }
            gv[c] += s;
          }
        } else {
          for (int c = 0; c < D; ++c) {
            double s = 0.0;
            for (int r = 0; r < R; ++r) s += g[static_cast<size_t>(r) * D + c];
            gv[c] += s;
          }
        }
      }
    };
  }
  return Tensor{&t, id};
}

}  // namespace

Tensor add_rowvec(const Tensor& m, const Tensor& v) { return rowvec_binary("add_rowvec", false, m, v); }
Tensor mul_rowvec(const Tensor& m, const Tensor& v) { return rowvec_binary("mul_rowvec", true, m, v); }

Tensor masked_softmax(const Tensor& logits, const Mask& mask) {
  Tape& t = *logits.tape;
  int R, C;
  as_matrix(logits, R, C);
  if (mask.rows != R || mask.cols != C)
    throw ShapeError("masked_softmax: mask " + shape_str({mask.rows, mask.cols}) +
                     " does not match logits " + shape_str(logits.shape()));
  std::vector<double> out(static_cast<size_t>(R) * C);
  int bad = kernels::masked_softmax(logits.values().data(), mask.on.data(), out.data(), R, C);
  if (bad >= 0)
    throw DomainError("masked_softmax: fully masked row " + std::to_string(bad) +
                      " (malformed attention mask)");
  const bool rg = t.node(logits.id).requires_grad;
  int lid = logits.id;
  std::vector<unsigned char> mcopy = mask.on;
  int id = t.emplace(logits.shape(), std::move(out), rg, nullptr, "masked_softmax");
  if (rg) {
    t.node(id).back = [lid, id, R, C, mc = std::move(mcopy)](Tape& tp) {
      kernels::masked_softmax_acc_grad(tp.node(id).value.data(), mc.data(),
                                       tp.node(id).grad.data(), tp.grad_ptr(lid), R, C);
    };
  }
  return Tensor{&t, id};
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_same_tape("layer_norm", x, gain);
  require_same_tape("layer_norm", x, bias);
  Tape& t = *x.tape;
  int R, C;
  as_matrix(x, R, C);
  if (gain.rank() != 1 || bias.rank() != 1 || gain.dim() != C || bias.dim() != C)
    throw ShapeError("layer_norm: gain/bias must be rank-1 of size " + std::to_string(C));
  std::vector<double> out(static_cast<size_t>(R) * C);
  std::vector<double> mean(R), inv_std(R);
  kernels::layer_norm(x.values().data(), gain.values().data(), bias.values().data(), eps,
                      out.data(), mean.data(), inv_std.data(), R, C);
  const bool rg = t.node(x.id).requires_grad || t.node(gain.id).requires_grad ||
                  t.node(bias.id).requires_grad;
  int xid = x.id, gid = gain.id, bid = bias.id;
  int id = t.emplace(x.shape(), std::move(out), rg, nullptr, "layer_norm");
  if (rg) {
    t.node(id).back = [xid, gid, bid, id, R, C, mn = std::move(mean),
                       is = std::move(inv_std)](Tape& tp) {
      // The kernel accumulates gx, ggain and gbias together; feed scratch
      // buffers for the operands that do not require gradients.
      std::vector<double> scratch_x, scratch_g, scratch_b;
      double* gx = tp.node(xid).requires_grad ? tp.grad_ptr(xid)
                                              : (scratch_x.assign(static_cast<size_t>(R) * C, 0.0),
                                                 scratch_x.data());
      double* gg = tp.node(gid).requires_grad
                       ? tp.grad_ptr(gid)
                       : (scratch_g.assign(static_cast<size_t>(C), 0.0), scratch_g.data());
      double* gb = tp.node(bid).requires_grad
                       ? tp.grad_ptr(bid)
                       : (scratch_b.assign(static_cast<size_t>(C), 0.0), scratch_b.data());
      kernels::layer_norm_acc_grad(tp.node(xid).value.data(), tp.node(gid).value.data(), mn.data(),
                                   is.data(), tp.node(id).grad.data(), gx, gg, gb, R, C);
    };
  }
  return Tensor{&t, id};
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  Tensor y = matmul(x, weight);
  if (y.rank() == 1) {
    if (bias.rank() != 1 || bias.dim() != y.dim())
      shape_fail("linear", y.shape(), bias.shape());
    return add(y, bias);
  }
  return add_rowvec(y, bias);
}

Tensor gelu(const Tensor& x) {
  Tape& t = *x.tape;
  std::vector<double> out(x.values().size());
  kernels::gelu(x.values().data(), out.data(), static_cast<std::int64_t>(out.size()));
  const bool rg = t.node(x.id).requires_grad;
  int xid = x.id;
  int id = t.emplace(x.shape(), std::move(out), rg, nullptr, "gelu");
  if (rg) {
    t.node(id).back = [xid, id](Tape& tp) {
      const auto& g = tp.node(id).grad;
      kernels::gelu_acc_grad(tp.node(xid).value.data(), g.data(), tp.grad_ptr(xid),
                             static_cast<std::int64_t>(g.size()));
    };
  }
  return Tensor{&t, id};
}

Tensor nll_from_distribution(const Tensor& probs, int target_index) {
  Tape& t = *probs.tape;
  if (probs.rank() != 1)
    throw ShapeError("nll_from_distribution: probs must be rank-1, got " +
                     shape_str(probs.shape()));
  const int K = probs.dim();
  if (target_index < 0 || target_index >= K)
    throw ShapeError("nll_from_distribution: target index " + std::to_string(target_index) +
                     " out of range [0," + std::to_string(K) + ")");
  const auto& pv = probs.values();
  double s = 0.0;
  for (double p : pv) s += p;
  if (std::abs(s - 1.0) > 1e-6)
    throw DomainError("nll_from_distribution: probabilities sum to " + std::to_string(s));
  const double p = pv[static_cast<size_t>(target_index)];
  if (p == 0.0)
    throw DomainError("nll_from_distribution: target " + std::to_string(target_index) +
                      " has zero probability (masked out)");
  const bool rg = t.node(probs.id).requires_grad;
  int pid = probs.id;
  int id = t.emplace({}, {-std::log(p)}, rg, nullptr, "nll_from_distribution");
  if (rg) {
    t.node(id).back = [pid, id, target_index](Tape& tp) {
      const double g = tp.node(id).grad[0];
      const double pv2 = tp.node(pid).value[static_cast<size_t>(target_index)];
      tp.grad_ptr(pid)[static_cast<size_t>(target_index)] += -g / pv2;
    };
  }
  return Tensor{&t, id};
}

Tensor sum(const Tensor& x) {
  Tape& t = *x.tape;
  double s = 0.0;
  for (double v : x.values()) s += v;
  const bool rg = t.node(x.id).requires_grad;
  int xid = x.id;
  int id = t.emplace({}, {s}, rg, nullptr, "sum");
  if (rg) {
    t.node(id).back = [xid, id](Tape& tp) {
      const double g = tp.node(id).grad[0];
      double* gx = tp.grad_ptr(xid);
      const size_t n = tp.node(xid).value.size();
      for (size_t i = 0; i < n; ++i) gx[i] += g;
    };
  }
  return Tensor{&t, id};
}

Tensor mean_rows(const Tensor& x) {
  Tape& t = *x.tape;
  if (x.rank() != 2) throw ShapeError("mean_rows: tensor is not rank-2");
  const int R = x.rows(), C = x.cols();
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(C), 0.0);
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) out[static_cast<size_t>(c)] += xv[static_cast<size_t>(r) * C + c];
  for (int c = 0; c < C; ++c) out[static_cast<size_t>(c)] /= R;
  const bool rg = t.node(x.id).requires_grad;
  int xid = x.id;
  int id = t.emplace({C}, std::move(out), rg, nullptr, "mean_rows");
  if (rg) {
    t.node(id).back = [xid, id, R, C](Tape& tp) {
      const auto& g = tp.node(id).grad;
      double* gx = tp.grad_ptr(xid);
      const double inv = 1.0 / R;
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) gx[static_cast<size_t>(r) * C + c] += g[static_cast<size_t>(c)] * inv;
    };
  }
  return Tensor{&t, id};
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Tape& t = *parts[0].tape;
  int C = -1;
  int R = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    require_same_tape("concat_rows", parts[0], p);
    int pr, pc;
    as_matrix(p, pr, pc);
    if (C < 0) C = pc;
    if (pc != C) shape_fail("concat_rows", parts[0].shape(), p.shape());
    R += pr;
    rg = rg || t.node(p.id).requires_grad;
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(R) * C);
  std::vector<int> ids;
  std::vector<int> part_rows;
  for (const Tensor& p : parts) {
    const auto& v = p.values();
    out.insert(out.end(), v.begin(), v.end());
    ids.push_back(p.id);
    int pr, pc;
    as_matrix(p, pr, pc);
    part_rows.push_back(pr);
  }
  int id = t.emplace({R, C}, std::move(out), rg, nullptr, "concat_rows");
  if (rg) {
    t.node(id).back = [ids, part_rows, id, C](Tape& tp) {
      const auto& g = tp.node(id).grad;
      size_t off = 0;
      for (size_t k = 0; k < ids.size(); ++k) {
        const size_t n = static_cast<size_t>(part_rows[k]) * C;
        if (tp.node(ids[k]).requires_grad) {
          double* gp = tp.grad_ptr(ids[k]);
          for (size_t i = 0; i < n; ++i) gp[i] += g[off + i];
        }
        off += n;
      }
    };
  }
  return Tensor{&t, id};
}

Tensor slice_rows(const Tensor& x, int begin, int count) {
  Tape& t = *x.tape;
  if (x.rank() != 2) throw ShapeError("slice_rows: tensor is not rank-2");
  const int R = x.rows(), C = x.cols();
  if (begin < 0 || count < 0 || begin + count > R)
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") out of " + std::to_string(R) + " rows");
  const auto& xv = x.values();
  std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin) * C,
                          xv.begin() + static_cast<std::ptrdiff_t>(begin + count) * C);
  const bool rg = t.node(x.id).requires_grad;
  int xid = x.id;
  int id = t.emplace({count, C}, std::move(out), rg, nullptr, "slice_rows");
  if (rg) {
    t.node(id).back = [xid, id, begin, count, C](Tape& tp) {
      const auto& g = tp.node(id).grad;
      double* gx = tp.grad_ptr(xid);
      for (size_t i = 0; i < static_cast<size_t>(count) * C; ++i)
        gx[static_cast<size_t>(begin) * C + i] += g[i];
    };
  }
  return Tensor{&t, id};
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Tape& t = *parts[0].tape;
  const int R = parts[0].rows();
  int C = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    require_same_tape("concat_cols", parts[0], p);
    if (p.rank() != 2 || p.rows() != R) shape_fail("concat_cols", parts[0].shape(), p.shape());
    C += p.cols();
    rg = rg || t.node(p.id).requires_grad;
  }
  std::vector<double> out(static_cast<size_t>(R) * C);
  std::vector<int> ids;
  std::vector<int> widths;
  int coff = 0;
  for (const Tensor& p : parts) {
    const int w = p.cols();
    const auto& v = p.values();
    for (int r = 0; r < R; ++r)
      std::memcpy(out.data() + static_cast<size_t>(r) * C + coff, v.data() + static_cast<size_t>(r) * w,
                  sizeof(double) * static_cast<size_t>(w));
    ids.push_back(p.id);
    widths.push_back(w);
    coff += w;
  }
  int id = t.emplace({R, C}, std::move(out), rg, nullptr, "concat_cols");
  if (rg) {
    t.node(id).back = [ids, widths, id, R, C](Tape& tp) {
      const auto& g = tp.node(id).grad;
      int off = 0;
      for (size_t k = 0; k < ids.size(); ++k) {
        const int w = widths[k];
        if (tp.node(ids[k]).requires_grad) {
          double* gp = tp.grad_ptr(ids[k]);
          for (int r = 0; r < R; ++r)
            for (int c = 0; c < w; ++c)
              gp[static_cast<size_t>(r) * w + c] += g[static_cast<size_t>(r) * C + off + c];
        }
        off += w;
      }
    };
  }
  return Tensor{&t, id};
}

Tensor slice_cols(const Tensor& x, int begin, int count) {
  Tape& t = *x.tape;
  if (x.rank() != 2) throw ShapeError("slice_cols: tensor is not rank-2");
  const int R = x.rows(), C = x.cols();
  if (begin < 0 || count < 0 || begin + count > C)
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," +
                     std::to_string(begin + count) + ") out of " + std::to_string(C) + " cols");
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(R) * count);
  for (int r = 0; r < R; ++r)
    std::memcpy(out.data() + static_cast<size_t>(r) * count,
                xv.data() + static_cast<size_t>(r) * C + begin, sizeof(double) * static_cast<size_t>(count));
  const bool rg = t.node(x.id).requires_grad;
  int xid = x.id;
  int id = t.emplace({R, count}, std::move(out), rg, nullptr, "slice_cols");
  if (rg) {
    t.node(id).back = [xid, id, begin, count, R, C](Tape& tp) {
      const auto& g = tp.node(id).grad;
      double* gx = tp.grad_ptr(xid);
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < count; ++c)
          gx[static_cast<size_t>(r) * C + begin + c] += g[static_cast<size_t>(r) * count + c];
    };
  }
  return Tensor{&t, id};
}

Tensor row(const Tensor& x, int r) { return flatten(slice_rows(x, r, 1)); }

Tensor as_row(const Tensor& v) {
  Tape& t = *v.tape;
  if (v.rank() != 1) throw ShapeError("as_row: tensor is not rank-1");
  const int D = v.dim();
  const bool rg = t.node(v.id).requires_grad;
  int vid = v.id;
  int id = t.emplace({1, D}, v.values(), rg, nullptr, "as_row");
  if (rg) {
    t.node(id).back = [vid, id](Tape& tp) {
      const auto& g = tp.node(id).grad;
      double* gv = tp.grad_ptr(vid);
      for (size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    };
  }
  return Tensor{&t, id};
}

Tensor flatten(const Tensor& x) {
  Tape& t = *x.tape;
  const int n = static_cast<int>(x.numel());
  const bool rg = t.node(x.id).requires_grad;
  int xid = x.id;
  int id = t.emplace({n}, x.values(), rg, nullptr, "flatten");
  if (rg) {
    t.node(id).back = [xid, id](Tape& tp) {
      const auto& g = tp.node(id).grad;
      double* gx = tp.grad_ptr(xid);
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    };
  }
  return Tensor{&t, id};
}

Tensor copy(const Tensor& x) {
  Tape& t = *x.tape;
  const bool rg = t.node(x.id).requires_grad;
  int xid = x.id;
  int id = t.emplace(x.shape(), x.values(), rg, nullptr, "copy");
  if (rg) {
    t.node(id).back = [xid, id](Tape& tp) {
      const auto& g = tp.node(id).grad;
      double* gx = tp.grad_ptr(xid);
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    };
  }
  return Tensor{&t, id};
}

Tensor detach(const Tensor& x) {
  Tape& t = *x.tape;
  int id = t.emplace(x.shape(), x.values(), false, nullptr, "detach");
  return Tensor{&t, id};
}

}  // namespace nav
