#include "nav/kernels.hpp"

#include <atomic>
#include <vector>
#include <cmath>

namespace nav::kernels {

namespace {
std::atomic<bool> g_parallel{false};

constexpr double kGeluC0 = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC1 = 0.044715;
}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

namespace serial {

void matmul(const double* a, const double* b, double* out, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* orow = out + static_cast<std::int64_t>(i) * n;
    for (int j = 0; j < n; ++j) orow[j] = 0.0;
    const double* arow = a + static_cast<std::int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_acc_grad_a(const double* gout, const double* b, double* ga, int m, int k, int n) {
  // bt[j,p] = b[p,j]; the p-inner accumulation then vectorizes
  std::vector<double> bt(static_cast<size_t>(n) * k);
  for (int p = 0; p < k; ++p)
    for (int j = 0; j < n; ++j)
      bt[static_cast<size_t>(j) * k + p] = b[static_cast<std::int64_t>(p) * n + j];
  for (int i = 0; i < m; ++i) {
    const double* grow = gout + static_cast<std::int64_t>(i) * n;
    double* garow = ga + static_cast<std::int64_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const double gv = grow[j];
      const double* btrow = bt.data() + static_cast<size_t>(j) * k;
      for (int p = 0; p < k; ++p) garow[p] += gv * btrow[p];
    }
  }
}

void matmul_acc_grad_b(const double* a, const double* gout, double* gb, int m, int k, int n) {
  // contiguous reads via a transposed copy of a
  std::vector<double> at(static_cast<size_t>(m) * k);
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p)
      at[static_cast<size_t>(p) * m + i] = a[static_cast<std::int64_t>(i) * k + p];
  for (int p = 0; p < k; ++p) {
    double* gbrow = gb + static_cast<std::int64_t>(p) * n;
    const double* atrow = at.data() + static_cast<size_t>(p) * m;
    for (int i = 0; i < m; ++i) {
      const double av = atrow[i];
      const double* grow = gout + static_cast<std::int64_t>(i) * n;
      for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
    }
  }
}

void gelu(const double* x, double* y, std::int64_t count) {
  for (std::int64_t i = 0; i < count; ++i) {
    const double v = x[i];
    const double u = kGeluC0 * (v + kGeluC1 * v * v * v);
    y[i] = 0.5 * v * (1.0 + std::tanh(u));
  }
}

void gelu_acc_grad(const double* x, const double* gy, double* gx, std::int64_t count) {
  for (std::int64_t i = 0; i < count; ++i) {
    const double v = x[i];
    const double u = kGeluC0 * (v + kGeluC1 * v * v * v);
    const double t = std::tanh(u);
    const double du = kGeluC0 * (1.0 + 3.0 * kGeluC1 * v * v);
    gx[i] += gy[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
  }
}

int masked_softmax(const double* logits, const unsigned char* mask, double* out, int rows,
                   int cols) {
  for (int r = 0; r < rows; ++r) {
    const unsigned char* mrow = mask + static_cast<std::int64_t>(r) * cols;
    bool any = false;
    for (int c = 0; c < cols; ++c) any = any || (mrow[c] != 0);
    if (!any) return r;
  }
  for (int r = 0; r < rows; ++r) {
    const double* lrow = logits + static_cast<std::int64_t>(r) * cols;
    const unsigned char* mrow = mask + static_cast<std::int64_t>(r) * cols;
    double* orow = out + static_cast<std::int64_t>(r) * cols;
    double mx = -HUGE_VAL;
    for (int c = 0; c < cols; ++c)
      if (mrow[c] && lrow[c] > mx) mx = lrow[c];
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      if (mrow[c]) {
        orow[c] = std::exp(lrow[c] - mx);
        sum += orow[c];
      } else {
        orow[c] = 0.0;
      }
    }
    const double inv = 1.0 / sum;
    for (int c = 0; c < cols; ++c)
      if (mrow[c]) orow[c] *= inv;
  }
  return -1;
}

void masked_softmax_acc_grad(const double* probs, const unsigned char* mask, const double* gy,
                             double* glogits, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* prow = probs + static_cast<std::int64_t>(r) * cols;
    const unsigned char* mrow = mask + static_cast<std::int64_t>(r) * cols;
    const double* grow = gy + static_cast<std::int64_t>(r) * cols;
    double* glrow = glogits + static_cast<std::int64_t>(r) * cols;
    double dot = 0.0;
    for (int c = 0; c < cols; ++c)
      if (mrow[c]) dot += prow[c] * grow[c];
    for (int c = 0; c < cols; ++c)
      if (mrow[c]) glrow[c] += prow[c] * (grow[c] - dot);
  }
}

void layer_norm(const double* x, const double* gain, const double* bias, double eps, double* y,
                double* mean, double* inv_std, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* xrow = x + static_cast<std::int64_t>(r) * cols;
    double* yrow = y + static_cast<std::int64_t>(r) * cols;
    double mu = 0.0;
    for (int c = 0; c < cols; ++c) mu += xrow[c];
    mu /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double d = xrow[c] - mu;
      var += d * d;
    }
    var /= cols;
    const double is = 1.0 / std::sqrt(var + eps);
    mean[r] = mu;
    inv_std[r] = is;
    for (int c = 0; c < cols; ++c) yrow[c] = (xrow[c] - mu) * is * gain[c] + bias[c];
  }
}

void layer_norm_acc_grad(const double* x, const double* gain, const double* mean,
                         const double* inv_std, const double* gy, double* gx, double* ggain,
                         double* gbias, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* xrow = x + static_cast<std::int64_t>(r) * cols;
    const double* grow = gy + static_cast<std::int64_t>(r) * cols;
    double* gxrow = gx + static_cast<std::int64_t>(r) * cols;
    const double mu = mean[r];
    const double is = inv_std[r];
    double sum_g = 0.0, sum_gx = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double xh = (xrow[c] - mu) * is;
      const double gg = grow[c] * gain[c];
      sum_g += gg;
      sum_gx += gg * xh;
    }
    const double inv_n = 1.0 / cols;
    for (int c = 0; c < cols; ++c) {
      const double xh = (xrow[c] - mu) * is;
      const double gg = grow[c] * gain[c];
      gxrow[c] += is * (gg - inv_n * sum_g - xh * inv_n * sum_gx);
    }
  }
  // gain/bias gradients accumulate column-wise across rows
  for (int c = 0; c < cols; ++c) {
    double sg = 0.0, sb = 0.0;
    for (int r = 0; r < rows; ++r) {
      const std::int64_t idx = static_cast<std::int64_t>(r) * cols + c;
      const double xh = (x[idx] - mean[r]) * inv_std[r];
      sg += gy[idx] * xh;
      sb += gy[idx];
    }
    ggain[c] += sg;
    gbias[c] += sb;
  }
}

}  // namespace serial

#define NAV_DISPATCH(fn, ...) \
  (parallel_enabled() ? omp::fn(__VA_ARGS__) : serial::fn(__VA_ARGS__))

void matmul(const double* a, const double* b, double* out, int m, int k, int n) {
  NAV_DISPATCH(matmul, a, b, out, m, k, n);
}
void matmul_acc_grad_a(const double* gout, const double* b, double* ga, int m, int k, int n) {
  NAV_DISPATCH(matmul_acc_grad_a, gout, b, ga, m, k, n);
}
void matmul_acc_grad_b(const double* a, const double* gout, double* gb, int m, int k, int n) {
  NAV_DISPATCH(matmul_acc_grad_b, a, gout, gb, m, k, n);
}
void gelu(const double* x, double* y, std::int64_t count) { NAV_DISPATCH(gelu, x, y, count); }
void gelu_acc_grad(const double* x, const double* gy, double* gx, std::int64_t count) {
  NAV_DISPATCH(gelu_acc_grad, x, gy, gx, count);
}
int masked_softmax(const double* logits, const unsigned char* mask, double* out, int rows,
                   int cols) {
  return NAV_DISPATCH(masked_softmax, logits, mask, out, rows, cols);
}
void masked_softmax_acc_grad(const double* probs, const unsigned char* mask, const double* gy,
                             double* glogits, int rows, int cols) {
  NAV_DISPATCH(masked_softmax_acc_grad, probs, mask, gy, glogits, rows, cols);
}
void layer_norm(const double* x, const double* gain, const double* bias, double eps, double* y,
                double* mean, double* inv_std, int rows, int cols) {
  NAV_DISPATCH(layer_norm, x, gain, bias, eps, y, mean, inv_std, rows, cols);
}
void layer_norm_acc_grad(const double* x, const double* gain, const double* mean,
                         const double* inv_std, const double* gy, double* gx, double* ggain,
                         double* gbias, int rows, int cols) {
  NAV_DISPATCH(layer_norm_acc_grad, x, gain, mean, inv_std, gy, gx, ggain, gbias, rows, cols);
}

#undef NAV_DISPATCH

}  // namespace nav::kernels
