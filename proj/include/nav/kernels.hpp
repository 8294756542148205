#pragma once

#include <cstdint>

// Dense inner loops shared by the tensor engine. Every kernel exists twice:
// a serial reference under kernels::serial and an OpenMP version under
// kernels::omp. The OpenMP versions assign each output element to exactly
// one thread and keep the per-element accumulation order identical to the
// serial code, so both produce bitwise-identical results for any thread
// count. The unprefixed wrappers dispatch on the process-wide parallel flag.

namespace nav::kernels {

bool parallel_enabled();
void set_parallel(bool on);

namespace serial {

// out[m x n] = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* out, int m, int k, int n);
// ga[m x k] += gout[m x n] * b^T
void matmul_acc_grad_a(const double* gout, const double* b, double* ga, int m, int k, int n);
// gb[k x n] += a^T * gout[m x n]
void matmul_acc_grad_b(const double* a, const double* gout, double* gb, int m, int k, int n);

// tanh-approximation GELU, elementwise
void gelu(const double* x, double* y, std::int64_t count);
void gelu_acc_grad(const double* x, const double* gy, double* gx, std::int64_t count);

// Row-wise softmax over unmasked entries only; masked outputs are exact 0.0.
// Returns the index of the first fully-masked row, or -1 if none (in which
// case all rows were computed).
int masked_softmax(const double* logits, const unsigned char* mask, double* out, int rows,
                   int cols);
void masked_softmax_acc_grad(const double* probs, const unsigned char* mask, const double* gy,
                             double* glogits, int rows, int cols);

// Row-wise layer normalization; mean/inv_std (one per row) are written for
// the backward pass.
void layer_norm(const double* x, const double* gain, const double* bias, double eps, double* y,
                double* mean, double* inv_std, int rows, int cols);
void layer_norm_acc_grad(const double* x, const double* gain, const double* mean,
                         const double* inv_std, const double* gy, double* gx, double* ggain,
                         double* gbias, int rows, int cols);

}  // namespace serial

namespace omp {

void matmul(const double* a, const double* b, double* out, int m, int k, int n);
void matmul_acc_grad_a(const double* gout, const double* b, double* ga, int m, int k, int n);
void matmul_acc_grad_b(const double* a, const double* gout, double* gb, int m, int k, int n);
void gelu(const double* x, double* y, std::int64_t count);
void gelu_acc_grad(const double* x, const double* gy, double* gx, std::int64_t count);
int masked_softmax(const double* logits, const unsigned char* mask, double* out, int rows,
                   int cols);
void masked_softmax_acc_grad(const double* probs, const unsigned char* mask, const double* gy,
                             double* glogits, int rows, int cols);
void layer_norm(const double* x, const double* gain, const double* bias, double eps, double* y,
                double* mean, double* inv_std, int rows, int cols);
void layer_norm_acc_grad(const double* x, const double* gain, const double* mean,
                         const double* inv_std, const double* gy, double* gx, double* ggain,
                         double* gbias, int rows, int cols);

}  // namespace omp

// Dispatching wrappers.
void matmul(const double* a, const double* b, double* out, int m, int k, int n);
void matmul_acc_grad_a(const double* gout, const double* b, double* ga, int m, int k, int n);
void matmul_acc_grad_b(const double* a, const double* gout, double* gb, int m, int k, int n);
void gelu(const double* x, double* y, std::int64_t count);
void gelu_acc_grad(const double* x, const double* gy, double* gx, std::int64_t count);
int masked_softmax(const double* logits, const unsigned char* mask, double* out, int rows,
                   int cols);
void masked_softmax_acc_grad(const double* probs, const unsigned char* mask, const double* gy,
                             double* glogits, int rows, int cols);
void layer_norm(const double* x, const double* gain, const double* bias, double eps, double* y,
                double* mean, double* inv_std, int rows, int cols);
void layer_norm_acc_grad(const double* x, const double* gain, const double* mean,
                         const double* inv_std, const double* gy, double* gx, double* ggain,
                         double* gbias, int rows, int cols);

}  // namespace nav::kernels
