// Times the serial reference kernels against the OpenMP versions and checks
// that both produce bitwise-identical outputs.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nav/kernels.hpp"

namespace {

using Clock = std::chrono::steady_clock;
namespace ks = nav::kernels::serial;
namespace ko = nav::kernels::omp;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<double> randu(std::mt19937_64& rng, size_t n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    f();
    best = std::min(best, ms_since(t0));
  }
  return best;
}

void bench_matmul(int m, int k, int n, int reps) {
  std::mt19937_64 rng(42);
  auto a = randu(rng, static_cast<size_t>(m) * k);
  auto b = randu(rng, static_cast<size_t>(k) * n);
  std::vector<double> out_s(static_cast<size_t>(m) * n), out_p(out_s.size());
  const double ts = time_best_of(reps, [&] { ks::matmul(a.data(), b.data(), out_s.data(), m, k, n); });
  const double tp = time_best_of(reps, [&] { ko::matmul(a.data(), b.data(), out_p.data(), m, k, n); });
  std::printf("matmul %4dx%4dx%4d   serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   %s\n", m, k,
              n, ts, tp, ts / tp, bitwise_equal(out_s, out_p) ? "bitwise-equal" : "MISMATCH");
}

void bench_softmax(int rows, int cols, int reps) {
  std::mt19937_64 rng(43);
  auto logits = randu(rng, static_cast<size_t>(rows) * cols);
  std::vector<unsigned char> mask(static_cast<size_t>(rows) * cols, 1);
  for (size_t i = 0; i < mask.size(); i += 3) mask[i] = 0;
  for (int r = 0; r < rows; ++r) mask[static_cast<size_t>(r) * cols] = 1;
  std::vector<double> out_s(logits.size()), out_p(logits.size());
  const double ts = time_best_of(
      reps, [&] { ks::masked_softmax(logits.data(), mask.data(), out_s.data(), rows, cols); });
  const double tp = time_best_of(
      reps, [&] { ko::masked_softmax(logits.data(), mask.data(), out_p.data(), rows, cols); });
  std::printf("softmax %5dx%4d      serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   %s\n", rows,
              cols, ts, tp, ts / tp, bitwise_equal(out_s, out_p) ? "bitwise-equal" : "MISMATCH");
}

void bench_layer_norm(int rows, int cols, int reps) {
  std::mt19937_64 rng(44);
  auto x = randu(rng, static_cast<size_t>(rows) * cols);
  auto gain = randu(rng, static_cast<size_t>(cols));
  auto bias = randu(rng, static_cast<size_t>(cols));
  std::vector<double> y_s(x.size()), y_p(x.size()), mu(static_cast<size_t>(rows)),
      is(static_cast<size_t>(rows));
  const double ts = time_best_of(reps, [&] {
    ks::layer_norm(x.data(), gain.data(), bias.data(), 1e-5, y_s.data(), mu.data(), is.data(),
                   rows, cols);
  });
  const double tp = time_best_of(reps, [&] {
    ko::layer_norm(x.data(), gain.data(), bias.data(), 1e-5, y_p.data(), mu.data(), is.data(),
                   rows, cols);
  });
  std::printf("layernorm %5dx%4d    serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   %s\n", rows,
              cols, ts, tp, ts / tp, bitwise_equal(y_s, y_p) ? "bitwise-equal" : "MISMATCH");
}

void bench_gelu(std::int64_t n, int reps) {
  std::mt19937_64 rng(45);
  auto x = randu(rng, static_cast<size_t>(n));
  std::vector<double> y_s(x.size()), y_p(x.size());
  const double ts = time_best_of(reps, [&] { ks::gelu(x.data(), y_s.data(), n); });
  const double tp = time_best_of(reps, [&] { ko::gelu(x.data(), y_p.data(), n); });
  std::printf("gelu %10lld        serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   %s\n",
              static_cast<long long>(n), ts, tp, ts / tp,
              bitwise_equal(y_s, y_p) ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1) reps = std::max(1, std::atoi(argv[1]));
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled; omp namespace falls back to the same code serially\n");
#endif
  bench_matmul(64, 64, 64, reps);
  bench_matmul(256, 256, 256, reps);
  bench_matmul(512, 512, 512, reps);
  bench_softmax(512, 512, reps);
  bench_softmax(2048, 256, reps);
  bench_layer_norm(2048, 256, reps);
  bench_gelu(1 << 20, reps);
  return 0;
}
