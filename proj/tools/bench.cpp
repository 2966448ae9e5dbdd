// Compares the OpenMP kernels against their serial reference implementations
// on encode-shaped workloads. Usage: alter_bench [repeats]

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <random>

#include "alter/alga.hpp"
#include "alter/matrix.hpp"
#include "alter/threads.hpp"

using alter::Matrix;

namespace {

Matrix random_matrix(int rows, int cols, uint64_t seed) {
  Matrix m(rows, cols);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (double& v : m.data) v = dist(rng);
  return m;
}

template <typename F>
double time_best_ms(int repeats, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const double t0 = omp_get_wtime();
    fn();
    best = std::min(best, (omp_get_wtime() - t0) * 1e3);
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms, double diff) {
  std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   max|diff| %.3g\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
  alter::threads::apply_env_cap();
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::printf("threads: %d, repeats: %d\n", alter::threads::worker_count(), repeats);

  {
    const Matrix a = random_matrix(384, 384, 1);
    const Matrix b = random_matrix(384, 384, 2);
    Matrix ref, out;
    const double ts = time_best_ms(repeats, [&] { alter::kernels::serial::matmul(a, b, ref); });
    const double tp = time_best_ms(repeats, [&] { alter::kernels::matmul(a, b, out); });
    report("matmul 384x384", ts, tp, alter::max_abs_diff(ref, out));
  }
  {
    const Matrix a = random_matrix(384, 384, 3);
    const Matrix b = random_matrix(384, 384, 4);
    Matrix ref, out;
    const double ts = time_best_ms(repeats, [&] { alter::kernels::serial::matmul_nt(a, b, ref); });
    const double tp = time_best_ms(repeats, [&] { alter::kernels::matmul_nt(a, b, out); });
    report("matmul_nt 384x384", ts, tp, alter::max_abs_diff(ref, out));
  }
  {
    const Matrix ts_data = random_matrix(500, 200, 5);
    Matrix ref, out;
    const double ts = time_best_ms(repeats, [&] { alter::kernels::serial::pearson(ts_data, ref); });
    const double tp = time_best_ms(repeats, [&] { alter::kernels::pearson(ts_data, out); });
    report("pearson 500x200", ts, tp, alter::max_abs_diff(ref, out));
  }
  {
    // K-step embedding: iterated kernel powers on a 200-node graph
    const int n = 200, k = 16;
    Matrix corr = random_matrix(n, n, 6);
    for (int i = 0; i < n; ++i) {
      corr(i, i) = 1.0;
      for (int j = 0; j < i; ++j) corr(i, j) = corr(j, i);
    }
    Matrix adj = alter::build_adjacency(corr, 0.5);
    alter::AdaptiveFactors f = alter::adaptive_factors_from_corr(corr, adj);
    alter::RwKernel r = alter::rw_kernel(f, adj);
    Matrix serial_e;
    const double ts = time_best_ms(repeats, [&] {
      serial_e = Matrix(n, k);
      for (int i = 0; i < n; ++i) serial_e(i, 0) = 1.0;
      Matrix power = Matrix::identity(n), next;
      for (int s = 1; s < k; ++s) {
        alter::kernels::serial::matmul(power, r.r, next);
        power = next;
        for (int i = 0; i < n; ++i) serial_e(i, s) = power(i, i);
      }
    });
    alter::LongRangeEmbedding emb;
    const double tp = time_best_ms(repeats, [&] { emb = alter::long_range_embedding(r, k); });
    report("embedding N=200 K=16", ts, tp, alter::max_abs_diff(serial_e, emb.e));
  }
  return 0;
}
