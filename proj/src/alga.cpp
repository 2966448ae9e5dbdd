#include "alter/alga.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "alter/threads.hpp"

namespace alter {

static std::vector<double> column_degrees(const Matrix& a) {
  std::vector<double> deg(a.cols, 0.0);
  for (int j = 0; j < a.cols; ++j)
    for (int i = 0; i < a.rows; ++i) deg[j] += a(i, j);
  return deg;
}

AdaptiveFactors adaptive_factors(const TimeSeriesTable& ts, const Matrix& a) {
  if (ts.rois() != a.rows || a.rows != a.cols)
    throw std::invalid_argument("adaptive_factors: dimension mismatch");
  Matrix corr;
  kernels::pearson(ts.values, corr, nullptr);
  return adaptive_factors_from_corr(corr, a);
}

AdaptiveFactors adaptive_factors_from_corr(const Matrix& corr, const Matrix& a) {
  if (!corr.same_shape(a) || corr.rows != corr.cols)
    throw std::invalid_argument("adaptive_factors: dimension mismatch");
  const int n = corr.rows;
  AdaptiveFactors out;
  out.f = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    out.f(i, i) = 1.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      out.f(i, j) = a(i, j) != 0.0 ? corr(i, j) : 0.0;
    }
  }
  return out;
}

RwKernel rw_kernel(const AdaptiveFactors& f, const Matrix& a, bool renormalize) {
  if (!f.f.same_shape(a)) throw std::invalid_argument("rw_kernel: shape mismatch");
  const int n = a.rows;
  RwKernel out;
  out.source_degree = column_degrees(a);
  out.r = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    // isolated node: D_jj = 0 is replaced by 1 so its all-zero column stays zero
    const double inv = out.source_degree[j] > 0.0 ? 1.0 / out.source_degree[j] : 1.0;
    for (int i = 0; i < n; ++i)
      out.r(i, j) = f.f(i, j) * a(i, j) * inv;
  }
  if (renormalize) {
    for (int j = 0; j < n; ++j) {
      double mass = 0.0;
      for (int i = 0; i < n; ++i) mass += std::fabs(out.r(i, j));
      if (mass > 0.0)
        for (int i = 0; i < n; ++i) out.r(i, j) /= mass;
    }
  }
  return out;
}

LongRangeEmbedding long_range_embedding(const RwKernel& r, int k) {
  if (k < 1) throw std::invalid_argument("long_range_embedding: k must be >= 1");
  const int n = r.r.rows;
  LongRangeEmbedding out;
  out.k = k;
  out.e = Matrix(n, k);
  for (int i = 0; i < n; ++i) out.e(i, 0) = 1.0;  // R^0 = I
  Matrix power = Matrix::identity(n);
  for (int s = 1; s < k; ++s) {
    power = kernels::matmul(power, r.r);
    for (int i = 0; i < n; ++i) out.e(i, s) = power(i, i);
  }
  return out;
}

TransitionMatrix transition_matrix(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("transition_matrix: matrix not square");
  std::vector<double> deg = column_degrees(a);
  const int n = a.rows;
  TransitionMatrix out;
  out.p = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    if (deg[j] <= 0.0) continue;  // isolated source: column stays zero
    for (int i = 0; i < n; ++i) out.p(i, j) = a(i, j) / deg[j];
  }
  return out;
}

std::vector<double> state_evolution(const std::vector<double>& t0, const TransitionMatrix& p,
                                    int k) {
  const int n = p.p.rows;
  if (static_cast<int>(t0.size()) != n)
    throw std::invalid_argument("state_evolution: state size mismatch");
  if (k < 0) throw std::invalid_argument("state_evolution: negative hop count");
  double sum = 0.0;
  for (double v : t0) sum += v;
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("state_evolution: start state must sum to 1");
  std::vector<double> state = t0, next(n);
  for (int hop = 0; hop < k; ++hop) {
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += p.p(i, j) * state[j];
      next[i] = acc;
    }
    state.swap(next);
  }
  return state;
}

std::vector<double> mc_return_estimate(const Matrix& a, int k, int n_walks, uint64_t seed) {
  if (a.rows != a.cols) throw std::invalid_argument("mc_return_estimate: matrix not square");
  if (n_walks < 1) throw std::invalid_argument("mc_return_estimate: need at least 1 walk");
  if (k < 0) throw std::invalid_argument("mc_return_estimate: negative hop count");
  const int n = a.rows;
  std::vector<std::vector<int>> neighbors(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i)
      if (a(i, j) != 0.0) neighbors[j].push_back(i);
    if (neighbors[j].empty())
      throw std::invalid_argument("mc_return_estimate: isolated node present");
  }
  std::vector<double> estimate(n, 0.0);
#pragma omp parallel for schedule(dynamic) num_threads(threads::worker_count())
  for (int start = 0; start < n; ++start) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(start)));
    int returned = 0;
    for (int w = 0; w < n_walks; ++w) {
      int node = start;
      for (int hop = 0; hop < k; ++hop) {
        const auto& nb = neighbors[node];
        node = nb[std::uniform_int_distribution<size_t>(0, nb.size() - 1)(rng)];
      }
      if (node == start) ++returned;
    }
    estimate[start] = double(returned) / double(n_walks);
  }
  return estimate;
}

}  // namespace alter
