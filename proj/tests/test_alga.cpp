#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "alter/alga.hpp"
#include "test_util.hpp"

using alter::AdaptiveFactors;
using alter::Matrix;

namespace {

AdaptiveFactors ones_factors(const Matrix& a) {
  AdaptiveFactors f;
  f.f = Matrix(a.rows, a.cols, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    f.f(i, i) = 1.0;
    for (int j = 0; j < a.cols; ++j)
      if (a(i, j) != 0.0) f.f(i, j) = 1.0;
  }
  return f;
}

// N x K matrix of diag(R^s) computed by fresh naive powers; the dense-power
// oracle for long_range_embedding.
Matrix embedding_oracle(const Matrix& r, int k) {
  Matrix e(r.rows, k);
  for (int s = 0; s < k; ++s) {
    Matrix p = testutil::naive_power(r, s);
    for (int i = 0; i < r.rows; ++i) e(i, s) = p(i, i);
  }
  return e;
}

}  // namespace

TEST_CASE("adaptive_factors: diagonal 1, disconnected 0, connected = Pearson") {
  alter::TimeSeriesTable ts;
  ts.values = Matrix(3, 3);
  const double t0[] = {1, 2, 3}, t1[] = {2, 4, 6}, t2[] = {5, 1, 4};
  for (int k = 0; k < 3; ++k) {
    ts.values(k, 0) = t0[k];
    ts.values(k, 1) = t1[k];
    ts.values(k, 2) = t2[k];
  }
  Matrix a = Matrix::from_rows({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}});
  AdaptiveFactors f = alter::adaptive_factors(ts, a);
  CHECK(f.f(0, 0) == 1.0);
  CHECK(f.f(1, 1) == 1.0);
  CHECK(f.f(2, 2) == 1.0);
  CHECK(f.f(0, 2) == 0.0);  // disconnected
  CHECK(f.f(1, 2) == 0.0);
  CHECK(f.f(0, 1) == doctest::Approx(1.0).epsilon(1e-14));  // t1 = 2 * t0
  CHECK_THROWS_AS(alter::adaptive_factors(ts, Matrix(4, 4)), std::invalid_argument);
}

TEST_CASE("rw_kernel: two-node example with f = 0.5") {
  Matrix a = Matrix::from_rows({{0, 1}, {1, 0}});
  AdaptiveFactors f;
  f.f = Matrix::from_rows({{1, 0.5}, {0.5, 1}});
  alter::RwKernel r = alter::rw_kernel(f, a);
  CHECK(r.r == Matrix::from_rows({{0, 0.5}, {0.5, 0}}));
  CHECK(r.source_degree == std::vector<double>{1.0, 1.0});
}

TEST_CASE("rw_kernel: with F = 1 every non-isolated column sums to 1") {
  Matrix a = Matrix::from_rows({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});  // path 1-2-3
  alter::RwKernel r = alter::rw_kernel(ones_factors(a), a);
  for (int j = 0; j < 3; ++j) {
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) sum += r.r(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("rw_kernel: isolated node keeps an all-zero column") {
  Matrix a = Matrix::from_rows({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}});
  alter::RwKernel r = alter::rw_kernel(ones_factors(a), a);
  for (int i = 0; i < 3; ++i) CHECK(r.r(i, 2) == 0.0);
  CHECK(r.source_degree[2] == 0.0);
}

TEST_CASE("rw_kernel: sparsity pattern is a subset of A's") {
  for (uint64_t seed = 0; seed < 6; ++seed) {
    Matrix a = testutil::random_connected_adjacency(10, 0.3, seed);
    Matrix corr = testutil::random_matrix(10, 10, seed + 60);
    for (int i = 0; i < 10; ++i) {
      corr(i, i) = 1.0;
      for (int j = 0; j < i; ++j) corr(i, j) = corr(j, i);
    }
    alter::RwKernel r = alter::rw_kernel(alter::adaptive_factors_from_corr(corr, a), a);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j)
        if (a(i, j) == 0.0) CHECK(r.r(i, j) == 0.0);
  }
}

TEST_CASE("rw_kernel: renormalize gives unit-L1 columns") {
  Matrix a = testutil::random_connected_adjacency(8, 0.4, 5);
  Matrix corr = testutil::random_matrix(8, 8, 65);
  for (int i = 0; i < 8; ++i) {
    corr(i, i) = 1.0;
    for (int j = 0; j < i; ++j) corr(i, j) = corr(j, i);
  }
  alter::RwKernel r =
      alter::rw_kernel(alter::adaptive_factors_from_corr(corr, a), a, /*renormalize=*/true);
  for (int j = 0; j < 8; ++j) {
    double mass = 0.0;
    for (int i = 0; i < 8; ++i) mass += std::fabs(r.r(i, j));
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("long_range_embedding: k = 1 is the all-ones column") {
  Matrix a = testutil::random_connected_adjacency(6, 0.3, 9);
  alter::RwKernel r = alter::rw_kernel(ones_factors(a), a);
  alter::LongRangeEmbedding e = alter::long_range_embedding(r, 1);
  CHECK(e.e == Matrix(6, 1, 1.0));
  CHECK_THROWS_AS(alter::long_range_embedding(r, 0), std::invalid_argument);
}

TEST_CASE("long_range_embedding: two-node 0.5-kernel example, k = 3") {
  Matrix a = Matrix::from_rows({{0, 1}, {1, 0}});
  AdaptiveFactors f;
  f.f = Matrix::from_rows({{1, 0.5}, {0.5, 1}});
  alter::LongRangeEmbedding e = alter::long_range_embedding(alter::rw_kernel(f, a), 3);
  for (int i = 0; i < 2; ++i) {
    CHECK(e.e(i, 0) == 1.0);
    CHECK(e.e(i, 1) == 0.0);
    CHECK(e.e(i, 2) == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_CASE("long_range_embedding: hop-1 column is zero for zero-diagonal adjacency") {
  Matrix a = testutil::random_connected_adjacency(9, 0.4, 17);
  alter::RwKernel r = alter::rw_kernel(ones_factors(a), a);
  alter::LongRangeEmbedding e = alter::long_range_embedding(r, 4);
  for (int i = 0; i < 9; ++i) CHECK(e.e(i, 1) == 0.0);
}

TEST_CASE("long_range_embedding matches the dense-power oracle with adaptive factors") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const int n = 4 + int(seed % 12);
    const int k = 2 + int(seed % 8);
    Matrix a = testutil::random_connected_adjacency(n, 0.3, seed + 70);
    Matrix corr = testutil::random_matrix(n, n, seed + 170);
    for (int i = 0; i < n; ++i) {
      corr(i, i) = 1.0;
      for (int j = 0; j < i; ++j) corr(i, j) = corr(j, i);
    }
    alter::RwKernel r = alter::rw_kernel(alter::adaptive_factors_from_corr(corr, a), a);
    alter::LongRangeEmbedding e = alter::long_range_embedding(r, k);
    CHECK(alter::max_abs_diff(e.e, embedding_oracle(r.r, k)) < 1e-10);
  }
}

TEST_CASE("long_range_embedding is permutation equivariant") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const int n = 5 + int(seed % 10);
    Matrix a = testutil::random_connected_adjacency(n, 0.35, seed + 300);
    Matrix corr = testutil::random_matrix(n, n, seed + 400);
    for (int i = 0; i < n; ++i) {
      corr(i, i) = 1.0;
      for (int j = 0; j < i; ++j) corr(i, j) = corr(j, i);
    }
    alter::LongRangeEmbedding e =
        alter::long_range_embedding(alter::rw_kernel(alter::adaptive_factors_from_corr(corr, a), a), 6);

    std::vector<int> perm = testutil::random_permutation(n, seed);
    Matrix pa(n, n), pc(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        pa(perm[i], perm[j]) = a(i, j);
        pc(perm[i], perm[j]) = corr(i, j);
      }
    alter::LongRangeEmbedding pe =
        alter::long_range_embedding(alter::rw_kernel(alter::adaptive_factors_from_corr(pc, pa), pa), 6);
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < 6; ++s)
        CHECK(pe.e(perm[i], s) == doctest::Approx(e.e(i, s)).epsilon(1e-12));
  }
}

TEST_CASE("with F = 1 the kernel equals the transition matrix and e lies in [0,1]") {
  for (uint64_t seed = 0; seed < 6; ++seed) {
    Matrix a = testutil::random_connected_adjacency(11, 0.3, seed + 900);
    alter::RwKernel r = alter::rw_kernel(ones_factors(a), a);
    alter::TransitionMatrix p = alter::transition_matrix(a);
    CHECK(alter::max_abs_diff(r.r, p.p) == 0.0);
    alter::LongRangeEmbedding e = alter::long_range_embedding(r, 12);
    for (double v : e.e.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("transition_matrix: complete graph K3 and star") {
  Matrix k3 = Matrix::from_rows({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
  alter::TransitionMatrix p = alter::transition_matrix(k3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(p.p(i, j) == (i == j ? 0.0 : doctest::Approx(0.5).epsilon(1e-15)));

  // star: node 0 is the center with three leaves
  Matrix star = Matrix::from_rows({{0, 1, 1, 1}, {1, 0, 0, 0}, {1, 0, 0, 0}, {1, 0, 0, 0}});
  alter::TransitionMatrix ps = alter::transition_matrix(star);
  for (int leaf = 1; leaf < 4; ++leaf) CHECK(ps.p(0, leaf) == 1.0);  // leaf -> center surely
  for (int leaf = 1; leaf < 4; ++leaf)
    CHECK(ps.p(leaf, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("transition_matrix: non-isolated columns sum to 1") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    Matrix a = testutil::random_connected_adjacency(13, 0.25, seed + 31);
    alter::TransitionMatrix p = alter::transition_matrix(a);
    for (int j = 0; j < 13; ++j) {
      double sum = 0.0;
      for (int i = 0; i < 13; ++i) {
        sum += p.p(i, j);
        CHECK(p.p(i, j) >= 0.0);
        CHECK(p.p(i, j) <= 1.0);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("state_evolution: identity at k = 0 and the 2-cycle walk") {
  Matrix two_cycle = Matrix::from_rows({{0, 1}, {1, 0}});
  alter::TransitionMatrix p = alter::transition_matrix(two_cycle);
  std::vector<double> t0 = {1.0, 0.0};
  CHECK(alter::state_evolution(t0, p, 0) == t0);
  CHECK(alter::state_evolution(t0, p, 1) == std::vector<double>{0.0, 1.0});
  CHECK(alter::state_evolution(t0, p, 2) == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(alter::state_evolution({0.4, 0.4}, p, 1), std::invalid_argument);
}

TEST_CASE("state_evolution conserves total probability") {
  for (uint64_t seed = 0; seed < 6; ++seed) {
    const int n = 6 + int(seed % 9);
    Matrix a = testutil::random_connected_adjacency(n, 0.3, seed + 800);
    alter::TransitionMatrix p = alter::transition_matrix(a);
    std::vector<double> state(n, 1.0 / n);
    for (int k : {1, 5, 20, 100}) {
      std::vector<double> out = alter::state_evolution(state, p, k);
      double sum = 0.0;
      for (double v : out) sum += v;
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("mc_return_estimate: 2-cycle returns exactly") {
  Matrix a = Matrix::from_rows({{0, 1}, {1, 0}});
  CHECK(alter::mc_return_estimate(a, 2, 500, 7) == std::vector<double>{1.0, 1.0});
  CHECK(alter::mc_return_estimate(a, 1, 500, 7) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("mc_return_estimate: deterministic per seed, rejects isolated nodes") {
  Matrix a = testutil::random_connected_adjacency(6, 0.3, 3);
  CHECK(alter::mc_return_estimate(a, 3, 1000, 11) == alter::mc_return_estimate(a, 3, 1000, 11));
  Matrix iso = Matrix(3, 3, 0.0);
  iso(0, 1) = iso(1, 0) = 1.0;
  CHECK_THROWS_AS(alter::mc_return_estimate(iso, 2, 10, 1), std::invalid_argument);
}

TEST_CASE("mc_return_estimate agrees with diag(P^4) on an 8-node graph") {
  Matrix a = testutil::random_connected_adjacency(8, 0.4, 2024);
  alter::TransitionMatrix p = alter::transition_matrix(a);
  Matrix p4 = testutil::naive_power(p.p, 4);
  std::vector<double> est = alter::mc_return_estimate(a, 4, 100000, 99);
  for (int i = 0; i < 8; ++i) CHECK(std::fabs(est[i] - p4(i, i)) < 0.01);
}
