#pragma once

#include <cstdint>
#include <vector>

#include "alter/graph.hpp"
#include "alter/matrix.hpp"

namespace alter {

/// Communication strengths between connected ROIs: Pearson correlation on
/// edges, 1 on the diagonal, 0 elsewhere.
struct AdaptiveFactors {
  Matrix f;
};

/// Biased one-step walk operator R = (F .* A) D^-1 with D the degree matrix
/// of A. Columns of isolated nodes are all-zero (their D entry is treated as
/// 1 in the inverse). Not column-stochastic in general when F != 1.
struct RwKernel {
  Matrix r;
  std::vector<double> source_degree;  // degrees of A
};

/// Per-node diagonals of I, R, R^2, ..., R^{K-1}; row i is node i's K-step
/// return profile.
struct LongRangeEmbedding {
  Matrix e;  // N x K
  int k = 0;
};

/// Uniform-walk transfer matrix p(i,j) = a(i,j)/deg(j); kept as the
/// Markov-chain oracle the kernel is checked against when F == 1.
struct TransitionMatrix {
  Matrix p;
};

AdaptiveFactors adaptive_factors(const TimeSeriesTable& ts, const Matrix& a);
// Same masking applied to an already-computed correlation matrix (the graph
// pipeline reuses x instead of recomputing Pearson).
AdaptiveFactors adaptive_factors_from_corr(const Matrix& corr, const Matrix& a);

// renormalize rescales each column of R to unit L1 mass (when nonzero); off
// by default, which matches the printed formula.
RwKernel rw_kernel(const AdaptiveFactors& f, const Matrix& a, bool renormalize = false);

LongRangeEmbedding long_range_embedding(const RwKernel& r, int k);

TransitionMatrix transition_matrix(const Matrix& a);

/// Evolves a start distribution k hops: t_i <- sum_j p(i,j) t_j per hop.
std::vector<double> state_evolution(const std::vector<double>& t0, const TransitionMatrix& p,
                                    int k);

/// Monte-Carlo estimate of the k-hop return probability diag(P^k) under
/// uniform next-hop sampling; deterministic per seed, requires every node
/// non-isolated.
std::vector<double> mc_return_estimate(const Matrix& a, int k, int n_walks, uint64_t seed);

}  // namespace alter
