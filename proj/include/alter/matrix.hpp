#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace alter {

/// Dense row-major matrix of doubles. The only numeric container in the
/// project; everything from correlation matrices to model weights uses it.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);

  static Matrix identity(int n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
  size_t size() const { return data.size(); }
};

bool operator==(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);

namespace kernels {

// Serial reference kernels, kept as the ground truth the OpenMP versions are
// tested and benchmarked against.
namespace serial {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);     // a * b
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);  // a * b^T
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);  // a^T * b
void pearson(const Matrix& ts, Matrix& out, int* zero_variance_cols = nullptr);
}  // namespace serial

void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
// Pearson correlation between the columns of ts (rows are observations).
// Zero-variance columns get 0 off-diagonal and 1 on the diagonal; the count
// of such columns is reported through zero_variance_cols when non-null.
void pearson(const Matrix& ts, Matrix& out, int* zero_variance_cols = nullptr);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);

}  // namespace kernels

/// FNV-1a over raw bytes; used for config hashes and cache source hashes.
uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 14695981039346656037ULL);

/// splitmix64-style mixing of a base seed with a stream tag, so that one
/// user-facing seed can drive several independent deterministic streams.
uint64_t mix_seed(uint64_t seed, uint64_t stream);

}  // namespace alter
