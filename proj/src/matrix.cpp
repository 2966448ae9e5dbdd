#include "alter/matrix.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace alter {

Matrix::Matrix(int r, int c, double fill) : rows(r), cols(c) {
  if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimensions");
  data.assign(static_cast<size_t>(r) * c, fill);
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<int>(rows.size()),
           rows.size() ? static_cast<int>(rows.begin()->size()) : 0);
  int r = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != m.cols)
      throw std::invalid_argument("Matrix::from_rows: ragged rows");
    int c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

namespace kernels {

static void check_matmul(const Matrix& a, const Matrix& b, int ak, int bk, const char* op) {
  int a_inner = ak, b_inner = bk;
  if (a_inner != b_inner)
    throw std::invalid_argument(std::string(op) + ": inner dimensions disagree");
  (void)a;
  (void)b;
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.cols, b.rows, "matmul");
  out = Matrix(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
    double* orow = &out.data[static_cast<size_t>(i) * out.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.cols, b.cols, "matmul_nt");
  out = Matrix(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = &b.data[static_cast<size_t>(j) * b.cols];
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.rows, b.rows, "matmul_tn");
  out = Matrix(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = &a.data[static_cast<size_t>(k) * a.cols];
    const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
    for (int i = 0; i < a.cols; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = &out.data[static_cast<size_t>(i) * out.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
    }
  }
}

void pearson(const Matrix& ts, Matrix& out, int* zero_variance_cols) {
  const int t = ts.rows, n = ts.cols;
  if (t < 2) throw std::invalid_argument("pearson: fewer than 2 timepoints");
  // Center each column; a column is flagged zero-variance when its standard
  // deviation is negligible relative to its mean magnitude.
  Matrix centered(t, n);
  std::vector<double> norm(n, 0.0);
  std::vector<char> flat(n, 0);
  int flat_count = 0;
  for (int j = 0; j < n; ++j) {
    double mean = 0.0;
    for (int i = 0; i < t; ++i) mean += ts(i, j);
    mean /= t;
    double ss = 0.0;
    for (int i = 0; i < t; ++i) {
      const double d = ts(i, j) - mean;
      centered(i, j) = d;
      ss += d * d;
    }
    norm[j] = std::sqrt(ss);
    if (norm[j] <= 1e-12 * (std::fabs(mean) + 1.0) * std::sqrt(double(t))) {
      flat[j] = 1;
      ++flat_count;
    }
  }
  out = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    out(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double r = 0.0;
      if (!flat[i] && !flat[j]) {
        double dot = 0.0;
        for (int k = 0; k < t; ++k) dot += centered(k, i) * centered(k, j);
        r = dot / (norm[i] * norm[j]);
        r = std::clamp(r, -1.0, 1.0);
      }
      out(i, j) = r;
      out(j, i) = r;
    }
  }
  if (zero_variance_cols) *zero_variance_cols = flat_count;
}

}  // namespace serial

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.cols, b.rows, "matmul");
  out = Matrix(a.rows, b.cols);
#pragma omp parallel for schedule(static) if (static_cast<long>(a.rows) * b.cols * a.cols > 32768)
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
    double* orow = &out.data[static_cast<size_t>(i) * out.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.cols, b.cols, "matmul_nt");
  out = Matrix(a.rows, b.rows);
#pragma omp parallel for schedule(static) if (static_cast<long>(a.rows) * b.rows * a.cols > 32768)
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = &b.data[static_cast<size_t>(j) * b.cols];
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  check_matmul(a, b, a.rows, b.rows, "matmul_tn");
  out = Matrix(a.cols, b.cols);
#pragma omp parallel for schedule(static) if (static_cast<long>(a.cols) * b.cols * a.rows > 32768)
  for (int i = 0; i < a.cols; ++i) {
    double* orow = &out.data[static_cast<size_t>(i) * out.cols];
    for (int k = 0; k < a.rows; ++k) {
      const double av = a(k, i);
      if (av == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
    }
  }
}

void pearson(const Matrix& ts, Matrix& out, int* zero_variance_cols) {
  const int t = ts.rows, n = ts.cols;
  if (t < 2) throw std::invalid_argument("pearson: fewer than 2 timepoints");
  Matrix centered(t, n);
  std::vector<double> norm(n, 0.0);
  std::vector<char> flat(n, 0);
#pragma omp parallel for schedule(static) if (static_cast<long>(n) * t > 16384)
  for (int j = 0; j < n; ++j) {
    double mean = 0.0;
    for (int i = 0; i < t; ++i) mean += ts(i, j);
    mean /= t;
    double ss = 0.0;
    for (int i = 0; i < t; ++i) {
      const double d = ts(i, j) - mean;
      centered(i, j) = d;
      ss += d * d;
    }
    norm[j] = std::sqrt(ss);
    if (norm[j] <= 1e-12 * (std::fabs(mean) + 1.0) * std::sqrt(double(t))) flat[j] = 1;
  }
  out = Matrix(n, n);
#pragma omp parallel for schedule(dynamic, 8) if (static_cast<long>(n) * n * t > 65536)
  for (int i = 0; i < n; ++i) {
    out(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double r = 0.0;
      if (!flat[i] && !flat[j]) {
        double dot = 0.0;
        for (int k = 0; k < t; ++k) dot += centered(k, i) * centered(k, j);
        r = dot / (norm[i] * norm[j]);
        r = std::clamp(r, -1.0, 1.0);
      }
      out(i, j) = r;
      out(j, i) = r;
    }
  }
  if (zero_variance_cols) {
    int c = 0;
    for (int j = 0; j < n; ++j) c += flat[j];
    *zero_variance_cols = c;
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out;
  matmul(a, b, out);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix out;
  matmul_nt(a, b, out);
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix out;
  matmul_tn(a, b, out);
  return out;
}

}  // namespace kernels

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace alter
