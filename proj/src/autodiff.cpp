#include "alter/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace alter {

Parameter::Parameter(std::string n, Matrix v) : value(std::move(v)), name(std::move(n)) {
  grad = Matrix(value.rows, value.cols);
}

void Parameter::zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }

Tape::Id Tape::push(const char* op, Matrix val) {
  if (!val.all_finite())
    throw std::runtime_error(std::string("tape op '") + op + "' produced non-finite values");
  Node n;
  n.op = op;
  n.val = std::move(val);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size()) - 1;
}

void Tape::check_id(Id id, const char* op) const {
  if (id < 0 || id >= static_cast<Id>(nodes_.size()))
    throw std::logic_error(std::string(op) + ": invalid tape id");
}

Matrix& Tape::grad_ref(Id id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Matrix(n.val.rows, n.val.cols);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accum(Id id, const Matrix& delta) {
  Matrix& g = grad_ref(id);
  for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += delta.data[i];
}

void Tape::accum_at(Id id, int r, int c, double delta) { grad_ref(id)(r, c) += delta; }

Tape::Id Tape::constant(Matrix m, const char* label) { return push(label, std::move(m)); }

Tape::Id Tape::param(Parameter& p) {
  Id id = push("param", p.value);
  nodes_[id].leaf = &p;
  return id;
}

Tape::Id Tape::matmul(Id a, Id b) {
  check_id(a, "matmul");
  check_id(b, "matmul");
  Id y = push("matmul", kernels::matmul(val(a), val(b)));
  nodes_[y].back = [y, a, b](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    t.accum(a, kernels::matmul_nt(dy, t.val(b)));   // dA = dY * B^T
    t.accum(b, kernels::matmul_tn(t.val(a), dy));   // dB = A^T * dY
  };
  return y;
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
  check_id(a, "matmul_nt");
  check_id(b, "matmul_nt");
  Id y = push("matmul_nt", kernels::matmul_nt(val(a), val(b)));
  nodes_[y].back = [y, a, b](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    t.accum(a, kernels::matmul(dy, t.val(b)));      // dA = dY * B
    t.accum(b, kernels::matmul_tn(dy, t.val(a)));   // dB = dY^T * A
  };
  return y;
}

Tape::Id Tape::matmul_tn(Id a, Id b) {
  check_id(a, "matmul_tn");
  check_id(b, "matmul_tn");
  Id y = push("matmul_tn", kernels::matmul_tn(val(a), val(b)));
  nodes_[y].back = [y, a, b](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    t.accum(a, kernels::matmul_nt(t.val(b), dy));   // dA = B * dY^T
    t.accum(b, kernels::matmul(t.val(a), dy));      // dB = A * dY
  };
  return y;
}

Tape::Id Tape::add(Id a, Id b) {
  check_id(a, "add");
  check_id(b, "add");
  if (!val(a).same_shape(val(b))) throw std::invalid_argument("add: shape mismatch");
  Matrix out = val(a);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += val(b).data[i];
  Id y = push("add", std::move(out));
  nodes_[y].back = [y, a, b](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    t.accum(a, dy);
    t.accum(b, dy);
  };
  return y;
}

Tape::Id Tape::add_row(Id x, Id row) {
  check_id(x, "add_row");
  check_id(row, "add_row");
  const Matrix& r = val(row);
  if (r.rows != 1 || r.cols != val(x).cols)
    throw std::invalid_argument("add_row: row must be 1 x cols(x)");
  Matrix out = val(x);
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) += r(0, j);
  Id y = push("add_row", std::move(out));
  nodes_[y].back = [y, x, row](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    t.accum(x, dy);
    Matrix dr(1, dy.cols);
    for (int i = 0; i < dy.rows; ++i)
      for (int j = 0; j < dy.cols; ++j) dr(0, j) += dy(i, j);
    t.accum(row, dr);
  };
  return y;
}

Tape::Id Tape::scale(Id a, double s) {
  check_id(a, "scale");
  Matrix out = val(a);
  for (double& v : out.data) v *= s;
  Id y = push("scale", std::move(out));
  nodes_[y].back = [y, a, s](Tape& t) {
    Matrix d = t.nodes_[y].grad;
    for (double& v : d.data) v *= s;
    t.accum(a, d);
  };
  return y;
}

Tape::Id Tape::relu(Id a) {
  check_id(a, "relu");
  Matrix out = val(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  Id y = push("relu", std::move(out));
  nodes_[y].back = [y, a](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    const Matrix& x = t.val(a);
    Matrix d(dy.rows, dy.cols);
    for (size_t i = 0; i < d.data.size(); ++i)
      d.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
    t.accum(a, d);
  };
  return y;
}

Tape::Id Tape::softmax_rows(Id a) {
  check_id(a, "softmax_rows");
  const Matrix& x = val(a);
  Matrix out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    double mx = x(i, 0);
    for (int j = 1; j < x.cols; ++j) mx = std::max(mx, x(i, j));
    double sum = 0.0;
    for (int j = 0; j < x.cols; ++j) {
      const double e = std::exp(x(i, j) - mx);
      out(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < x.cols; ++j) out(i, j) /= sum;
  }
  Id y = push("softmax_rows", std::move(out));
  nodes_[y].back = [y, a](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    const Matrix& p = t.nodes_[y].val;
    Matrix d(dy.rows, dy.cols);
    for (int i = 0; i < dy.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < dy.cols; ++j) dot += dy(i, j) * p(i, j);
      for (int j = 0; j < dy.cols; ++j) d(i, j) = p(i, j) * (dy(i, j) - dot);
    }
    t.accum(a, d);
  };
  return y;
}

Tape::Id Tape::layer_norm(Id x, Id gain, Id bias, double eps) {
  check_id(x, "layer_norm");
  check_id(gain, "layer_norm");
  check_id(bias, "layer_norm");
  const Matrix& in = val(x);
  const Matrix& g = val(gain);
  const Matrix& b = val(bias);
  if (g.rows != 1 || b.rows != 1 || g.cols != in.cols || b.cols != in.cols)
    throw std::invalid_argument("layer_norm: gain/bias must be 1 x cols(x)");
  const int rows = in.rows, cols = in.cols;
  Matrix normalized(rows, cols);  // saved activation for backward
  std::vector<double> inv_sd(rows);
  Matrix out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += in(i, j);
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double d = in(i, j) - mean;
      var += d * d;
    }
    var /= cols;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_sd[i] = inv;
    for (int j = 0; j < cols; ++j) {
      normalized(i, j) = (in(i, j) - mean) * inv;
      out(i, j) = normalized(i, j) * g(0, j) + b(0, j);
    }
  }
  Id y = push("layer_norm", std::move(out));
  nodes_[y].back = [y, x, gain, bias, normalized, inv_sd](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    const Matrix& g = t.val(gain);
    const int rows = dy.rows, cols = dy.cols;
    Matrix dx(rows, cols), dg(1, cols), db(1, cols);
    for (int i = 0; i < rows; ++i) {
      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
      for (int j = 0; j < cols; ++j) {
        const double dxhat = dy(i, j) * g(0, j);
        mean_dxhat += dxhat;
        mean_dxhat_xhat += dxhat * normalized(i, j);
        dg(0, j) += dy(i, j) * normalized(i, j);
        db(0, j) += dy(i, j);
      }
      mean_dxhat /= cols;
      mean_dxhat_xhat /= cols;
      for (int j = 0; j < cols; ++j) {
        const double dxhat = dy(i, j) * g(0, j);
        dx(i, j) = inv_sd[i] * (dxhat - mean_dxhat - normalized(i, j) * mean_dxhat_xhat);
      }
    }
    t.accum(x, dx);
    t.accum(gain, dg);
    t.accum(bias, db);
  };
  return y;
}

Tape::Id Tape::concat_cols(Id a, Id b) {
  check_id(a, "concat_cols");
  check_id(b, "concat_cols");
  const Matrix& left = val(a);
  const Matrix& right = val(b);
  if (left.rows != right.rows) throw std::invalid_argument("concat_cols: row count mismatch");
  Matrix out(left.rows, left.cols + right.cols);
  for (int i = 0; i < out.rows; ++i) {
    for (int j = 0; j < left.cols; ++j) out(i, j) = left(i, j);
    for (int j = 0; j < right.cols; ++j) out(i, left.cols + j) = right(i, j);
  }
  const int split = left.cols;  // before push: it may reallocate nodes_
  Id y = push("concat_cols", std::move(out));
  nodes_[y].back = [y, a, b, split](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    Matrix da(dy.rows, split), db(dy.rows, dy.cols - split);
    for (int i = 0; i < dy.rows; ++i) {
      for (int j = 0; j < split; ++j) da(i, j) = dy(i, j);
      for (int j = split; j < dy.cols; ++j) db(i, j - split) = dy(i, j);
    }
    t.accum(a, da);
    t.accum(b, db);
  };
  return y;
}

Tape::Id Tape::slice_cols(Id a, int first, int count) {
  check_id(a, "slice_cols");
  const Matrix& x = val(a);
  if (first < 0 || count < 1 || first + count > x.cols)
    throw std::invalid_argument("slice_cols: range out of bounds");
  Matrix out(x.rows, count);
  for (int i = 0; i < x.rows; ++i)
    for (int j = 0; j < count; ++j) out(i, j) = x(i, first + j);
  Id y = push("slice_cols", std::move(out));
  nodes_[y].back = [y, a, first, count](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    Matrix& ga = t.grad_ref(a);
    for (int i = 0; i < dy.rows; ++i)
      for (int j = 0; j < count; ++j) ga(i, first + j) += dy(i, j);
  };
  return y;
}

Tape::Id Tape::gather_rows(Id a, std::vector<int> order) {
  check_id(a, "gather_rows");
  const Matrix& x = val(a);
  for (int r : order)
    if (r < 0 || r >= x.rows) throw std::invalid_argument("gather_rows: index out of range");
  Matrix out(static_cast<int>(order.size()), x.cols);
  for (size_t i = 0; i < order.size(); ++i)
    for (int j = 0; j < x.cols; ++j) out(static_cast<int>(i), j) = x(order[i], j);
  Id y = push("gather_rows", std::move(out));
  nodes_[y].back = [y, a, order](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    Matrix& ga = t.grad_ref(a);
    for (size_t i = 0; i < order.size(); ++i)
      for (int j = 0; j < dy.cols; ++j) ga(order[i], j) += dy(static_cast<int>(i), j);
  };
  return y;
}

Tape::Id Tape::flatten_row(Id a) {
  check_id(a, "flatten_row");
  const Matrix& x = val(a);
  Matrix out(1, x.rows * x.cols);
  out.data = x.data;
  const int rows = x.rows, cols = x.cols;
  Id y = push("flatten_row", std::move(out));
  nodes_[y].back = [y, a, rows, cols](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    Matrix d(rows, cols);
    d.data = dy.data;
    t.accum(a, d);
  };
  return y;
}

Tape::Id Tape::col_mean(Id a) {
  check_id(a, "col_mean");
  const Matrix& x = val(a);
  if (x.rows < 1) throw std::invalid_argument("col_mean: empty input");
  Matrix out(1, x.cols);
  for (int j = 0; j < x.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < x.rows; ++i) s += x(i, j);
    out(0, j) = s / x.rows;
  }
  const int rows = x.rows;
  Id y = push("col_mean", std::move(out));
  nodes_[y].back = [y, a, rows](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    Matrix& ga = t.grad_ref(a);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < dy.cols; ++j) ga(i, j) += dy(0, j) / rows;
  };
  return y;
}

Tape::Id Tape::col_max(Id a) {
  check_id(a, "col_max");
  const Matrix& x = val(a);
  if (x.rows < 1) throw std::invalid_argument("col_max: empty input");
  Matrix out(1, x.cols);
  std::vector<int> argmax(x.cols, 0);
  for (int j = 0; j < x.cols; ++j) {
    double best = x(0, j);
    for (int i = 1; i < x.rows; ++i)
      if (x(i, j) > best) {
        best = x(i, j);
        argmax[j] = i;
      }
    out(0, j) = best;
  }
  Id y = push("col_max", std::move(out));
  nodes_[y].back = [y, a, argmax](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    Matrix& ga = t.grad_ref(a);
    for (int j = 0; j < dy.cols; ++j) ga(argmax[j], j) += dy(0, j);
  };
  return y;
}

Tape::Id Tape::col_sum(Id a) {
  check_id(a, "col_sum");
  const Matrix& x = val(a);
  Matrix out(1, x.cols);
  for (int j = 0; j < x.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < x.rows; ++i) s += x(i, j);
    out(0, j) = s;
  }
  const int rows = x.rows;
  Id y = push("col_sum", std::move(out));
  nodes_[y].back = [y, a, rows](Tape& t) {
    const Matrix& dy = t.nodes_[y].grad;
    Matrix& ga = t.grad_ref(a);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < dy.cols; ++j) ga(i, j) += dy(0, j);
  };
  return y;
}

Tape::Id Tape::sum_all(Id a) {
  check_id(a, "sum_all");
  const Matrix& x = val(a);
  Matrix out(1, 1);
  for (double v : x.data) out(0, 0) += v;
  Id y = push("sum_all", std::move(out));
  nodes_[y].back = [y, a](Tape& t) {
    const double dy = t.nodes_[y].grad(0, 0);
    Matrix& ga = t.grad_ref(a);
    for (double& v : ga.data) v += dy;
  };
  return y;
}

Tape::Id Tape::sum_squares(Id a) {
  check_id(a, "sum_squares");
  const Matrix& x = val(a);
  Matrix out(1, 1);
  for (double v : x.data) out(0, 0) += v * v;
  Id y = push("sum_squares", std::move(out));
  nodes_[y].back = [y, a](Tape& t) {
    const double dy = t.nodes_[y].grad(0, 0);
    const Matrix& x = t.val(a);
    Matrix& ga = t.grad_ref(a);
    for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += 2.0 * x.data[i] * dy;
  };
  return y;
}

Tape::Id Tape::cross_entropy(Id probs, int label) {
  check_id(probs, "cross_entropy");
  const Matrix& p = val(probs);
  if (p.rows != 1) throw std::invalid_argument("cross_entropy: expects a 1 x C row");
  if (label < 0 || label >= p.cols) throw std::invalid_argument("cross_entropy: invalid label");
  constexpr double kClamp = 1e-12;
  const double pl = p(0, label);
  Matrix out(1, 1);
  out(0, 0) = -std::log(std::max(pl, kClamp));
  Id y = push("cross_entropy", std::move(out));
  nodes_[y].back = [y, probs, label, pl](Tape& t) {
    if (pl <= kClamp) return;  // clamped region: loss is locally constant
    const double dy = t.nodes_[y].grad(0, 0);
    t.accum_at(probs, 0, label, -dy / pl);
  };
  return y;
}

Tape::Id Tape::linear(Id x, Parameter& w, Parameter& b) {
  Id wid = param(w);
  Id bid = param(b);
  return add_row(matmul_nt(x, wid), bid);
}

const Matrix& Tape::value(Id id) const {
  check_id(id, "value");
  return nodes_[id].val;
}

void Tape::backward(Id loss, double seed, bool accumulate_params) {
  if (nodes_.empty()) throw std::logic_error("backward without a recorded forward pass");
  check_id(loss, "backward");
  const Matrix& l = nodes_[loss].val;
  if (l.rows != 1 || l.cols != 1) throw std::invalid_argument("backward: loss must be 1 x 1");
  for (Node& n : nodes_) n.has_grad = false;
  grad_ref(loss)(0, 0) = seed;
  for (Id i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.back) continue;
    n.back(*this);
  }
  ran_backward_ = true;
  if (accumulate_params) add_grads_to_params();
}

void Tape::add_grads_to_params() {
  if (!ran_backward_) throw std::logic_error("add_grads_to_params before backward");
  for (Node& n : nodes_) {
    if (!n.leaf || !n.has_grad) continue;
    for (size_t i = 0; i < n.grad.data.size(); ++i) n.leaf->grad.data[i] += n.grad.data[i];
  }
}

const Matrix* Tape::param_grad(const Parameter& p) const {
  for (const Node& n : nodes_)
    if (n.leaf == &p && n.has_grad) return &n.grad;
  return nullptr;
}

GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  const std::vector<Parameter*>& params, double tolerance,
                                  int max_coords, double step, uint64_t seed) {
  size_t total = 0;
  for (const Parameter* p : params) total += p->value.size();
  if (total == 0) throw std::invalid_argument("finite_diff_check: no coordinates");

  std::vector<size_t> coords(total);
  for (size_t i = 0; i < total; ++i) coords[i] = i;
  if (static_cast<size_t>(max_coords) < total) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (size_t flat : coords) {
    // locate the owning parameter
    size_t off = flat;
    Parameter* owner = nullptr;
    for (Parameter* p : params) {
      if (off < p->value.size()) {
        owner = p;
        break;
      }
      off -= p->value.size();
    }
    double& v = owner->value.data[off];
    const double saved = v;
    v = saved + step;
    const double up = loss();
    v = saved - step;
    const double down = loss();
    v = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = owner->grad.data[off];
    const double rel =
        std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
    ++report.checked;
    if (rel > tolerance) ++report.failed;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst.param = owner->name;
      report.worst.row = static_cast<int>(off) / owner->value.cols;
      report.worst.col = static_cast<int>(off) % owner->value.cols;
      report.worst.analytic = analytic;
      report.worst.numeric = numeric;
      report.worst.rel_err = rel;
    }
  }
  return report;
}

}  // namespace alter
