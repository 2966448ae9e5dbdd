#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "alter/autodiff.hpp"
#include "alter/checkpoint.hpp"
#include "alter/io.hpp"
#include "test_util.hpp"

using alter::GradCheckReport;
using alter::Matrix;
using alter::Parameter;
using alter::Tape;

namespace {

Matrix bounded_away_from_zero(int rows, int cols, uint64_t seed) {
  Matrix m = testutil::random_matrix(rows, cols, seed, 0.1, 1.0);
  std::mt19937_64 rng(seed + 1);
  for (double& v : m.data)
    if (rng() & 1) v = -v;
  return m;
}

// Builds a scalar loss from the given parameters, runs backward, then
// central-difference-checks every coordinate.
GradCheckReport check_op(const std::vector<Parameter*>& params,
                         const std::function<Tape::Id(Tape&)>& build, double tol = 1e-4) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape t;
    t.backward(build(t));
  }
  auto loss = [&]() {
    Tape t;
    return t.value(build(t))(0, 0);
  };
  int coords = 0;
  for (const Parameter* p : params) coords += int(p->value.size());
  return alter::finite_diff_check(loss, params, tol, coords);
}

}  // namespace

TEST_CASE("softmax_rows: equal logits give the uniform row") {
  Tape t;
  Tape::Id y = t.softmax_rows(t.constant(Matrix(1, 2, 0.0)));
  CHECK(t.value(y)(0, 0) == 0.5);
  CHECK(t.value(y)(0, 1) == 0.5);
}

TEST_CASE("softmax_rows: shift invariance") {
  Matrix x = testutil::random_matrix(4, 6, 8);
  Matrix shifted = x;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) shifted(i, j) += 3.7;
  Tape t;
  Matrix a = t.value(t.softmax_rows(t.constant(x)));
  Matrix b = t.value(t.softmax_rows(t.constant(shifted)));
  CHECK(alter::max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("softmax_rows: huge logits do not overflow") {
  Tape t;
  Matrix x(1, 2);
  x(0, 0) = 1000.0;
  x(0, 1) = 0.0;
  Matrix p = t.value(t.softmax_rows(t.constant(x)));
  CHECK(p(0, 0) == 1.0);
  CHECK(p(0, 1) == 0.0);  // exp(-1000) underflows to exactly zero
}

TEST_CASE("softmax_rows: rows are nonnegative and sum to 1") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Tape t;
    Matrix p = t.value(t.softmax_rows(t.constant(testutil::random_matrix(5, 7, seed, -40, 40))));
    for (int i = 0; i < 5; ++i) {
      double sum = 0.0;
      for (int j = 0; j < 7; ++j) {
        CHECK(p(i, j) >= 0.0);
        sum += p(i, j);
      }
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("linear: identity weight and zero bias pass through; zero input gives bias rows") {
  Parameter w("w", Matrix::identity(3)), b("b", Matrix(1, 3));
  Matrix x = testutil::random_matrix(4, 3, 21);
  {
    Tape t;
    CHECK(alter::max_abs_diff(t.value(t.linear(t.constant(x), w, b)), x) < 1e-15);
  }
  Parameter b2("b2", testutil::random_matrix(1, 3, 22));
  Tape t;
  Matrix y = t.value(t.linear(t.constant(Matrix(4, 3, 0.0)), w, b2));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) CHECK(y(i, j) == b2.value(0, j));
}

TEST_CASE("layer_norm: constant rows normalize to the bias") {
  Parameter g("g", Matrix(1, 4, 1.0)), b("b", testutil::random_matrix(1, 4, 31));
  Tape t;
  Matrix y = t.value(t.layer_norm(t.constant(Matrix(3, 4, 2.5)), t.param(g), t.param(b)));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) CHECK(y(i, j) == doctest::Approx(b.value(0, j)).epsilon(1e-12));
}

TEST_CASE("layer_norm: a zero-mean unit-variance row is preserved up to gain and bias") {
  Matrix x(1, 4);
  x(0, 0) = -1.0;
  x(0, 1) = 1.0;
  x(0, 2) = -1.0;
  x(0, 3) = 1.0;  // mean 0, population variance 1
  Parameter g("g", Matrix(1, 4, 2.0)), b("b", Matrix(1, 4, 0.5));
  Tape t;
  Matrix y = t.value(t.layer_norm(t.constant(x), t.param(g), t.param(b), 1e-12));
  for (int j = 0; j < 4; ++j) CHECK(y(0, j) == doctest::Approx(2.0 * x(0, j) + 0.5).epsilon(1e-9));
}

TEST_CASE("backward: loss = sum(w) gives an all-ones gradient") {
  Parameter w("w", testutil::random_matrix(3, 4, 41));
  Tape t;
  t.backward(t.sum_all(t.param(w)));
  CHECK(w.grad == Matrix(3, 4, 1.0));
}

TEST_CASE("backward: quadratic loss matches the analytic gradient") {
  // loss = ||x w^T||^2, d/dw = 2 (x w^T)^T x
  Matrix x = testutil::random_matrix(5, 3, 51);
  Parameter w("w", testutil::random_matrix(2, 3, 52));
  Tape t;
  Tape::Id y = t.matmul_nt(t.constant(x), t.param(w));
  t.backward(t.sum_squares(y));
  const Matrix& yv = t.value(y);
  Matrix expected(2, 3);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int i = 0; i < 5; ++i) s += 2.0 * yv(i, r) * x(i, c);
      expected(r, c) = s;
    }
  CHECK(alter::max_abs_diff(w.grad, expected) < 1e-10);
}

TEST_CASE("backward: unreached parameters keep zero gradients") {
  Parameter used("used", testutil::random_matrix(2, 2, 61));
  Parameter unused("unused", testutil::random_matrix(2, 2, 62));
  Tape t;
  Tape::Id lost = t.param(unused);
  (void)lost;
  t.backward(t.sum_all(t.param(used)));
  CHECK(unused.grad == Matrix(2, 2, 0.0));
  CHECK(used.grad == Matrix(2, 2, 1.0));
}

TEST_CASE("backward: errors without a forward record or on non-scalar loss") {
  Tape empty;
  CHECK_THROWS_AS(empty.backward(0), std::logic_error);
  Tape t;
  Tape::Id m = t.constant(Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(t.backward(m), std::invalid_argument);
}

TEST_CASE("backward is deterministic: identical runs give bit-identical grads") {
  auto run = [](Parameter& w, Parameter& b) {
    w.zero_grad();
    b.zero_grad();
    Tape t;
    Tape::Id x = t.constant(testutil::random_matrix(6, 4, 777));
    Tape::Id h = t.relu(t.linear(x, w, b));
    t.backward(t.sum_squares(h));
  };
  Parameter w1("w", testutil::random_matrix(4, 4, 71)), b1("b", testutil::random_matrix(1, 4, 72));
  Parameter w2("w", w1.value), b2("b", b1.value);
  run(w1, b1);
  run(w2, b2);
  CHECK(w1.grad == w2.grad);
  CHECK(b1.grad == b2.grad);
}

TEST_CASE("non-finite values are hard errors") {
  Matrix bad(2, 2, 1.0);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  Tape t;
  CHECK_THROWS_AS(t.constant(bad), std::runtime_error);
  Matrix big(1, 2, 1e308);
  Tape::Id node = t.constant(big);
  CHECK_THROWS_AS(t.add(node, node), std::runtime_error);  // overflow to inf
}

TEST_CASE("every differentiable op passes central-difference checks") {
  Parameter a("a", bounded_away_from_zero(4, 3, 100));
  Parameter b("b", bounded_away_from_zero(3, 5, 101));
  SUBCASE("matmul") {
    auto r =
        check_op({&a, &b}, [&](Tape& t) { return t.sum_squares(t.matmul(t.param(a), t.param(b))); });
    CHECK(r.passed());
  }
  SUBCASE("matmul_nt and matmul_tn") {
    Parameter c("c", bounded_away_from_zero(6, 3, 102));
    auto r1 = check_op(
        {&a, &c}, [&](Tape& t) { return t.sum_squares(t.matmul_nt(t.param(a), t.param(c))); });
    CHECK(r1.passed());
    Parameter d("d", bounded_away_from_zero(4, 5, 103));
    auto r2 = check_op(
        {&a, &d}, [&](Tape& t) { return t.sum_squares(t.matmul_tn(t.param(a), t.param(d))); });
    CHECK(r2.passed());
  }
  SUBCASE("add, add_row, scale") {
    Parameter a2("a2", bounded_away_from_zero(4, 3, 104));
    Parameter row("row", bounded_away_from_zero(1, 3, 105));
    auto r = check_op({&a, &a2, &row}, [&](Tape& t) {
      return t.sum_squares(t.scale(t.add_row(t.add(t.param(a), t.param(a2)), t.param(row)), 1.7));
    });
    CHECK(r.passed());
  }
  SUBCASE("relu") {
    auto r = check_op({&a}, [&](Tape& t) { return t.sum_squares(t.relu(t.param(a))); });
    CHECK(r.passed());
  }
  SUBCASE("softmax_rows") {
    auto r = check_op({&a}, [&](Tape& t) {
      Tape::Id p = t.softmax_rows(t.param(a));
      return t.sum_squares(t.add_row(p, t.constant(Matrix(1, 3, -0.3))));
    });
    CHECK(r.passed());
  }
  SUBCASE("layer_norm") {
    Parameter g("g", bounded_away_from_zero(1, 3, 106));
    Parameter bias("bias", bounded_away_from_zero(1, 3, 107));
    auto r = check_op({&a, &g, &bias}, [&](Tape& t) {
      return t.sum_squares(t.layer_norm(t.param(a), t.param(g), t.param(bias)));
    });
    CHECK(r.passed());
  }
  SUBCASE("concat_cols splits the gradient exactly") {
    Parameter right("right", bounded_away_from_zero(4, 2, 108));
    auto r = check_op({&a, &right}, [&](Tape& t) {
      return t.sum_squares(t.concat_cols(t.param(a), t.param(right)));
    });
    CHECK(r.passed());
  }
  SUBCASE("slice, gather, flatten") {
    auto r = check_op({&a}, [&](Tape& t) {
      Tape::Id sliced = t.slice_cols(t.param(a), 1, 2);
      Tape::Id gathered = t.gather_rows(sliced, {2, 0, 2});
      return t.sum_squares(t.flatten_row(gathered));
    });
    CHECK(r.passed());
  }
  SUBCASE("column reductions") {
    auto r = check_op({&a}, [&](Tape& t) {
      Tape::Id joined = t.concat_cols(
          t.concat_cols(t.col_mean(t.param(a)), t.col_max(t.param(a))), t.col_sum(t.param(a)));
      return t.sum_squares(joined);
    });
    CHECK(r.passed());
  }
  SUBCASE("cross_entropy through softmax") {
    Parameter logits("logits", bounded_away_from_zero(1, 4, 109));
    auto r = check_op(
        {&logits}, [&](Tape& t) { return t.cross_entropy(t.softmax_rows(t.param(logits)), 2); });
    CHECK(r.passed());
  }
}

TEST_CASE("chained two-linear network passes finite differences") {
  Parameter w1("w1", bounded_away_from_zero(5, 3, 110));
  Parameter b1("b1", bounded_away_from_zero(1, 5, 111));
  Parameter w2("w2", bounded_away_from_zero(2, 5, 112));
  Parameter b2("b2", bounded_away_from_zero(1, 2, 113));
  Matrix x = bounded_away_from_zero(6, 3, 114);
  auto r = check_op({&w1, &b1, &w2, &b2}, [&](Tape& t) {
    Tape::Id h = t.relu(t.linear(t.constant(x), w1, b1));
    return t.sum_squares(t.linear(h, w2, b2));
  });
  CHECK(r.passed());
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("finite_diff_check: a linear model passes at 1e-6") {
  Parameter w("w", testutil::random_matrix(3, 3, 120));
  auto build = [&](Tape& t) {
    return t.sum_all(t.matmul(t.constant(Matrix::identity(3)), t.param(w)));
  };
  w.zero_grad();
  {
    Tape t;
    t.backward(build(t));
  }
  auto loss = [&]() {
    Tape t;
    return t.value(build(t))(0, 0);
  };
  auto report = alter::finite_diff_check(loss, {&w}, 1e-6, 9);
  CHECK(report.passed());
  CHECK(report.checked == 9);
}

TEST_CASE("checkpoint: round trip, byte determinism, strict name matching") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "alter_ckpt_test").string();
  fs::remove_all(dir);
  alter::io::ensure_dir(dir);

  Parameter w("w", testutil::random_matrix(3, 5, 130));
  Parameter b("b", testutil::random_matrix(1, 5, 131));
  alter::save_checkpoint(dir + "/a.ckpt", {&w, &b});
  alter::save_checkpoint(dir + "/b.ckpt", {&w, &b});
  CHECK(alter::io::read_file(dir + "/a.ckpt") == alter::io::read_file(dir + "/b.ckpt"));

  Parameter w2("w", Matrix(3, 5)), b2("b", Matrix(1, 5));
  std::vector<Parameter*> targets = {&w2, &b2};
  alter::load_checkpoint(dir + "/a.ckpt", targets);
  CHECK(w2.value == w.value);
  CHECK(b2.value == b.value);

  Parameter stranger("other", Matrix(3, 5));
  std::vector<Parameter*> wrong = {&stranger, &b2};
  CHECK_THROWS_AS(alter::load_checkpoint(dir + "/a.ckpt", wrong), std::runtime_error);
  Parameter misshaped("w", Matrix(5, 3));
  std::vector<Parameter*> badshape = {&misshaped, &b2};
  CHECK_THROWS_AS(alter::load_checkpoint(dir + "/a.ckpt", badshape), std::runtime_error);
  CHECK_THROWS_AS(alter::load_checkpoint(dir + "/missing.ckpt", targets), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("finite_diff_check: a corrupted gradient fails") {
  Parameter w("w", testutil::random_matrix(3, 3, 121));
  auto build = [&](Tape& t) { return t.sum_squares(t.param(w)); };
  w.zero_grad();
  {
    Tape t;
    t.backward(build(t));
  }
  w.grad(1, 1) += 0.5;  // deliberate corruption
  auto loss = [&]() {
    Tape t;
    return t.value(build(t))(0, 0);
  };
  auto report = alter::finite_diff_check(loss, {&w}, 1e-4, 9);
  CHECK_FALSE(report.passed());
  CHECK(report.failed == 1);
  CHECK(report.worst.row == 1);
  CHECK(report.worst.col == 1);
}
