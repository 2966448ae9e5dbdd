#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <set>

#include "alter/graph.hpp"
#include "alter/io.hpp"
#include "test_util.hpp"

using alter::BrainGraph;
using alter::Matrix;
using alter::TimeSeriesTable;

namespace {

TimeSeriesTable make_ts(std::initializer_list<std::initializer_list<double>> cols) {
  // written column-per-ROI for readability; transpose into rows=timepoints
  Matrix by_col = Matrix::from_rows(cols);
  TimeSeriesTable ts;
  ts.values = Matrix(by_col.cols, by_col.rows);
  for (int i = 0; i < by_col.rows; ++i)
    for (int j = 0; j < by_col.cols; ++j) ts.values(j, i) = by_col(i, j);
  ts.subject_id = "test";
  return ts;
}

// Direct covariance-formula Pearson with the 1/(T-1) convention; the
// independent oracle for pearson_matrix.
double pearson_oracle(const TimeSeriesTable& ts, int i, int j) {
  const int t = ts.timepoints();
  double mi = 0.0, mj = 0.0;
  for (int k = 0; k < t; ++k) {
    mi += ts.values(k, i);
    mj += ts.values(k, j);
  }
  mi /= t;
  mj /= t;
  double cov = 0.0, vi = 0.0, vj = 0.0;
  for (int k = 0; k < t; ++k) {
    cov += (ts.values(k, i) - mi) * (ts.values(k, j) - mj);
    vi += (ts.values(k, i) - mi) * (ts.values(k, i) - mi);
    vj += (ts.values(k, j) - mj) * (ts.values(k, j) - mj);
  }
  cov /= (t - 1);
  vi /= (t - 1);
  vj /= (t - 1);
  return cov / (std::sqrt(vi) * std::sqrt(vj));
}

}  // namespace

TEST_CASE("pearson_matrix: exact linear dependence gives r = 1") {
  TimeSeriesTable ts = make_ts({{1, 2, 3}, {2, 4, 6}});
  Matrix r = alter::pearson_matrix(ts);
  CHECK(r(0, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r(0, 0) == 1.0);
  CHECK(r(1, 1) == 1.0);
}

TEST_CASE("pearson_matrix: exact negative dependence gives r = -1") {
  TimeSeriesTable ts = make_ts({{1, 2, 3}, {3, 2, 1}});
  CHECK(alter::pearson_matrix(ts)(0, 1) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("pearson_matrix: zero-variance series correlates to 0") {
  TimeSeriesTable ts = make_ts({{5, 5, 5}, {1, 2, 3}});
  Matrix r = alter::pearson_matrix(ts);
  CHECK(r(0, 1) == 0.0);
  CHECK(r(0, 0) == 1.0);
}

TEST_CASE("pearson_matrix: errors on short or non-finite input") {
  TimeSeriesTable one_row;
  one_row.values = Matrix(1, 3, 1.0);
  CHECK_THROWS_AS(alter::pearson_matrix(one_row), std::invalid_argument);
  TimeSeriesTable bad = make_ts({{1, 2, 3}, {2, 4, 6}});
  bad.values(0, 0) = std::nan("");
  CHECK_THROWS_AS(alter::pearson_matrix(bad), std::invalid_argument);
}

TEST_CASE("pearson_matrix: invariant to positive affine rescaling of one ROI") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    TimeSeriesTable ts;
    ts.values = testutil::random_matrix(30, 6, seed + 500);
    Matrix base = alter::pearson_matrix(ts);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(0.1, 5.0), shift(-3.0, 3.0);
    const int roi = int(seed % 6);
    const double a = scale(rng), b = shift(rng);
    for (int k = 0; k < 30; ++k) ts.values(k, roi) = a * ts.values(k, roi) + b;
    CHECK(alter::max_abs_diff(alter::pearson_matrix(ts), base) < 1e-12);
  }
}

TEST_CASE("pearson_matrix matches the covariance-formula oracle") {
  TimeSeriesTable ts;
  ts.values = testutil::random_matrix(25, 5, 321);
  Matrix r = alter::pearson_matrix(ts);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (i != j) CHECK(r(i, j) == doctest::Approx(pearson_oracle(ts, i, j)).epsilon(1e-12));
}

TEST_CASE("build_adjacency: boundary is included, diagonal excluded") {
  Matrix corr = Matrix::from_rows({{1.0, 0.3}, {0.3, 1.0}});
  Matrix a = alter::build_adjacency(corr, 0.3);
  CHECK(a(0, 1) == 1.0);
  CHECK(a(1, 0) == 1.0);
  CHECK(a(0, 0) == 0.0);  // diagonal of 1.0 still excluded
  CHECK(a(1, 1) == 0.0);
  CHECK(alter::build_adjacency(Matrix::identity(4), 0.3) == Matrix(4, 4, 0.0));
}

TEST_CASE("build_adjacency is monotone in the threshold") {
  Matrix corr = testutil::random_matrix(12, 12, 77);
  for (int i = 0; i < 12; ++i) {
    corr(i, i) = 1.0;
    for (int j = 0; j < i; ++j) corr(i, j) = corr(j, i);
  }
  double prev_edges = 1e9;
  for (double th : {-0.5, 0.0, 0.2, 0.4, 0.8, 1.01}) {
    Matrix a = alter::build_adjacency(corr, th);
    double edges = 0;
    for (double v : a.data) edges += v;
    CHECK(edges <= prev_edges);
    prev_edges = edges;
  }
}

TEST_CASE("build_graph: one correlated pair over threshold yields exactly one edge") {
  // ROI 0 and 1 strongly correlated; ROI 2 constructed nearly orthogonal
  TimeSeriesTable ts = make_ts({{1, 2, 3, 4, 5, 6},
                                {1.1, 2.2, 2.9, 4.2, 4.8, 6.1},
                                {0.4, -1.2, 0.9, -0.3, 1.1, -0.8}});
  // verify the intent against the oracle before trusting the graph
  REQUIRE(pearson_oracle(ts, 0, 1) >= 0.3);
  REQUIRE(std::fabs(pearson_oracle(ts, 0, 2)) < 0.3);
  REQUIRE(std::fabs(pearson_oracle(ts, 1, 2)) < 0.3);
  BrainGraph g = alter::build_graph(ts, 0.3);
  g.validate();
  double edges = 0;
  for (double v : g.a.data) edges += v;
  CHECK(edges == 2.0);  // one undirected edge
  CHECK(g.a(0, 1) == 1.0);
}

TEST_CASE("build_graph: impossible threshold gives an edgeless graph") {
  TimeSeriesTable ts;
  ts.values = testutil::random_matrix(40, 8, 1234);
  BrainGraph g = alter::build_graph(ts, 1.01);
  CHECK(g.a == Matrix(8, 8, 0.0));
}

TEST_CASE("build_graph: two perfectly correlated ROIs") {
  TimeSeriesTable ts = make_ts({{1, 2, 3}, {2, 4, 6}});
  BrainGraph g = alter::build_graph(ts, 0.3);
  CHECK(alter::max_abs_diff(g.x, Matrix::from_rows({{1, 1}, {1, 1}})) < 1e-12);
  CHECK(g.a == Matrix::from_rows({{0, 1}, {1, 0}}));
}

TEST_CASE("build_graph is equivariant under ROI permutation") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    TimeSeriesTable ts;
    ts.values = testutil::random_matrix(20, 7, seed + 40);
    BrainGraph g = alter::build_graph(ts, 0.2);
    std::vector<int> perm = testutil::random_permutation(7, seed);
    TimeSeriesTable permuted;
    permuted.values = Matrix(20, 7);
    for (int k = 0; k < 20; ++k)
      for (int j = 0; j < 7; ++j) permuted.values(k, perm[j]) = ts.values(k, j);
    BrainGraph pg = alter::build_graph(permuted, 0.2);
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j) {
        CHECK(pg.x(perm[i], perm[j]) == doctest::Approx(g.x(i, j)).epsilon(1e-12));
        CHECK(pg.a(perm[i], perm[j]) == g.a(i, j));
      }
  }
}

TEST_CASE("split_dataset: paper ratio sizes") {
  auto s = alter::split_dataset(100, {}, 7);
  CHECK(s.train.size() == 70);
  CHECK(s.val.size() == 10);
  CHECK(s.test.size() == 20);
  auto t = alter::split_dataset(10, {}, 7);
  CHECK(t.train.size() == 7);
  CHECK(t.val.size() == 1);
  CHECK(t.test.size() == 2);
}

TEST_CASE("split_dataset: deterministic given the seed") {
  auto a = alter::split_dataset(53, {}, 99);
  auto b = alter::split_dataset(53, {}, 99);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  auto c = alter::split_dataset(53, {}, 100);
  CHECK(a.train != c.train);
}

TEST_CASE("split_dataset partitions indices exactly for random sizes and seeds") {
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t n = 10 + rng() % 500;
    auto s = alter::split_dataset(n, {}, rng());
    std::set<int> seen;
    for (const auto* part : {&s.train, &s.val, &s.test})
      for (int idx : *part) {
        CHECK(idx >= 0);
        CHECK(idx < int(n));
        CHECK(seen.insert(idx).second);  // disjoint
      }
    CHECK(seen.size() == n);  // exhaustive
  }
}

TEST_CASE("split_dataset rejects bad inputs") {
  CHECK_THROWS_AS(alter::split_dataset(9, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(alter::split_dataset(100, {0.7, 0.1, 0.1}, 1), std::invalid_argument);
}

TEST_CASE("dataset manifest and time-series CSV round trip") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "alter_graph_io_test").string();
  fs::remove_all(dir);
  alter::io::ensure_dir(dir + "/ts");

  Matrix values = testutil::random_matrix(15, 4, 88);
  alter::io::write_csv(dir + "/ts/s0.csv", values);
  alter::DatasetManifest m;
  m.name = "tiny";
  m.num_rois = 4;
  m.subjects.push_back({"s0", "ts/s0.csv", 1});
  alter::write_dataset_manifest(dir, m);

  alter::DatasetManifest back = alter::read_dataset_manifest(dir);
  CHECK(back.name == "tiny");
  CHECK(back.num_rois == 4);
  REQUIRE(back.subjects.size() == 1);
  CHECK(back.subjects[0].label == 1);
  TimeSeriesTable ts = alter::load_timeseries(dir, back.subjects[0]);
  CHECK(ts.values == values);  // exact: format_double round-trips
  CHECK(ts.subject_id == "s0");

  alter::LabeledDataset ds = alter::load_dataset(dir, 0.3);
  CHECK(ds.size() == 1);
  CHECK(ds.labels[0] == 1);
  ds.graphs[0].validate();
  fs::remove_all(dir);
}
