#include "alter/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "alter/io.hpp"
#include "alter/threads.hpp"

namespace alter {

using nlohmann::json;

void TimeSeriesTable::validate() const {
  if (values.rows < 2) throw std::invalid_argument("time series needs at least 2 timepoints");
  if (values.cols < 2) throw std::invalid_argument("time series needs at least 2 ROIs");
  if (!values.all_finite()) throw std::invalid_argument("time series contains non-finite values");
}

void BrainGraph::validate() const {
  if (n != x.rows || n != x.cols || n != a.rows || n != a.cols)
    throw std::invalid_argument("brain graph: inconsistent dimensions");
  for (int i = 0; i < n; ++i) {
    if (x(i, i) != 1.0) throw std::invalid_argument("brain graph: x diagonal must be 1");
    if (a(i, i) != 0.0) throw std::invalid_argument("brain graph: a diagonal must be 0");
    for (int j = 0; j < n; ++j) {
      if (x(i, j) != x(j, i) || a(i, j) != a(j, i))
        throw std::invalid_argument("brain graph: x and a must be symmetric");
      if (x(i, j) < -1.0 || x(i, j) > 1.0)
        throw std::invalid_argument("brain graph: x entries must lie in [-1, 1]");
      if (a(i, j) != 0.0 && a(i, j) != 1.0)
        throw std::invalid_argument("brain graph: a entries must be binary");
    }
  }
}

void LabeledDataset::validate(bool require_both_classes) const {
  if (graphs.size() != labels.size())
    throw std::invalid_argument("dataset: graphs and labels length mismatch");
  for (int y : labels)
    if (y != 0 && y != 1) throw std::invalid_argument("dataset: labels must be 0 or 1");
  if (require_both_classes) {
    bool has0 = false, has1 = false;
    for (int y : labels) (y ? has1 : has0) = true;
    if (!has0 || !has1) throw std::invalid_argument("dataset: both classes required");
  }
}

Matrix pearson_matrix(const TimeSeriesTable& ts) {
  ts.validate();
  int flat = 0;
  Matrix out;
  kernels::pearson(ts.values, out, &flat);
  if (flat > 0)
    std::cerr << "warning: " << flat << " zero-variance ROI series in subject '"
              << ts.subject_id << "'; their correlations are set to 0\n";
  return out;
}

Matrix build_adjacency(const Matrix& corr, double threshold) {
  if (corr.rows != corr.cols) throw std::invalid_argument("build_adjacency: matrix not square");
  if (!corr.all_finite()) throw std::invalid_argument("build_adjacency: non-finite input");
  const int n = corr.rows;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a(i, j) = (i != j && corr(i, j) >= threshold) ? 1.0 : 0.0;
  return a;
}

BrainGraph build_graph(const TimeSeriesTable& ts, double threshold) {
  BrainGraph g;
  g.n = ts.rois();
  g.x = pearson_matrix(ts);
  g.a = build_adjacency(g.x, threshold);
  g.subject_id = ts.subject_id;
  return g;
}

SplitIndices split_dataset(size_t n, SplitRatios ratios, uint64_t seed) {
  if (n < 10) throw std::invalid_argument("split_dataset: need at least 10 samples");
  const double sum = ratios.train + ratios.val + ratios.test;
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split_dataset: ratios must sum to 1");
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0)
    throw std::invalid_argument("split_dataset: ratios must be nonnegative");

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  const size_t n_val = static_cast<size_t>(std::floor(ratios.val * double(n)));
  const size_t n_test = static_cast<size_t>(std::floor(ratios.test * double(n)));
  const size_t n_train = n - n_val - n_test;  // remainder goes to train

  SplitIndices s;
  s.seed = seed;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());
  return s;
}

SplitIndices split_dataset(const LabeledDataset& ds, SplitRatios ratios, uint64_t seed) {
  return split_dataset(ds.size(), ratios, seed);
}

DatasetManifest read_dataset_manifest(const std::string& dir) {
  json j = json::parse(io::read_file(dir + "/dataset.json"));
  DatasetManifest m;
  m.name = j.at("name").get<std::string>();
  m.num_rois = j.at("num_rois").get<int>();
  for (const auto& s : j.at("subjects")) {
    SubjectEntry e;
    e.id = s.at("id").get<std::string>();
    e.timeseries = s.at("timeseries").get<std::string>();
    e.label = s.at("label").get<int>();
    if (e.label != 0 && e.label != 1)
      throw std::runtime_error("dataset.json: label must be 0 or 1 for subject " + e.id);
    m.subjects.push_back(std::move(e));
  }
  return m;
}

void write_dataset_manifest(const std::string& dir, const DatasetManifest& m) {
  json subjects = json::array();
  for (const auto& s : m.subjects)
    subjects.push_back({{"id", s.id}, {"timeseries", s.timeseries}, {"label", s.label}});
  json j = {{"name", m.name}, {"num_rois", m.num_rois}, {"subjects", subjects}};
  io::write_file(dir + "/dataset.json", j.dump(2) + "\n");
}

TimeSeriesTable load_timeseries(const std::string& dir, const SubjectEntry& entry) {
  TimeSeriesTable ts;
  ts.values = io::read_csv(dir + "/" + entry.timeseries);
  ts.subject_id = entry.id;
  ts.validate();
  return ts;
}

LabeledDataset load_dataset(const std::string& dir, double threshold) {
  DatasetManifest m = read_dataset_manifest(dir);
  LabeledDataset ds;
  ds.name = m.name;
  const int count = static_cast<int>(m.subjects.size());
  ds.graphs.resize(count);
  ds.labels.resize(count);
  std::string error;
#pragma omp parallel for schedule(dynamic) num_threads(threads::worker_count())
  for (int i = 0; i < count; ++i) {
    try {
      TimeSeriesTable ts = load_timeseries(dir, m.subjects[i]);
      if (ts.rois() != m.num_rois)
        throw std::runtime_error("subject " + m.subjects[i].id + ": ROI count mismatch");
      ds.graphs[i] = build_graph(ts, threshold);
      ds.labels[i] = m.subjects[i].label;
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error("load_dataset: " + error);
  return ds;
}

}  // namespace alter
