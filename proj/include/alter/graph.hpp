#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alter/matrix.hpp"

namespace alter {

/// Per-subject ROI time series: rows are timepoints, columns are ROIs.
struct TimeSeriesTable {
  Matrix values;
  std::string subject_id;

  int timepoints() const { return values.rows; }
  int rois() const { return values.cols; }
  void validate() const;  // T >= 2, N >= 2, all entries finite
};

/// Brain graph: node features x are the ROI correlation profiles, a is the
/// thresholded binary adjacency (symmetric, zero diagonal).
struct BrainGraph {
  int n = 0;
  Matrix x;
  Matrix a;
  std::string subject_id;
  std::vector<std::string> roi_labels;  // optional atlas names

  void validate() const;
};

struct LabeledDataset {
  std::vector<BrainGraph> graphs;
  std::vector<int> labels;  // class indices in {0, 1}
  std::string name;

  size_t size() const { return graphs.size(); }
  void validate(bool require_both_classes = false) const;
};

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct SplitIndices {
  std::vector<int> train, val, test;
  uint64_t seed = 0;
};

/// Pearson correlation matrix of the ROI columns. Zero-variance columns get
/// r = 0 off-diagonal (a warning is printed to stderr) and 1 on the diagonal.
Matrix pearson_matrix(const TimeSeriesTable& ts);

/// a(i,j) = 1 iff i != j and corr(i,j) >= threshold; diagonal forced to zero.
Matrix build_adjacency(const Matrix& corr, double threshold);

BrainGraph build_graph(const TimeSeriesTable& ts, double threshold);

/// Deterministic shuffle-then-cut split. Sizes are floor allocations for val
/// and test with the remainder going to train.
SplitIndices split_dataset(size_t n, SplitRatios ratios, uint64_t seed);
SplitIndices split_dataset(const LabeledDataset& ds, SplitRatios ratios, uint64_t seed);

// --- dataset directory format -------------------------------------------
// dataset.json: { "name", "num_rois", "subjects": [ {"id", "timeseries",
// "label"} ] } with per-subject headerless CSV time series.

struct SubjectEntry {
  std::string id;
  std::string timeseries;  // path relative to the dataset directory
  int label = 0;
};

struct DatasetManifest {
  std::string name;
  int num_rois = 0;
  std::vector<SubjectEntry> subjects;
};

DatasetManifest read_dataset_manifest(const std::string& dir);
void write_dataset_manifest(const std::string& dir, const DatasetManifest& m);
TimeSeriesTable load_timeseries(const std::string& dir, const SubjectEntry& entry);

/// Loads every subject and builds graphs at the given threshold; parallel
/// over subjects.
LabeledDataset load_dataset(const std::string& dir, double threshold);

}  // namespace alter
