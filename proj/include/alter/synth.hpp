#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "alter/graph.hpp"

namespace alter {

/// Synthetic planted-long-range generator. ROIs sit on a ring; contiguous
/// community blocks share a latent series, and class-1 subjects additionally
/// couple the planted pairs through per-pair latents:
///   t_i = alpha * community + [class=1, i planted] * beta * pair + sigma * noise
/// Default pairs live on ring nodes not covered by any community block, so
/// the class signal shows up only on the planted entries of the correlation
/// matrix (and, after thresholding, as a long-range edge).
struct SynthConfig {
  int n_rois = 40;
  int timepoints = 200;
  int subjects_per_class = 200;
  int communities = 4;
  int community_size = 8;
  std::vector<std::pair<int, int>> planted_pairs = {{8, 28}, {19, 39}};
  double alpha = 1.0;  // community coupling
  double beta = 1.0;   // planted-pair coupling (class 1 only)
  double sigma = 1.0;  // per-ROI noise
  uint64_t seed = 42;
  std::string name = "synth-longrange";

  void validate() const;
  int ring_distance(int i, int j) const;
  /// Community block index covering node i, or -1 when uncovered.
  int community_of(int node) const;
};

TimeSeriesTable generate_subject(const SynthConfig& cfg, int class_label, uint64_t subject_seed);

/// Balanced in-memory dataset with graphs built at the given threshold;
/// subject seeds derive from mix_seed(cfg.seed, global index).
LabeledDataset generate_dataset(const SynthConfig& cfg, double threshold = 0.3);

/// Writes the dataset-directory format (dataset.json + ts/<id>.csv) plus
/// synth_manifest.json recording every config field. Deterministic bytes.
void write_synth_dataset(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace alter
