#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alter/model.hpp"

namespace alter {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int batch_size = 16;
  int epochs = 200;
  uint64_t seed = 0;
  double lr_min = 0.0;  // cosine floor
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool coupled_decay = false;  // L2 through the gradient instead of decoupled decay

  void validate() const;
};

struct Metrics {
  double acc = 0.0, auc = 0.0, sen = 0.0, spe = 0.0, f1 = 0.0;
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct RunRecord {
  std::vector<double> train_loss;   // per epoch
  std::vector<Metrics> val_metrics; // per epoch
  int best_epoch = -1;
  double best_val_auc = 0.0;
  Metrics test;
  uint64_t seed = 0;
  std::string config_hash;
  std::string init_checkpoint, best_checkpoint, final_checkpoint;  // empty for in-memory runs
};

/// -log p[label], clamped at p >= 1e-12.
double cross_entropy(const Matrix& probs, int label);

/// Cosine schedule: lr_min + (lr_max - lr_min) * (1 + cos(pi * step / total)) / 2.
double cosine_lr(int step, int total_steps, double lr_max, double lr_min);

/// Mann-Whitney AUC with ties counted 1/2; throws on single-class input.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Confusion at the given threshold on class-1 scores plus AUC from the raw
/// scores. Zero-denominator rates are defined as 0.
Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                        double threshold = 0.5);

struct AdamState {
  Matrix m, v;
};

/// One Adam update with bias correction; decay is decoupled unless
/// coupled_decay is set. t counts steps from 1.
void adam_step(Parameter& p, AdamState& state, long t, double lr_t, const TrainConfig& cfg);

/// Class-1 probabilities for the given subjects (parallel, order-stable).
std::vector<double> forward_scores(AlterModel& model, const LabeledDataset& ds,
                                   const std::vector<LongRangeEmbedding>& embs,
                                   const std::vector<int>& indices);

Metrics evaluate(AlterModel& model, const LabeledDataset& ds,
                 const std::vector<LongRangeEmbedding>& embs, const std::vector<int>& indices,
                 double threshold = 0.5);

/// The 7:1:2 split train_loop derives from a run seed (shared with eval so a
/// saved checkpoint is scored on the same subjects it was trained against).
SplitIndices train_split(const LabeledDataset& ds, uint64_t seed);

/// Full training protocol: 7:1:2 split derived from the seed, Adam with a
/// per-epoch cosine schedule, best checkpoint by validation AUC, test
/// metrics from the best parameters. Deterministic given the seed. When
/// out_dir is non-empty, init/best/final checkpoints are written there.
RunRecord train_loop(const LabeledDataset& ds, const std::vector<LongRangeEmbedding>& embs,
                     const ModelConfig& mcfg, const TrainConfig& tcfg,
                     const std::string& out_dir = "");

struct MetricSummary {
  double mean = 0.0, std_dev = 0.0;
};

struct SeedSummary {
  std::vector<uint64_t> seeds;
  std::vector<RunRecord> runs;  // sorted by seed
  MetricSummary acc, auc, sen, spe, f1;
};

/// Repeats train_loop across seeds and aggregates test metrics (sample
/// standard deviation; 0 for a single run).
SeedSummary run_seeds(const LabeledDataset& ds, const std::vector<LongRangeEmbedding>& embs,
                      const ModelConfig& mcfg, const TrainConfig& tcfg,
                      std::vector<uint64_t> seeds, const std::string& out_dir = "");

}  // namespace alter
