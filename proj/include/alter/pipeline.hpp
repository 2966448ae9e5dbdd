#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "alter/alga.hpp"
#include "alter/synth.hpp"
#include "alter/training.hpp"

namespace alter::pipeline {

struct EncodeOptions {
  double threshold = 0.3;
  int hops = 16;
  bool renormalize = false;
};

/// Everything derived from one subject's time series.
struct SubjectEncoding {
  BrainGraph graph;
  AdaptiveFactors factors;
  RwKernel kernel;
  LongRangeEmbedding embedding;
};

SubjectEncoding encode_subject(const TimeSeriesTable& ts, const EncodeOptions& opt);

struct EncodedDataset {
  LabeledDataset ds;
  std::vector<LongRangeEmbedding> embeddings;
};

/// Loads a dataset directory and encodes every subject (parallel).
EncodedDataset load_and_encode(const std::string& data_dir, const EncodeOptions& opt);

/// Writes per-subject X/A/F/E CSV caches plus manifest.json (threshold,
/// hops, renormalize, source hash). Idempotent: identical bytes on re-run.
void write_encode_cache(const std::string& data_dir, const std::string& out_dir,
                        const EncodeOptions& opt);

/// Full run configuration as accepted by `alter train` / `alter sweep`.
struct RunConfig {
  std::string data;  // dataset directory
  double threshold = 0.3;
  bool renormalize = false;
  ModelConfig model;
  TrainConfig train;
};

// JSON <-> config converters. Unknown keys are rejected everywhere.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json synth_config_to_json(const SynthConfig& cfg);

/// Applies a `--set key=value` override (dotted paths such as train.lr);
/// the key must already exist in the config object.
void apply_override(nlohmann::json& config, const std::string& assignment);

std::string config_hash(const nlohmann::json& j);

nlohmann::json metrics_to_json(const Metrics& m);
nlohmann::json run_record_to_json(const RunRecord& r);

/// Trains per the config, writing config.json, init/best/final checkpoints
/// and metrics.json into out_dir. Returns the record.
RunRecord run_training(const RunConfig& cfg, const std::string& out_dir);

/// Re-evaluates a checkpoint on a named split ("train"|"val"|"test") using
/// the run config (by default config.json next to the checkpoint).
Metrics run_eval(const std::string& ckpt_path, const std::string& config_path,
                 const std::string& split);

struct SweepRow {
  int hops = 0;
  SeedSummary summary;
};

/// One training sweep per hop count, aggregated over seeds
/// (train.seed .. train.seed + n_seeds - 1). Writes summary.json.
std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::vector<int>& hops_list,
                                int n_seeds, const std::string& out_dir);

/// Exports attention for one subject from a trained checkpoint: CSV + PGM,
/// mean over the last layer's heads, plus per-head files when requested.
void run_attention_export(const std::string& ckpt_path, const std::string& config_path,
                          const std::string& subject_id, bool per_head,
                          const std::string& out_dir);

}  // namespace alter::pipeline
