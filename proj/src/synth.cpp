#include "alter/synth.hpp"

#include <random>
#include <stdexcept>

#include <json.hpp>

#include "alter/io.hpp"
#include "alter/threads.hpp"

namespace alter {

using nlohmann::json;

int SynthConfig::ring_distance(int i, int j) const {
  const int d = std::abs(i - j);
  return std::min(d, n_rois - d);
}

int SynthConfig::community_of(int node) const {
  const int stride = n_rois / communities;
  const int block = node / stride;
  if (block < communities && node - block * stride < community_size) return block;
  return -1;
}

void SynthConfig::validate() const {
  if (n_rois < 2 || timepoints < 2 || subjects_per_class < 1)
    throw std::invalid_argument("synth config: sizes too small");
  if (communities < 1) throw std::invalid_argument("synth config: need at least 1 community");
  const int stride = n_rois / communities;
  if (stride < 1 || community_size < 1 || community_size > stride)
    throw std::invalid_argument("synth config: community blocks do not fit the ring");
  // beta = 0 is the degenerate no-signal configuration (classes identical)
  if (alpha <= 0.0 || beta < 0.0 || sigma <= 0.0)
    throw std::invalid_argument("synth config: alpha and sigma must be positive, beta nonnegative");
  const int min_dist = n_rois / 4;
  std::vector<char> used(n_rois, 0);
  for (const auto& [i, j] : planted_pairs) {
    if (i < 0 || j < 0 || i >= n_rois || j >= n_rois)
      throw std::invalid_argument("synth config: planted pair out of range");
    if (i == j) throw std::invalid_argument("synth config: planted pair must join two nodes");
    if (used[i] || used[j])
      throw std::invalid_argument("synth config: planted pairs must use distinct nodes");
    used[i] = used[j] = 1;
    if (ring_distance(i, j) < min_dist)
      throw std::invalid_argument("synth config: planted pair below minimum ring distance");
  }
}

TimeSeriesTable generate_subject(const SynthConfig& cfg, int class_label, uint64_t subject_seed) {
  cfg.validate();
  if (class_label != 0 && class_label != 1)
    throw std::invalid_argument("generate_subject: label must be 0 or 1");
  const int t = cfg.timepoints, n = cfg.n_rois;
  std::mt19937_64 rng(subject_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Latents are drawn in a fixed order independent of the class, so the
  // class label only gates the beta term (beta = 0 makes the two classes
  // sample-identical, not just distribution-identical).
  Matrix community(cfg.communities, t);
  for (double& v : community.data) v = gauss(rng);
  Matrix pair_latent(static_cast<int>(cfg.planted_pairs.size()), t);
  for (double& v : pair_latent.data) v = gauss(rng);
  Matrix noise(n, t);
  for (double& v : noise.data) v = gauss(rng);

  std::vector<int> pair_of(n, -1);
  for (size_t p = 0; p < cfg.planted_pairs.size(); ++p) {
    pair_of[cfg.planted_pairs[p].first] = static_cast<int>(p);
    pair_of[cfg.planted_pairs[p].second] = static_cast<int>(p);
  }

  TimeSeriesTable ts;
  ts.values = Matrix(t, n);
  for (int i = 0; i < n; ++i) {
    const int c = cfg.community_of(i);
    const int p = pair_of[i];
    for (int k = 0; k < t; ++k) {
      double v = cfg.sigma * noise(i, k);
      if (c >= 0) v += cfg.alpha * community(c, k);
      if (class_label == 1 && p >= 0) v += cfg.beta * pair_latent(p, k);
      ts.values(k, i) = v;
    }
  }
  return ts;
}

LabeledDataset generate_dataset(const SynthConfig& cfg, double threshold) {
  cfg.validate();
  const int total = 2 * cfg.subjects_per_class;
  LabeledDataset ds;
  ds.name = cfg.name;
  ds.graphs.resize(total);
  ds.labels.resize(total);
#pragma omp parallel for schedule(dynamic) num_threads(threads::worker_count())
  for (int idx = 0; idx < total; ++idx) {
    const int label = idx < cfg.subjects_per_class ? 0 : 1;
    TimeSeriesTable ts = generate_subject(cfg, label, mix_seed(cfg.seed, uint64_t(idx)));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%04d", idx);
    ts.subject_id = buf;
    ds.graphs[idx] = build_graph(ts, threshold);
    ds.labels[idx] = label;
  }
  return ds;
}

void write_synth_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  io::ensure_dir(out_dir + "/ts");
  DatasetManifest manifest;
  manifest.name = cfg.name;
  manifest.num_rois = cfg.n_rois;
  const int total = 2 * cfg.subjects_per_class;
  std::vector<std::string> csv(total);
  std::vector<std::string> ids(total);
#pragma omp parallel for schedule(dynamic) num_threads(threads::worker_count())
  for (int idx = 0; idx < total; ++idx) {
    const int label = idx < cfg.subjects_per_class ? 0 : 1;
    TimeSeriesTable ts = generate_subject(cfg, label, mix_seed(cfg.seed, uint64_t(idx)));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%04d", idx);
    ids[idx] = buf;
    csv[idx] = io::csv_string(ts.values);
  }
  for (int idx = 0; idx < total; ++idx) {
    const int label = idx < cfg.subjects_per_class ? 0 : 1;
    const std::string rel = "ts/" + ids[idx] + ".csv";
    io::write_file(out_dir + "/" + rel, csv[idx]);
    manifest.subjects.push_back({ids[idx], rel, label});
  }
  write_dataset_manifest(out_dir, manifest);

  json pairs = json::array();
  for (const auto& [i, j] : cfg.planted_pairs) pairs.push_back({i, j});
  json j = {{"name", cfg.name},
            {"n_rois", cfg.n_rois},
            {"timepoints", cfg.timepoints},
            {"subjects_per_class", cfg.subjects_per_class},
            {"communities", cfg.communities},
            {"community_size", cfg.community_size},
            {"planted_pairs", pairs},
            {"alpha", cfg.alpha},
            {"beta", cfg.beta},
            {"sigma", cfg.sigma},
            {"seed", cfg.seed}};
  io::write_file(out_dir + "/synth_manifest.json", j.dump(2) + "\n");
}

}  // namespace alter
