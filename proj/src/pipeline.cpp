#include "alter/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

#include "alter/checkpoint.hpp"
#include "alter/io.hpp"
#include "alter/threads.hpp"

namespace alter::pipeline {

using nlohmann::json;

SubjectEncoding encode_subject(const TimeSeriesTable& ts, const EncodeOptions& opt) {
  SubjectEncoding enc;
  enc.graph.n = ts.rois();
  enc.graph.x = pearson_matrix(ts);
  enc.graph.a = build_adjacency(enc.graph.x, opt.threshold);
  enc.graph.subject_id = ts.subject_id;
  enc.factors = adaptive_factors_from_corr(enc.graph.x, enc.graph.a);
  enc.kernel = rw_kernel(enc.factors, enc.graph.a, opt.renormalize);
  enc.embedding = long_range_embedding(enc.kernel, opt.hops);
  return enc;
}

EncodedDataset load_and_encode(const std::string& data_dir, const EncodeOptions& opt) {
  DatasetManifest manifest = read_dataset_manifest(data_dir);
  const int count = static_cast<int>(manifest.subjects.size());
  EncodedDataset out;
  out.ds.name = manifest.name;
  out.ds.graphs.resize(count);
  out.ds.labels.resize(count);
  out.embeddings.resize(count);
  std::string error;
#pragma omp parallel for schedule(dynamic) num_threads(threads::worker_count())
  for (int i = 0; i < count; ++i) {
    try {
      TimeSeriesTable ts = load_timeseries(data_dir, manifest.subjects[i]);
      if (ts.rois() != manifest.num_rois)
        throw std::runtime_error("subject " + manifest.subjects[i].id + ": ROI count mismatch");
      SubjectEncoding enc = encode_subject(ts, opt);
      out.ds.graphs[i] = std::move(enc.graph);
      out.embeddings[i] = std::move(enc.embedding);
      out.ds.labels[i] = manifest.subjects[i].label;
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error("load_and_encode: " + error);
  return out;
}

void write_encode_cache(const std::string& data_dir, const std::string& out_dir,
                        const EncodeOptions& opt) {
  DatasetManifest manifest = read_dataset_manifest(data_dir);
  const int count = static_cast<int>(manifest.subjects.size());
  for (const auto& s : manifest.subjects) io::ensure_dir(out_dir + "/" + s.id);
  std::string error;
#pragma omp parallel for schedule(dynamic) num_threads(threads::worker_count())
  for (int i = 0; i < count; ++i) {
    try {
      const SubjectEntry& entry = manifest.subjects[i];
      TimeSeriesTable ts = load_timeseries(data_dir, entry);
      SubjectEncoding enc = encode_subject(ts, opt);
      const std::string dir = out_dir + "/" + entry.id;
      io::write_csv(dir + "/X.csv", enc.graph.x);
      io::write_csv(dir + "/A.csv", enc.graph.a);
      io::write_csv(dir + "/F.csv", enc.factors.f);
      io::write_csv(dir + "/E.csv", enc.embedding.e);
      json m = {{"subject", entry.id},
                {"n", enc.graph.n},
                {"threshold", opt.threshold},
                {"hops", opt.hops},
                {"renormalize", opt.renormalize},
                {"source_hash", io::hash_hex(io::file_hash(data_dir + "/" + entry.timeseries))}};
      io::write_file(dir + "/manifest.json", m.dump(2) + "\n");
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error("write_encode_cache: " + error);
}

static void require_keys(const json& j, const std::string& ctx,
                         std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument(ctx + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw std::invalid_argument(ctx + ": unknown key '" + it.key() + "'");
  }
}

static ModelConfig model_config_from_json(const json& j) {
  require_keys(j, "model config",
               {"k_hops", "k_prime", "d_model", "layers", "heads", "readout", "sort_keep",
                "clusters", "classes", "mlp_hidden", "bare_attention"});
  ModelConfig m;
  m.k_hops = j.value("k_hops", m.k_hops);
  m.k_prime = j.value("k_prime", m.k_prime);
  m.d_model = j.value("d_model", m.d_model);
  m.layers = j.value("layers", m.layers);
  m.heads = j.value("heads", m.heads);
  m.readout = j.value("readout", m.readout);
  m.sort_keep = j.value("sort_keep", m.sort_keep);
  m.clusters = j.value("clusters", m.clusters);
  m.classes = j.value("classes", m.classes);
  m.mlp_hidden = j.value("mlp_hidden", m.mlp_hidden);
  m.bare_attention = j.value("bare_attention", m.bare_attention);
  m.validate();
  return m;
}

static json model_config_to_json(const ModelConfig& m) {
  return {{"k_hops", m.k_hops},       {"k_prime", m.k_prime},
          {"d_model", m.d_model},     {"layers", m.layers},
          {"heads", m.heads},         {"readout", m.readout},
          {"sort_keep", m.sort_keep}, {"clusters", m.clusters},
          {"classes", m.classes},     {"mlp_hidden", m.mlp_hidden},
          {"bare_attention", m.bare_attention}};
}

static TrainConfig train_config_from_json(const json& j) {
  require_keys(j, "train config",
               {"lr", "weight_decay", "batch_size", "epochs", "seed", "lr_min", "beta1", "beta2",
                "adam_eps", "coupled_decay"});
  TrainConfig t;
  t.lr = j.value("lr", t.lr);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.epochs = j.value("epochs", t.epochs);
  t.seed = j.value("seed", t.seed);
  t.lr_min = j.value("lr_min", t.lr_min);
  t.beta1 = j.value("beta1", t.beta1);
  t.beta2 = j.value("beta2", t.beta2);
  t.adam_eps = j.value("adam_eps", t.adam_eps);
  t.coupled_decay = j.value("coupled_decay", t.coupled_decay);
  t.validate();
  return t;
}

static json train_config_to_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"weight_decay", t.weight_decay},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"seed", t.seed},
          {"lr_min", t.lr_min},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"adam_eps", t.adam_eps},
          {"coupled_decay", t.coupled_decay}};
}

RunConfig run_config_from_json(const json& j) {
  require_keys(j, "run config", {"data", "threshold", "renormalize", "model", "train"});
  RunConfig cfg;
  cfg.data = j.value("data", std::string());
  if (cfg.data.empty()) throw std::invalid_argument("run config: 'data' directory is required");
  cfg.threshold = j.value("threshold", cfg.threshold);
  cfg.renormalize = j.value("renormalize", cfg.renormalize);
  if (j.contains("model")) cfg.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  return {{"data", cfg.data},
          {"threshold", cfg.threshold},
          {"renormalize", cfg.renormalize},
          {"model", model_config_to_json(cfg.model)},
          {"train", train_config_to_json(cfg.train)}};
}

SynthConfig synth_config_from_json(const json& j) {
  require_keys(j, "synth config",
               {"n_rois", "timepoints", "subjects_per_class", "communities", "community_size",
                "planted_pairs", "alpha", "beta", "sigma", "seed", "name"});
  SynthConfig c;
  c.n_rois = j.value("n_rois", c.n_rois);
  c.timepoints = j.value("timepoints", c.timepoints);
  c.subjects_per_class = j.value("subjects_per_class", c.subjects_per_class);
  c.communities = j.value("communities", c.communities);
  c.community_size = j.value("community_size", c.community_size);
  if (j.contains("planted_pairs")) {
    c.planted_pairs.clear();
    for (const auto& p : j.at("planted_pairs")) {
      if (!p.is_array() || p.size() != 2)
        throw std::invalid_argument("synth config: planted_pairs entries must be [i, j]");
      c.planted_pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
  }
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.sigma = j.value("sigma", c.sigma);
  c.seed = j.value("seed", c.seed);
  c.name = j.value("name", c.name);
  c.validate();
  return c;
}

json synth_config_to_json(const SynthConfig& c) {
  json pairs = json::array();
  for (const auto& [i, j] : c.planted_pairs) pairs.push_back({i, j});
  return {{"n_rois", c.n_rois},
          {"timepoints", c.timepoints},
          {"subjects_per_class", c.subjects_per_class},
          {"communities", c.communities},
          {"community_size", c.community_size},
          {"planted_pairs", pairs},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"sigma", c.sigma},
          {"seed", c.seed},
          {"name", c.name}};
}

void apply_override(json& config, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must look like key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json* node = &config;
  size_t pos = 0;
  std::string leaf;
  while (true) {
    size_t dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw std::invalid_argument("override has an empty path segment: " + path);
    if (!node->is_object() || !node->contains(key))
      throw std::invalid_argument("override references undeclared config key: " + path);
    if (dot == std::string::npos) {
      leaf = key;
      break;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }

  json value;
  try {
    value = json::parse(raw);
  } catch (...) {
    value = raw;  // unquoted strings (e.g. readout=mean)
  }
  (*node)[leaf] = value;
}

std::string config_hash(const json& j) {
  const std::string dump = j.dump();
  return io::hash_hex(fnv1a64(dump.data(), dump.size()));
}

json metrics_to_json(const Metrics& m) {
  return {{"acc", m.acc},
          {"auc", m.auc},
          {"sen", m.sen},
          {"spe", m.spe},
          {"f1", m.f1},
          {"confusion", {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}}}};
}

json run_record_to_json(const RunRecord& r) {
  json out = metrics_to_json(r.test);
  out["best_epoch"] = r.best_epoch;
  out["best_val_auc"] = r.best_val_auc;
  out["seed"] = r.seed;
  out["config_hash"] = r.config_hash;
  out["train_loss"] = r.train_loss;
  json va = json::array(), vauc = json::array(), vsen = json::array(), vspe = json::array(),
       vf1 = json::array();
  for (const Metrics& m : r.val_metrics) {
    va.push_back(m.acc);
    vauc.push_back(m.auc);
    vsen.push_back(m.sen);
    vspe.push_back(m.spe);
    vf1.push_back(m.f1);
  }
  out["val_acc"] = va;
  out["val_auc"] = vauc;
  out["val_sen"] = vsen;
  out["val_spe"] = vspe;
  out["val_f1"] = vf1;
  return out;
}

RunRecord run_training(const RunConfig& cfg, const std::string& out_dir) {
  io::ensure_dir(out_dir);
  const json effective = run_config_to_json(cfg);
  io::write_file(out_dir + "/config.json", effective.dump(2) + "\n");

  EncodeOptions opt{cfg.threshold, cfg.model.k_hops, cfg.renormalize};
  EncodedDataset encoded = load_and_encode(cfg.data, opt);
  encoded.ds.validate(true);

  RunRecord record = train_loop(encoded.ds, encoded.embeddings, cfg.model, cfg.train, out_dir);
  record.config_hash = config_hash(effective);
  io::write_file(out_dir + "/metrics.json", run_record_to_json(record).dump(2) + "\n");
  return record;
}

Metrics run_eval(const std::string& ckpt_path, const std::string& config_path,
                 const std::string& split) {
  RunConfig cfg = run_config_from_json(json::parse(io::read_file(config_path)));
  EncodeOptions opt{cfg.threshold, cfg.model.k_hops, cfg.renormalize};
  EncodedDataset encoded = load_and_encode(cfg.data, opt);

  SplitIndices indices = train_split(encoded.ds, cfg.train.seed);
  const std::vector<int>* chosen = nullptr;
  if (split == "train")
    chosen = &indices.train;
  else if (split == "val")
    chosen = &indices.val;
  else if (split == "test")
    chosen = &indices.test;
  else
    throw std::invalid_argument("run_eval: split must be train, val or test");

  AlterModel model(cfg.model, encoded.ds.graphs.at(0).n, 0);
  load_checkpoint(ckpt_path, model.parameters());
  return evaluate(model, encoded.ds, encoded.embeddings, *chosen);
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg, const std::vector<int>& hops_list,
                                int n_seeds, const std::string& out_dir) {
  if (hops_list.empty()) throw std::invalid_argument("run_sweep: empty hop list");
  if (n_seeds < 1) throw std::invalid_argument("run_sweep: need at least one seed");
  io::ensure_dir(out_dir);
  io::write_file(out_dir + "/config.json", run_config_to_json(cfg).dump(2) + "\n");

  std::vector<uint64_t> seeds(n_seeds);
  for (int i = 0; i < n_seeds; ++i) seeds[i] = cfg.train.seed + uint64_t(i);

  std::vector<SweepRow> rows;
  for (int hops : hops_list) {
    RunConfig row_cfg = cfg;
    row_cfg.model.k_hops = hops;
    EncodeOptions opt{row_cfg.threshold, hops, row_cfg.renormalize};
    EncodedDataset encoded = load_and_encode(row_cfg.data, opt);
    encoded.ds.validate(true);
    const std::string hop_dir = out_dir + "/K" + std::to_string(hops);
    SeedSummary summary =
        run_seeds(encoded.ds, encoded.embeddings, row_cfg.model, row_cfg.train, seeds, hop_dir);
    const json row_json = run_config_to_json(row_cfg);
    for (const RunRecord& run : summary.runs) {
      RunRecord stamped = run;
      stamped.config_hash = config_hash(row_json);
      io::write_file(hop_dir + "/seed" + std::to_string(run.seed) + "/metrics.json",
                     run_record_to_json(stamped).dump(2) + "\n");
    }
    rows.push_back({hops, std::move(summary)});
  }

  json summary_rows = json::array();
  for (const SweepRow& row : rows) {
    auto ms = [](const MetricSummary& s) { return json{{"mean", s.mean}, {"std", s.std_dev}}; };
    summary_rows.push_back({{"hops", row.hops},
                            {"seeds", row.summary.seeds},
                            {"acc", ms(row.summary.acc)},
                            {"auc", ms(row.summary.auc)},
                            {"sen", ms(row.summary.sen)},
                            {"spe", ms(row.summary.spe)},
                            {"f1", ms(row.summary.f1)}});
  }
  io::write_file(out_dir + "/summary.json", json{{"rows", summary_rows}}.dump(2) + "\n");
  return rows;
}

void run_attention_export(const std::string& ckpt_path, const std::string& config_path,
                          const std::string& subject_id, bool per_head,
                          const std::string& out_dir) {
  RunConfig cfg = run_config_from_json(json::parse(io::read_file(config_path)));
  DatasetManifest manifest = read_dataset_manifest(cfg.data);
  const SubjectEntry* entry = nullptr;
  for (const auto& s : manifest.subjects)
    if (s.id == subject_id) {
      entry = &s;
      break;
    }
  if (!entry) throw std::invalid_argument("attention export: unknown subject '" + subject_id + "'");

  TimeSeriesTable ts = load_timeseries(cfg.data, *entry);
  EncodeOptions opt{cfg.threshold, cfg.model.k_hops, cfg.renormalize};
  SubjectEncoding enc = encode_subject(ts, opt);

  AlterModel model(cfg.model, enc.graph.n, 0);
  load_checkpoint(ckpt_path, model.parameters());
  ForwardResult result =
      forward(enc.graph, cfg.model.k_prime > 0 ? &enc.embedding : nullptr, model);

  io::ensure_dir(out_dir);
  Matrix mean = export_attention(result.attention);
  io::write_csv(out_dir + "/attn_" + subject_id + ".csv", mean);
  io::write_pgm(out_dir + "/attn_" + subject_id + ".pgm", mean);
  if (per_head) {
    const int last = static_cast<int>(result.attention.layers.size()) - 1;
    const int heads = static_cast<int>(result.attention.layers[last].size());
    for (int h = 0; h < heads; ++h) {
      Matrix head = export_attention_head(result.attention, last, h);
      const std::string stem = out_dir + "/attn_" + subject_id + "_h" + std::to_string(h);
      io::write_csv(stem + ".csv", head);
      io::write_pgm(stem + ".pgm", head);
    }
  }
}

}  // namespace alter::pipeline
