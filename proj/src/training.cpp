#include "alter/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "alter/checkpoint.hpp"
#include "alter/io.hpp"
#include "alter/threads.hpp"

namespace alter {

void TrainConfig::validate() const {
  if (lr < 0.0 || weight_decay < 0.0 || lr_min < 0.0)
    throw std::invalid_argument("train config: rates must be nonnegative");
  if (batch_size < 1 || epochs < 1)
    throw std::invalid_argument("train config: batch_size and epochs must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || adam_eps <= 0.0)
    throw std::invalid_argument("train config: invalid Adam constants");
}

double cross_entropy(const Matrix& probs, int label) {
  if (probs.rows != 1) throw std::invalid_argument("cross_entropy: expects a 1 x C row");
  if (label < 0 || label >= probs.cols)
    throw std::invalid_argument("cross_entropy: invalid label");
  return -std::log(std::max(probs(0, label), 1e-12));
}

double cosine_lr(int step, int total_steps, double lr_max, double lr_min) {
  if (total_steps < 1) throw std::invalid_argument("cosine_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps)
    throw std::out_of_range("cosine_lr: step outside [0, total_steps]");
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * double(step) / double(total_steps)));
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: scores/labels length mismatch");
  long pos = 0, neg = 0;
  for (int y : labels) (y ? pos : neg)++;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: both classes required");

  // Average ranks (ties shared), then the Mann-Whitney U statistic.
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double shared = 0.5 * double(i + j) + 1.0;  // average of ranks i+1 .. j+1
    for (size_t k = i; k <= j; ++k) rank[order[k]] = shared;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  for (size_t k = 0; k < n; ++k)
    if (labels[k]) rank_sum_pos += rank[k];
  const double u = rank_sum_pos - 0.5 * double(pos) * double(pos + 1);
  return u / (double(pos) * double(neg));
}

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                        double threshold) {
  if (scores.empty() || scores.size() != labels.size())
    throw std::invalid_argument("compute_metrics: empty or mismatched inputs");
  Metrics m;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1)
      (pred ? m.tp : m.fn)++;
    else
      (pred ? m.fp : m.tn)++;
  }
  const long total = m.tp + m.fp + m.tn + m.fn;
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  m.acc = ratio(double(m.tp + m.tn), double(total));
  m.sen = ratio(double(m.tp), double(m.tp + m.fn));
  m.spe = ratio(double(m.tn), double(m.tn + m.fp));
  m.f1 = ratio(2.0 * double(m.tp), double(2 * m.tp + m.fp + m.fn));
  m.auc = roc_auc(scores, labels);
  return m;
}

void adam_step(Parameter& p, AdamState& state, long t, double lr_t, const TrainConfig& cfg) {
  if (t < 1) throw std::invalid_argument("adam_step: t counts from 1");
  if (!state.m.same_shape(p.value)) {
    state.m = Matrix(p.value.rows, p.value.cols);
    state.v = Matrix(p.value.rows, p.value.cols);
  }
  if (!p.grad.same_shape(p.value)) throw std::invalid_argument("adam_step: grad shape mismatch");
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
  for (size_t i = 0; i < p.value.data.size(); ++i) {
    double g = p.grad.data[i];
    if (cfg.coupled_decay) g += cfg.weight_decay * p.value.data[i];
    state.m.data[i] = cfg.beta1 * state.m.data[i] + (1.0 - cfg.beta1) * g;
    state.v.data[i] = cfg.beta2 * state.v.data[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m.data[i] / bc1;
    const double v_hat = state.v.data[i] / bc2;
    double update = lr_t * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    if (!cfg.coupled_decay) update += lr_t * cfg.weight_decay * p.value.data[i];
    p.value.data[i] -= update;
  }
}

std::vector<double> forward_scores(AlterModel& model, const LabeledDataset& ds,
                                   const std::vector<LongRangeEmbedding>& embs,
                                   const std::vector<int>& indices) {
  const bool use_emb = model.cfg.k_prime > 0;
  if (use_emb && embs.size() != ds.size())
    throw std::invalid_argument("forward_scores: one embedding per graph required");
  std::vector<double> scores(indices.size(), 0.0);
  std::string error;
#pragma omp parallel for schedule(dynamic) num_threads(threads::worker_count())
  for (int k = 0; k < static_cast<int>(indices.size()); ++k) {
    try {
      const int idx = indices[k];
      Tape t;
      Tape::Id probs = forward_on_tape(t, ds.graphs[idx], use_emb ? &embs[idx] : nullptr, model);
      scores[k] = t.value(probs)(0, 1);
    } catch (const std::exception& e) {
#pragma omp critical
      if (error.empty()) error = e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error("forward_scores: " + error);
  return scores;
}

Metrics evaluate(AlterModel& model, const LabeledDataset& ds,
                 const std::vector<LongRangeEmbedding>& embs, const std::vector<int>& indices,
                 double threshold) {
  if (indices.empty()) throw std::invalid_argument("evaluate: empty split");
  std::vector<double> scores = forward_scores(model, ds, embs, indices);
  std::vector<int> labels(indices.size());
  for (size_t k = 0; k < indices.size(); ++k) labels[k] = ds.labels[indices[k]];
  return compute_metrics(scores, labels, threshold);
}

namespace {

struct ParamSnapshot {
  std::vector<Matrix> values;
  static ParamSnapshot take(const std::vector<Parameter*>& params) {
    ParamSnapshot s;
    for (const Parameter* p : params) s.values.push_back(p->value);
    return s;
  }
  void restore(const std::vector<Parameter*>& params) const {
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
  }
};

}  // namespace

SplitIndices train_split(const LabeledDataset& ds, uint64_t seed) {
  return split_dataset(ds, SplitRatios{}, mix_seed(seed, 101));
}

RunRecord train_loop(const LabeledDataset& ds, const std::vector<LongRangeEmbedding>& embs,
                     const ModelConfig& mcfg, const TrainConfig& tcfg,
                     const std::string& out_dir) {
  mcfg.validate();
  tcfg.validate();
  ds.validate(false);
  if (ds.size() == 0) throw std::invalid_argument("train_loop: empty dataset");
  const int n = ds.graphs[0].n;
  for (const BrainGraph& g : ds.graphs)
    if (g.n != n) throw std::invalid_argument("train_loop: all graphs must share a node count");

  SplitIndices split = train_split(ds, tcfg.seed);
  {
    bool has0 = false, has1 = false;
    for (int i : split.train) (ds.labels[i] ? has1 : has0) = true;
    if (!has0 || !has1)
      throw std::invalid_argument("train_loop: training split must contain both classes");
  }
  if (tcfg.batch_size > static_cast<int>(split.train.size()))
    throw std::invalid_argument("train_loop: batch_size exceeds training-set size");

  AlterModel model(mcfg, n, mix_seed(tcfg.seed, 202));
  std::vector<Parameter*> params = model.parameters();
  std::vector<AdamState> adam(params.size());
  std::mt19937_64 shuffle_rng(mix_seed(tcfg.seed, 303));

  RunRecord record;
  record.seed = tcfg.seed;
  if (!out_dir.empty()) {
    io::ensure_dir(out_dir);
    std::vector<const Parameter*> cparams(params.begin(), params.end());
    record.init_checkpoint = out_dir + "/init.ckpt";
    save_checkpoint(record.init_checkpoint, cparams);
  }

  ParamSnapshot best = ParamSnapshot::take(params);
  const bool use_emb = mcfg.k_prime > 0;
  std::vector<int> order = split.train;
  long step = 0;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double lr_t = cosine_lr(epoch, tcfg.epochs, tcfg.lr, tcfg.lr_min);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;

    for (size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const int batch = static_cast<int>(std::min<size_t>(tcfg.batch_size, order.size() - start));
      model.zero_grads();
      std::vector<Tape> tapes(batch);
      std::vector<double> losses(batch, 0.0);
      std::string error;
      // Forward/backward per graph in parallel against the read-only
      // parameter snapshot; gradient accumulation happens below, serialized
      // in batch order for determinism.
#pragma omp parallel for schedule(dynamic) num_threads(threads::worker_count())
      for (int b = 0; b < batch; ++b) {
        try {
          const int idx = order[start + b];
          Tape& t = tapes[b];
          Tape::Id probs =
              forward_on_tape(t, ds.graphs[idx], use_emb ? &embs[idx] : nullptr, model);
          Tape::Id loss = t.cross_entropy(probs, ds.labels[idx]);
          losses[b] = t.value(loss)(0, 0);
          t.backward(loss, 1.0 / double(batch), /*accumulate_params=*/false);
        } catch (const std::exception& e) {
#pragma omp critical
          if (error.empty()) error = e.what();
        }
      }
      if (!error.empty())
        throw std::runtime_error("train_loop: epoch " + std::to_string(epoch) + ": " + error);
      for (int b = 0; b < batch; ++b) tapes[b].add_grads_to_params();
      for (double l : losses) {
        if (!std::isfinite(l))
          throw std::runtime_error("train_loop: training diverged (non-finite loss) at epoch " +
                                   std::to_string(epoch));
        epoch_loss += l;
      }
      ++step;
      for (size_t pi = 0; pi < params.size(); ++pi)
        adam_step(*params[pi], adam[pi], step, lr_t, tcfg);
    }

    record.train_loss.push_back(epoch_loss / double(order.size()));
    Metrics val = evaluate(model, ds, embs, split.val);
    record.val_metrics.push_back(val);
    if (record.best_epoch < 0 || val.auc > record.best_val_auc) {
      record.best_epoch = epoch;
      record.best_val_auc = val.auc;
      best = ParamSnapshot::take(params);
      if (!out_dir.empty()) {
        std::vector<const Parameter*> cparams(params.begin(), params.end());
        record.best_checkpoint = out_dir + "/best.ckpt";
        save_checkpoint(record.best_checkpoint, cparams);
      }
    }
  }

  if (!out_dir.empty()) {
    std::vector<const Parameter*> cparams(params.begin(), params.end());
    record.final_checkpoint = out_dir + "/final.ckpt";
    save_checkpoint(record.final_checkpoint, cparams);
  }

  best.restore(params);
  record.test = evaluate(model, ds, embs, split.test);
  return record;
}

static MetricSummary summarize(const std::vector<double>& xs) {
  MetricSummary s;
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std_dev = std::sqrt(ss / double(xs.size() - 1));
  }
  return s;
}

SeedSummary run_seeds(const LabeledDataset& ds, const std::vector<LongRangeEmbedding>& embs,
                      const ModelConfig& mcfg, const TrainConfig& tcfg,
                      std::vector<uint64_t> seeds, const std::string& out_dir) {
  if (seeds.empty()) throw std::invalid_argument("run_seeds: no seeds given");
  std::sort(seeds.begin(), seeds.end());
  SeedSummary summary;
  summary.seeds = seeds;
  std::vector<double> acc, auc, sen, spe, f1;
  for (uint64_t seed : seeds) {
    TrainConfig cfg = tcfg;
    cfg.seed = seed;
    std::string run_dir;
    if (!out_dir.empty()) run_dir = out_dir + "/seed" + std::to_string(seed);
    summary.runs.push_back(train_loop(ds, embs, mcfg, cfg, run_dir));
    const Metrics& m = summary.runs.back().test;
    acc.push_back(m.acc);
    auc.push_back(m.auc);
    sen.push_back(m.sen);
    spe.push_back(m.spe);
    f1.push_back(m.f1);
  }
  summary.acc = summarize(acc);
  summary.auc = summarize(auc);
  summary.sen = summarize(sen);
  summary.spe = summarize(spe);
  summary.f1 = summarize(f1);
  return summary;
}

}  // namespace alter
