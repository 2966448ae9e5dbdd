#include "alter/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace alter {

void ModelConfig::validate() const {
  if (k_hops < 1) throw std::invalid_argument("model config: k_hops must be >= 1");
  if (k_prime < 0) throw std::invalid_argument("model config: k_prime must be >= 0");
  if (d_model < 1 || layers < 1 || heads < 1 || classes < 2 || clusters < 1)
    throw std::invalid_argument("model config: counts must be >= 1");
  if (d_model % heads != 0)
    throw std::invalid_argument("model config: d_model must be divisible by heads");
  if (readout != "mean" && readout != "max" && readout != "sum" && readout != "sort" &&
      readout != "clustering")
    throw std::invalid_argument("model config: unknown readout '" + readout + "'");
  if (sort_keep < 0) throw std::invalid_argument("model config: sort_keep must be >= 0");
}

int ModelConfig::resolved_sort_keep(int n) const {
  const int keep = sort_keep > 0 ? sort_keep : (n + 1) / 2;
  if (keep > n) throw std::invalid_argument("model config: sort_keep exceeds node count");
  return keep;
}

Parameter* AlterModel::make(const std::string& name, int rows, int cols) {
  store_.emplace_back(name, Matrix(rows, cols));
  return &store_.back();
}

static void xavier_fill(Matrix& m, std::mt19937_64& rng, int fan_in, int fan_out) {
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : m.data) v = dist(rng);
}

// Rows of a seeded Gaussian matrix, orthonormalized by Gram-Schmidt. Rows
// beyond the column dimension (or degenerate draws) fall back to unit norm.
static void orthonormal_rows(Matrix& m, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : m.data) v = dist(rng);
  for (int i = 0; i < m.rows; ++i) {
    for (int prev = 0; prev < i; ++prev) {
      double dot = 0.0;
      for (int j = 0; j < m.cols; ++j) dot += m(i, j) * m(prev, j);
      for (int j = 0; j < m.cols; ++j) m(i, j) -= dot * m(prev, j);
    }
    double norm = 0.0;
    for (int j = 0; j < m.cols; ++j) norm += m(i, j) * m(i, j);
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      for (int j = 0; j < m.cols; ++j) m(i, j) = 0.0;
      m(i, i % m.cols) = 1.0;
    } else {
      for (int j = 0; j < m.cols; ++j) m(i, j) /= norm;
    }
  }
}

AlterModel::AlterModel(ModelConfig config, int input_dim_, uint64_t seed)
    : cfg(std::move(config)), input_dim(input_dim_) {
  cfg.validate();
  if (input_dim < 1) throw std::invalid_argument("model: input_dim must be >= 1");
  std::mt19937_64 rng(seed);

  if (cfg.k_prime > 0) {
    inject_w = make("inject.w", cfg.k_prime, cfg.k_hops);
    inject_b = make("inject.b", 1, cfg.k_prime);
    xavier_fill(inject_w->value, rng, cfg.k_hops, cfg.k_prime);
  }
  const int token_dim = input_dim + cfg.k_prime;
  proj_w = make("proj.w", cfg.d_model, token_dim);
  proj_b = make("proj.b", 1, cfg.d_model);
  xavier_fill(proj_w->value, rng, token_dim, cfg.d_model);

  enc.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string prefix = "enc" + std::to_string(l) + ".";
    EncoderLayer& layer = enc[l];
    layer.wq = make(prefix + "wq", cfg.d_model, cfg.d_model);
    layer.wk = make(prefix + "wk", cfg.d_model, cfg.d_model);
    layer.wv = make(prefix + "wv", cfg.d_model, cfg.d_model);
    layer.wo = make(prefix + "wo", cfg.d_model, cfg.d_model);
    xavier_fill(layer.wq->value, rng, cfg.d_model, cfg.d_model);
    xavier_fill(layer.wk->value, rng, cfg.d_model, cfg.d_model);
    xavier_fill(layer.wv->value, rng, cfg.d_model, cfg.d_model);
    xavier_fill(layer.wo->value, rng, cfg.d_model, cfg.d_model);
    layer.ln1_g = make(prefix + "ln1.g", 1, cfg.d_model);
    layer.ln1_b = make(prefix + "ln1.b", 1, cfg.d_model);
    layer.ln2_g = make(prefix + "ln2.g", 1, cfg.d_model);
    layer.ln2_b = make(prefix + "ln2.b", 1, cfg.d_model);
    std::fill(layer.ln1_g->value.data.begin(), layer.ln1_g->value.data.end(), 1.0);
    std::fill(layer.ln2_g->value.data.begin(), layer.ln2_g->value.data.end(), 1.0);
    const int hidden = 2 * cfg.d_model;
    layer.ff1_w = make(prefix + "ff1.w", hidden, cfg.d_model);
    layer.ff1_b = make(prefix + "ff1.b", 1, hidden);
    layer.ff2_w = make(prefix + "ff2.w", cfg.d_model, hidden);
    layer.ff2_b = make(prefix + "ff2.b", 1, cfg.d_model);
    xavier_fill(layer.ff1_w->value, rng, cfg.d_model, hidden);
    xavier_fill(layer.ff2_w->value, rng, hidden, cfg.d_model);
  }

  if (cfg.readout == "clustering") {
    centers = make("readout.centers", cfg.clusters, cfg.d_model);
    orthonormal_rows(centers->value, rng);
  }

  // The head width depends on N only through sort_keep; sort therefore
  // requires an explicit sort_keep (or equal-N data, which the trainer
  // enforces) so the parameter shapes are fixed up front.
  const int pooled = readout_dim(-1);
  const int hidden = cfg.resolved_hidden();
  head1_w = make("head1.w", hidden, pooled);
  head1_b = make("head1.b", 1, hidden);
  head2_w = make("head2.w", cfg.classes, hidden);
  head2_b = make("head2.b", 1, cfg.classes);
  xavier_fill(head1_w->value, rng, pooled, hidden);
  xavier_fill(head2_w->value, rng, hidden, cfg.classes);
}

int AlterModel::readout_dim(int n) const {
  if (cfg.readout == "sort") {
    const int keep = n > 0 ? cfg.resolved_sort_keep(n)
                           : (cfg.sort_keep > 0 ? cfg.sort_keep : (input_dim + 1) / 2);
    return keep * cfg.d_model;
  }
  if (cfg.readout == "clustering") return cfg.clusters * cfg.d_model;
  return cfg.d_model;
}

std::vector<Parameter*> AlterModel::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : store_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> AlterModel::parameters() const {
  std::vector<const Parameter*> out;
  for (const Parameter& p : store_) out.push_back(&p);
  return out;
}

void AlterModel::zero_grads() {
  for (Parameter& p : store_) p.zero_grad();
}

Tape::Id inject_embedding(Tape& t, Tape::Id e, AlterModel& m) {
  if (m.cfg.k_prime <= 0) throw std::logic_error("inject_embedding: long-range branch disabled");
  if (t.value(e).cols != m.cfg.k_hops)
    throw std::invalid_argument("inject_embedding: embedding width != k_hops");
  return t.linear(e, *m.inject_w, *m.inject_b);
}

Tape::Id build_tokens(Tape& t, Tape::Id x, Tape::Id e_hat, AlterModel& m) {
  if (t.value(x).cols != m.input_dim)
    throw std::invalid_argument("build_tokens: feature width != input_dim");
  Tape::Id joined = x;
  if (m.cfg.k_prime > 0) {
    if (e_hat < 0) throw std::invalid_argument("build_tokens: missing injected embedding");
    if (t.value(e_hat).rows != t.value(x).rows)
      throw std::invalid_argument("build_tokens: row count mismatch");
    joined = t.concat_cols(x, e_hat);
  }
  return t.linear(joined, *m.proj_w, *m.proj_b);
}

static Tape::Id attention_block(Tape& t, Tape::Id input, const AlterModel::EncoderLayer& layer,
                                int heads, int d_model, std::vector<Matrix>* head_record) {
  const int d_head = d_model / heads;
  const double inv_sqrt = 1.0 / std::sqrt(double(d_head));
  Tape::Id q = t.matmul_nt(input, t.param(*layer.wq));
  Tape::Id k = t.matmul_nt(input, t.param(*layer.wk));
  Tape::Id v = t.matmul_nt(input, t.param(*layer.wv));
  Tape::Id merged = -1;
  for (int h = 0; h < heads; ++h) {
    Tape::Id qh = t.slice_cols(q, h * d_head, d_head);
    Tape::Id kh = t.slice_cols(k, h * d_head, d_head);
    Tape::Id vh = t.slice_cols(v, h * d_head, d_head);
    Tape::Id scores = t.scale(t.matmul_nt(qh, kh), inv_sqrt);
    Tape::Id attn = t.softmax_rows(scores);
    if (head_record) head_record->push_back(t.value(attn));
    Tape::Id zh = t.matmul(attn, vh);
    merged = h == 0 ? zh : t.concat_cols(merged, zh);
  }
  return t.matmul_nt(merged, t.param(*layer.wo));
}

Tape::Id encoder_forward(Tape& t, Tape::Id tokens, AlterModel& m, AttentionRecord* record) {
  if (record) record->layers.clear();
  Tape::Id h = tokens;
  for (int l = 0; l < m.cfg.layers; ++l) {
    const AlterModel::EncoderLayer& layer = m.enc[l];
    std::vector<Matrix>* heads_out = nullptr;
    if (record) {
      record->layers.emplace_back();
      heads_out = &record->layers.back();
    }
    if (m.cfg.bare_attention) {
      h = attention_block(t, h, layer, m.cfg.heads, m.cfg.d_model, heads_out);
      continue;
    }
    Tape::Id norm1 = t.layer_norm(h, t.param(*layer.ln1_g), t.param(*layer.ln1_b));
    Tape::Id attn = attention_block(t, norm1, layer, m.cfg.heads, m.cfg.d_model, heads_out);
    h = t.add(h, attn);
    Tape::Id norm2 = t.layer_norm(h, t.param(*layer.ln2_g), t.param(*layer.ln2_b));
    Tape::Id ff = t.linear(t.relu(t.linear(norm2, *layer.ff1_w, *layer.ff1_b)), *layer.ff2_w,
                           *layer.ff2_b);
    h = t.add(h, ff);
  }
  return h;
}

Tape::Id readout(Tape& t, Tape::Id z, AlterModel& m) {
  const Matrix& zv = t.value(z);
  if (zv.rows < 1) throw std::invalid_argument("readout: empty input");
  if (m.cfg.readout == "mean") return t.col_mean(z);
  if (m.cfg.readout == "max") return t.col_max(z);
  if (m.cfg.readout == "sum") return t.col_sum(z);
  if (m.cfg.readout == "sort") {
    const int keep = m.cfg.resolved_sort_keep(zv.rows);
    // descending by the last feature column; ties broken by node index
    std::vector<int> order(zv.rows);
    std::iota(order.begin(), order.end(), 0);
    const int key = zv.cols - 1;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return zv(a, key) > zv(b, key); });
    order.resize(keep);
    return t.flatten_row(t.gather_rows(z, std::move(order)));
  }
  // clustering: soft assignment against learnable centers, pooled features
  Tape::Id logits = t.matmul_nt(z, t.param(*m.centers));
  Tape::Id assign = t.softmax_rows(logits);
  Tape::Id pooled = t.matmul_tn(assign, z);  // clusters x d_model
  return t.flatten_row(pooled);
}

Tape::Id classify(Tape& t, Tape::Id h, AlterModel& m) {
  Tape::Id hidden = t.relu(t.linear(h, *m.head1_w, *m.head1_b));
  Tape::Id logits = t.linear(hidden, *m.head2_w, *m.head2_b);
  return t.softmax_rows(logits);
}

Tape::Id forward_on_tape(Tape& t, const BrainGraph& g, const LongRangeEmbedding* e,
                         AlterModel& m, AttentionRecord* record) {
  Tape::Id x = t.constant(g.x, "node_features");
  Tape::Id e_hat = -1;
  if (m.cfg.k_prime > 0) {
    if (!e) throw std::invalid_argument("forward: embedding required when k_prime > 0");
    if (e->e.rows != g.n) throw std::invalid_argument("forward: embedding row count mismatch");
    e_hat = inject_embedding(t, t.constant(e->e, "long_range_embedding"), m);
  }
  Tape::Id tokens = build_tokens(t, x, e_hat, m);
  Tape::Id z = encoder_forward(t, tokens, m, record);
  Tape::Id pooled = readout(t, z, m);
  return classify(t, pooled, m);
}

ForwardResult forward(const BrainGraph& g, const LongRangeEmbedding* e, AlterModel& m) {
  Tape t;
  ForwardResult out;
  Tape::Id probs = forward_on_tape(t, g, e, m, &out.attention);
  out.probs = t.value(probs);
  return out;
}

Matrix export_attention(const AttentionRecord& record) {
  if (record.empty() || record.layers.back().empty())
    throw std::invalid_argument("export_attention: empty record");
  const auto& heads = record.layers.back();
  Matrix out = heads[0];
  for (size_t h = 1; h < heads.size(); ++h)
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += heads[h].data[i];
  for (double& v : out.data) v /= double(heads.size());
  return out;
}

Matrix export_attention_head(const AttentionRecord& record, int layer, int head) {
  if (record.empty()) throw std::invalid_argument("export_attention_head: empty record");
  if (layer < 0 || layer >= static_cast<int>(record.layers.size()))
    throw std::invalid_argument("export_attention_head: layer out of range");
  const auto& heads = record.layers[layer];
  if (head < 0 || head >= static_cast<int>(heads.size()))
    throw std::invalid_argument("export_attention_head: head out of range");
  return heads[head];
}

}  // namespace alter
