#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "alter/alga.hpp"
#include "alter/autodiff.hpp"
#include "alter/graph.hpp"

namespace alter {

struct ModelConfig {
  int k_hops = 16;    // K, walk steps encoded per node
  int k_prime = 32;   // injected embedding width; 0 disables the long-range branch
  int d_model = 128;  // encoder width, must be divisible by heads
  int layers = 2;
  int heads = 4;
  std::string readout = "clustering";  // mean | max | sum | sort | clustering
  int sort_keep = 0;                   // 0 -> ceil(N/2) at model build time
  int clusters = 10;
  int classes = 2;
  int mlp_hidden = 0;           // 0 -> d_model
  bool bare_attention = false;  // attention blocks only: no norms, FFN or residuals

  void validate() const;
  int resolved_sort_keep(int n) const;
  int resolved_hidden() const { return mlp_hidden > 0 ? mlp_hidden : d_model; }
};

/// All trainable state of the network. Parameters live in a deque so the
/// pointers handed out stay stable.
class AlterModel {
 public:
  AlterModel(ModelConfig cfg, int input_dim, uint64_t seed);

  ModelConfig cfg;
  int input_dim = 0;  // feature width d of the node-feature matrix

  Parameter* inject_w = nullptr;  // k' x K
  Parameter* inject_b = nullptr;  // 1 x k'
  Parameter* proj_w = nullptr;    // d_model x (d + k')
  Parameter* proj_b = nullptr;    // 1 x d_model

  struct EncoderLayer {
    Parameter* wq;
    Parameter* wk;
    Parameter* wv;
    Parameter* wo;
    Parameter* ln1_g;
    Parameter* ln1_b;
    Parameter* ln2_g;
    Parameter* ln2_b;
    Parameter* ff1_w;
    Parameter* ff1_b;
    Parameter* ff2_w;
    Parameter* ff2_b;
  };
  std::vector<EncoderLayer> enc;

  Parameter* centers = nullptr;  // clusters x d_model, clustering readout only
  Parameter* head1_w = nullptr;
  Parameter* head1_b = nullptr;
  Parameter* head2_w = nullptr;
  Parameter* head2_b = nullptr;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  void zero_grads();
  /// Width of the readout vector for an N-node graph.
  int readout_dim(int n) const;

 private:
  std::deque<Parameter> store_;
  Parameter* make(const std::string& name, int rows, int cols);
};

/// Post-softmax attention matrices, indexed [layer][head], each N x N.
struct AttentionRecord {
  std::vector<std::vector<Matrix>> layers;
  bool empty() const { return layers.empty(); }
};

struct ForwardResult {
  Matrix probs;  // 1 x classes
  AttentionRecord attention;
};

// Tape-level pieces (composable; each is independently testable).
Tape::Id inject_embedding(Tape& t, Tape::Id e, AlterModel& m);
// e_hat < 0 means the long-range branch is disabled (k' = 0).
Tape::Id build_tokens(Tape& t, Tape::Id x, Tape::Id e_hat, AlterModel& m);
Tape::Id encoder_forward(Tape& t, Tape::Id tokens, AlterModel& m,
                         AttentionRecord* record = nullptr);
Tape::Id readout(Tape& t, Tape::Id z, AlterModel& m);
Tape::Id classify(Tape& t, Tape::Id h, AlterModel& m);

/// Full pipeline on an existing tape; embedding may be null when k' = 0.
Tape::Id forward_on_tape(Tape& t, const BrainGraph& g, const LongRangeEmbedding* e,
                         AlterModel& m, AttentionRecord* record = nullptr);

ForwardResult forward(const BrainGraph& g, const LongRangeEmbedding* e, AlterModel& m);

/// Mean over the heads of the last layer (a convex combination of row-
/// stochastic matrices, so rows still sum to 1).
Matrix export_attention(const AttentionRecord& record);
Matrix export_attention_head(const AttentionRecord& record, int layer, int head);

}  // namespace alter
