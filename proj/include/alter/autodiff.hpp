#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "alter/matrix.hpp"

namespace alter {

/// A trainable tensor: value plus accumulated gradient of the same shape.
struct Parameter {
  Matrix value;
  Matrix grad;
  std::string name;

  Parameter() = default;
  Parameter(std::string n, Matrix v);
  void zero_grad();
};

/// Reverse-mode tape. Operations evaluate eagerly; each node keeps the
/// activations its backward closure needs. A tape belongs to a single
/// forward pass and a single thread. Any op producing a non-finite value
/// throws immediately.
class Tape {
 public:
  using Id = int;

  Id constant(Matrix m, const char* label = "constant");
  Id param(Parameter& p);

  Id matmul(Id a, Id b);     // a * b
  Id matmul_nt(Id a, Id b);  // a * b^T
  Id matmul_tn(Id a, Id b);  // a^T * b
  Id add(Id a, Id b);
  Id add_row(Id x, Id row);  // broadcast a 1 x c row over the rows of x
  Id scale(Id a, double s);
  Id relu(Id a);
  Id softmax_rows(Id a);
  Id layer_norm(Id x, Id gain, Id bias, double eps = 1e-5);
  Id concat_cols(Id a, Id b);
  Id slice_cols(Id a, int first, int count);
  Id gather_rows(Id a, std::vector<int> order);
  Id flatten_row(Id a);  // r x c -> 1 x (r*c), row-major
  Id col_mean(Id a);     // 1 x c column means
  Id col_max(Id a);      // 1 x c column maxima (first argmax wins)
  Id col_sum(Id a);
  Id sum_all(Id a);      // 1 x 1
  Id sum_squares(Id a);  // 1 x 1 Frobenius norm squared
  /// -log(max(p[label], 1e-12)) for a 1 x C probability row.
  Id cross_entropy(Id probs, int label);

  /// y = x * w^T + b (b broadcast over rows).
  Id linear(Id x, Parameter& w, Parameter& b);

  const Matrix& value(Id id) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Reverse pass from a 1x1 node. seed is the incoming gradient (training
  /// uses 1/batch for mean losses). With accumulate_params the leaf
  /// gradients are added into Parameter::grad before returning; otherwise
  /// call add_grads_to_params() later (callers serialize that step when
  /// tapes run in parallel).
  void backward(Id loss, double seed = 1.0, bool accumulate_params = true);
  void add_grads_to_params();

  /// Tape-local gradient of a parameter after backward; null if the
  /// parameter was not reached from the loss.
  const Matrix* param_grad(const Parameter& p) const;

 private:
  struct Node {
    const char* op;
    Matrix val;
    Matrix grad;
    bool has_grad = false;
    Parameter* leaf = nullptr;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
  bool ran_backward_ = false;

  Id push(const char* op, Matrix val);
  const Matrix& val(Id id) const { return nodes_[id].val; }
  void accum(Id id, const Matrix& delta);
  void accum_at(Id id, int r, int c, double delta);
  Matrix& grad_ref(Id id);
  void check_id(Id id, const char* op) const;

  friend struct TapeBackwardAccess;
};

struct GradCheckEntry {
  std::string param;
  int row = 0, col = 0;
  double analytic = 0.0, numeric = 0.0, rel_err = 0.0;
};

struct GradCheckReport {
  int checked = 0;
  int failed = 0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  GradCheckEntry worst;
  bool passed() const { return checked > 0 && failed == 0; }
};

/// Central-difference check of the gradients currently stored in the given
/// parameters against a loss re-evaluation closure. Samples up to max_coords
/// coordinates (seeded) across all parameters; rel err uses
/// |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport finite_diff_check(const std::function<double()>& loss,
                                  const std::vector<Parameter*>& params, double tolerance,
                                  int max_coords = 200, double step = 1e-5, uint64_t seed = 0);

}  // namespace alter
