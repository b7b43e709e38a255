#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xmd/tensor.hpp"

namespace xmd {

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; only valid while the
/// owning Graph is alive.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const noexcept { return graph != nullptr && id >= 0; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Define-by-run reverse-mode tape.
///
/// Every op evaluates eagerly and appends a node; node ids are therefore a
/// topological order and backward() is a single reverse sweep. Parameters are
/// bound by name from a ParamSet; frozen ones are recorded as constants so no
/// gradient can reach them.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::span<const double> grad_out)>;

  Graph() = default;
  /// Trainable parameters of `params` are tracked and receive gradients.
  explicit Graph(ParamSet& params) : params_(&params), read_params_(&params) {}
  /// Forward-only binding: every parameter is recorded as a constant.
  explicit Graph(const ParamSet& params) : read_params_(&params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor value, bool requires_grad = false, std::string name = "input");
  Var constant(Tensor value) { return input(std::move(value), false, "constant"); }
  /// Binds a parameter. Repeated calls with the same name return the same node.
  Var param(const std::string& name);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() target with respect to `v`.
  std::span<const double> grad(Var v) const;
  bool requires_grad(Var v) const;

  /// Reverse sweep from a scalar node. Accumulates parameter gradients into the
  /// bound ParamSet; every trainable parameter ends up with a grad buffer
  /// (zero if it did not participate). Frozen parameters are never touched.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::string& op_name(int id) const { return nodes_.at(id).op; }

  /// Activation pattern of every ReLU and hinge element evaluated so far.
  /// Two evaluations with equal signatures lie on the same smooth piece.
  const std::vector<std::uint8_t>& kink_signature() const noexcept { return kinks_; }

  // Op-implementation interface.
  Var record(std::string op, Tensor value, std::vector<int> parents, BackwardFn backward);
  std::span<double> grad_buffer(int id);
  void note_kink(bool active) { kinks_.push_back(active ? 1 : 0); }
  std::string node_label(int id) const;

 private:
  struct Node {
    std::string op;
    Tensor value;
    std::vector<double> grad;
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad = false;
    std::string param_name;
  };

  void check_var(Var v) const;

  ParamSet* params_ = nullptr;
  const ParamSet* read_params_ = nullptr;
  // deque keeps value() references valid while later ops append nodes.
  std::deque<Node> nodes_;
  std::vector<std::pair<std::string, int>> bound_params_;
  std::vector<std::uint8_t> kinks_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Primitive ops. Matrices are (batch x dim); "per-sample" results are rank 1.

/// x (B x in) times w^T, w (out x in) -> (B x out).
Var matmul_t(Var x, Var w);
/// Adds a length-D bias row to every row of x.
Var add_row(Var x, Var bias);
Var affine(Var x, Var w, Var bias);
Var relu(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double factor);
Var mul(Var a, Var b);

Var row_norm(Var x);
/// Rows scaled to unit l2 norm; a zero row is a DataError.
Var l2_normalize_rows(Var x);
/// Per-row cosine similarity; a zero row on either side is a DataError.
Var cosine_rows(Var a, Var b);
/// Per-row mean over columns of (a - b)^2.
Var sq_l2_mean_rows(Var a, Var b);
/// Per-row -log softmax(logits)[label], via max-shifted log-sum-exp.
Var softmax_ce_rows(Var logits, std::span<const int> labels);
/// Per-row T^2 * KL(softmax(teacher/T) || softmax(student/T)).
Var kl_softened_rows(Var student_logits, Var teacher_logits, double temperature);
/// Elementwise max(x - margin, 0); subgradient 0 at the kink.
Var hinge(Var x, double margin);

Var sum(Var x);
Var mean(Var x);
/// sum_i w_i x_i / n for a per-sample x and constant weights.
Var weighted_mean(Var x, std::span<const double> weights);
Var concat_rows(Var a, Var b);
Var slice_rows(Var x, std::size_t begin, std::size_t count);

}  // namespace xmd
