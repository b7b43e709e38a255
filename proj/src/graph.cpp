#include "xmd/graph.hpp"

#include <algorithm>
#include <cmath>

#include "xmd/error.hpp"

namespace xmd {

namespace {

Graph& graph_of(Var v) {
  if (!v.valid()) throw UsageError("operation on an unbound variable");
  return *v.graph;
}

Graph& same_graph(Var a, Var b) {
  Graph& g = graph_of(a);
  if (&g != &graph_of(b)) throw UsageError("variables belong to different graphs");
  return g;
}

[[noreturn]] void shape_error(const Graph& g, const std::string& op, const std::string& detail) {
  throw ConfigError(op + " (node " + std::to_string(g.size()) + "): " + detail);
}

void require_matrix(const Graph& g, const std::string& op, const Tensor& t, const char* role) {
  if (t.rank() != 2) shape_error(g, op, std::string(role) + " must be rank 2, got " + shape_string(t.shape()));
}

void require_same_shape(const Graph& g, const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_error(g, op, "shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

// Row view that also accepts rank-1 tensors as a single row.
struct RowView {
  std::size_t rows;
  std::size_t cols;
};

RowView rows_of(const Tensor& t) { return {t.rows(), t.cols()}; }

std::vector<double> log_softmax_row(std::span<const double> z, double inv_temperature) {
  double mx = -INFINITY;
  for (double v : z) mx = std::max(mx, v * inv_temperature);
  double acc = 0.0;
  for (double v : z) acc += std::exp(v * inv_temperature - mx);
  const double lse = mx + std::log(acc);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * inv_temperature - lse;
  return out;
}

}  // namespace

const Tensor& Var::value() const { return graph_of(*this).value(*this); }

void Graph::check_var(Var v) const {
  if (v.graph != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw UsageError("variable does not belong to this graph");
  }
}

Var Graph::input(Tensor value, bool requires_grad, std::string name) {
  if (!value.all_finite()) throw NumericError("non-finite value fed into node " + std::to_string(nodes_.size()));
  Node n;
  n.op = std::move(name);
  n.value = std::move(value);
  n.value.clear_grad();
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::param(const std::string& name) {
  for (const auto& [bound, id] : bound_params_) {
    if (bound == name) return Var{this, id};
  }
  if (read_params_ == nullptr) throw ConfigError("graph has no parameter set; cannot bind " + name);
  const Parameter& p = read_params_->get(name);
  Var v = input(p.value, p.trainable && params_ != nullptr, "param");
  nodes_[v.id].param_name = name;
  bound_params_.emplace_back(name, v.id);
  return v;
}

const Tensor& Graph::value(Var v) const {
  check_var(v);
  return nodes_[v.id].value;
}

bool Graph::requires_grad(Var v) const {
  check_var(v);
  return nodes_[v.id].requires_grad;
}

std::span<const double> Graph::grad(Var v) const {
  check_var(v);
  const Node& n = nodes_[v.id];
  if (!n.requires_grad) throw UsageError("no gradient tracked for " + node_label(v.id));
  if (!backward_done_) throw UsageError("gradient requested before backward()");
  if (n.grad.empty()) {
    // Node did not lie on any path to the loss; its gradient is zero.
    auto& mutable_node = const_cast<Node&>(n);
    mutable_node.grad.assign(n.value.size(), 0.0);
  }
  return n.grad;
}

std::span<double> Graph::grad_buffer(int id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

std::string Graph::node_label(int id) const {
  const Node& n = nodes_.at(id);
  std::string s = n.op + "#" + std::to_string(id);
  if (!n.param_name.empty()) s += "(" + n.param_name + ")";
  return s;
}

Var Graph::record(std::string op, Tensor value, std::vector<int> parents, BackwardFn backward) {
  const int id = static_cast<int>(nodes_.size());
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced at node " + std::to_string(id) + " (" + op + ")");
  }
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  n.parents = std::move(parents);
  for (int p : n.parents) n.requires_grad = n.requires_grad || nodes_.at(p).requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, id};
}

void Graph::backward(Var loss) {
  if (nodes_.empty() || !loss.valid()) throw UsageError("backward() called before any forward computation");
  check_var(loss);
  if (backward_done_) throw UsageError("backward() already ran on this graph");
  if (nodes_[loss.id].value.size() != 1) {
    throw UsageError("backward() target must be a scalar, got " + shape_string(nodes_[loss.id].value.shape()));
  }
  backward_done_ = true;
  if (nodes_[loss.id].requires_grad) {
    grad_buffer(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      n.backward(*this, n.grad);
    }
  }
  if (params_ == nullptr) return;
  for (const auto& [name, id] : bound_params_) {
    Parameter& p = params_->get(name);
    if (!p.trainable) continue;
    auto dst = p.value.ensure_grad();
    const auto& src = nodes_[id].grad;
    if (src.empty()) continue;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  for (auto& [name, p] : *params_) {
    if (p.trainable) p.value.ensure_grad();
  }
}

// ---------------------------------------------------------------------------

Var matmul_t(Var x, Var w) {
  Graph& g = same_graph(x, w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require_matrix(g, "matmul", xv, "input");
  require_matrix(g, "matmul", wv, "weight");
  const std::size_t batch = xv.rows(), in = xv.cols(), out = wv.rows();
  if (wv.cols() != in) {
    shape_error(g, "matmul", "input " + shape_string(xv.shape()) + " incompatible with weight " + shape_string(wv.shape()));
  }
  Tensor y(Shape{batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xr = xv.data().data() + b * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = wv.data().data() + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      y[b * out + o] = acc;
    }
  }
  return g.record("matmul", std::move(y), {x.id, w.id}, [x, w, batch, in, out](Graph& g, std::span<const double> gy) {
    const auto& xd = g.value(x).data();
    const auto& wd = g.value(w).data();
    if (g.requires_grad(x)) {
      auto gx = g.grad_buffer(x.id);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) {
          const double go = gy[b * out + o];
          if (go == 0.0) continue;
          const double* wr = wd.data() + o * in;
          double* gxr = gx.data() + b * in;
          for (std::size_t i = 0; i < in; ++i) gxr[i] += go * wr[i];
        }
      }
    }
    if (g.requires_grad(w)) {
      auto gw = g.grad_buffer(w.id);
      for (std::size_t b = 0; b < batch; ++b) {
        const double* xr = xd.data() + b * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double go = gy[b * out + o];
          if (go == 0.0) continue;
          double* gwr = gw.data() + o * in;
          for (std::size_t i = 0; i < in; ++i) gwr[i] += go * xr[i];
        }
      }
    }
  });
}

Var add_row(Var x, Var bias) {
  Graph& g = same_graph(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require_matrix(g, "add_row", xv, "input");
  if (bv.size() != xv.cols()) {
    shape_error(g, "add_row", "bias " + shape_string(bv.shape()) + " does not match input " + shape_string(xv.shape()));
  }
  Tensor y = xv;
  y.clear_grad();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += bv[c];
  }
  return g.record("add_row", std::move(y), {x.id, bias.id}, [x, bias, rows, cols](Graph& g, std::span<const double> gy) {
    if (g.requires_grad(x)) {
      auto gx = g.grad_buffer(x.id);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
    if (g.requires_grad(bias)) {
      auto gb = g.grad_buffer(bias.id);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gb[c] += gy[r * cols + c];
      }
    }
  });
}

Var affine(Var x, Var w, Var bias) { return add_row(matmul_t(x, w), bias); }

Var relu(Var x) {
  Graph& g = graph_of(x);
  Tensor y(x.shape());
  const auto xd = x.value().data();
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const bool active = xd[i] > 0.0;
    g.note_kink(active);
    y[i] = active ? xd[i] : 0.0;
  }
  return g.record("relu", std::move(y), {x.id}, [x](Graph& g, std::span<const double> gy) {
    const auto xd = g.value(x).data();
    auto gx = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      if (xd[i] > 0.0) gx[i] += gy[i];
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape(g, "add", a.value(), b.value());
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  return g.record("add", std::move(y), {a.id, b.id}, [a, b](Graph& g, std::span<const double> gy) {
    for (Var v : {a, b}) {
      if (!g.requires_grad(v)) continue;
      auto gv = g.grad_buffer(v.id);
      for (std::size_t i = 0; i < gy.size(); ++i) gv[i] += gy[i];
    }
  });
}

Var sub(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape(g, "sub", a.value(), b.value());
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  return g.record("sub", std::move(y), {a.id, b.id}, [a, b](Graph& g, std::span<const double> gy) {
    if (g.requires_grad(a)) {
      auto ga = g.grad_buffer(a.id);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (g.requires_grad(b)) {
      auto gb = g.grad_buffer(b.id);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
    }
  });
}

Var scale(Var x, double factor) {
  Graph& g = graph_of(x);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.value()[i] * factor;
  return g.record("scale", std::move(y), {x.id}, [x, factor](Graph& g, std::span<const double> gy) {
    auto gx = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * factor;
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape(g, "mul", a.value(), b.value());
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  return g.record("mul", std::move(y), {a.id, b.id}, [a, b](Graph& g, std::span<const double> gy) {
    const auto ad = g.value(a).data();
    const auto bd = g.value(b).data();
    if (g.requires_grad(a)) {
      auto ga = g.grad_buffer(a.id);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bd[i];
    }
    if (g.requires_grad(b)) {
      auto gb = g.grad_buffer(b.id);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * ad[i];
    }
  });
}

Var row_norm(Var x) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  const auto [rows, cols] = rows_of(xv);
  Tensor y(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (double v : xv.row(r)) acc += v * v;
    y[r] = std::sqrt(acc);
  }
  Tensor norms = y;
  return g.record("row_norm", std::move(y), {x.id},
                  [x, norms = std::move(norms), rows, cols](Graph& g, std::span<const double> gy) {
                    const auto& xv = g.value(x);
                    auto gx = g.grad_buffer(x.id);
                    for (std::size_t r = 0; r < rows; ++r) {
                      if (norms[r] == 0.0) continue;
                      const double f = gy[r] / norms[r];
                      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += f * xv[r * cols + c];
                    }
                  });
}

Var l2_normalize_rows(Var x) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  const auto [rows, cols] = rows_of(xv);
  Tensor y(xv.shape());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (double v : xv.row(r)) acc += v * v;
    norms[r] = std::sqrt(acc);
    if (norms[r] == 0.0) {
      throw DataError("l2_normalize (node " + std::to_string(g.size()) + "): row " + std::to_string(r) +
                      " has zero norm (degenerate direction)");
    }
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = xv[r * cols + c] / norms[r];
  }
  Tensor yv = y;
  return g.record("l2_normalize", std::move(y), {x.id},
                  [x, yv = std::move(yv), norms = std::move(norms), rows, cols](Graph& g, std::span<const double> gy) {
                    auto gx = g.grad_buffer(x.id);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double dot = 0.0;
                      for (std::size_t c = 0; c < cols; ++c) dot += gy[r * cols + c] * yv[r * cols + c];
                      for (std::size_t c = 0; c < cols; ++c) {
                        gx[r * cols + c] += (gy[r * cols + c] - yv[r * cols + c] * dot) / norms[r];
                      }
                    }
                  });
}

Var cosine_rows(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape(g, "cosine", a.value(), b.value());
  const auto [rows, cols] = rows_of(a.value());
  Tensor y(Shape{rows});
  std::vector<double> na(rows), nb(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0, aa = 0.0, bb = 0.0;
    const auto ar = a.value().row(r);
    const auto br = b.value().row(r);
    for (std::size_t c = 0; c < cols; ++c) {
      dot += ar[c] * br[c];
      aa += ar[c] * ar[c];
      bb += br[c] * br[c];
    }
    na[r] = std::sqrt(aa);
    nb[r] = std::sqrt(bb);
    if (na[r] == 0.0 || nb[r] == 0.0) {
      throw DataError("cosine (node " + std::to_string(g.size()) + "): row " + std::to_string(r) +
                      " has a zero-norm vector (degenerate direction)");
    }
    // sqrt(aa * bb) makes identical rows score exactly 1.
    y[r] = dot / std::sqrt(aa * bb);
  }
  Tensor cos = y;
  return g.record("cosine", std::move(y), {a.id, b.id},
                  [a, b, cos = std::move(cos), na = std::move(na), nb = std::move(nb), rows, cols](
                      Graph& g, std::span<const double> gy) {
                    const auto& av = g.value(a);
                    const auto& bv = g.value(b);
                    const bool ga_on = g.requires_grad(a), gb_on = g.requires_grad(b);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const double inv = 1.0 / (na[r] * nb[r]);
                      if (ga_on) {
                        auto ga = g.grad_buffer(a.id);
                        const double self = cos[r] / (na[r] * na[r]);
                        for (std::size_t c = 0; c < cols; ++c) {
                          const std::size_t k = r * cols + c;
                          ga[k] += gy[r] * (bv[k] * inv - av[k] * self);
                        }
                      }
                      if (gb_on) {
                        auto gb = g.grad_buffer(b.id);
                        const double self = cos[r] / (nb[r] * nb[r]);
                        for (std::size_t c = 0; c < cols; ++c) {
                          const std::size_t k = r * cols + c;
                          gb[k] += gy[r] * (av[k] * inv - bv[k] * self);
                        }
                      }
                    }
                  });
}

Var sq_l2_mean_rows(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape(g, "sq_l2_mean", a.value(), b.value());
  const auto [rows, cols] = rows_of(a.value());
  Tensor y(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = a.value()[r * cols + c] - b.value()[r * cols + c];
      acc += d * d;
    }
    y[r] = acc / static_cast<double>(cols);
  }
  return g.record("sq_l2_mean", std::move(y), {a.id, b.id}, [a, b, rows, cols](Graph& g, std::span<const double> gy) {
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    const double inv = 2.0 / static_cast<double>(cols);
    const bool ga_on = g.requires_grad(a), gb_on = g.requires_grad(b);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t k = r * cols + c;
        const double d = gy[r] * inv * (av[k] - bv[k]);
        if (ga_on) g.grad_buffer(a.id)[k] += d;
        if (gb_on) g.grad_buffer(b.id)[k] -= d;
      }
    }
  });
}

Var softmax_ce_rows(Var logits, std::span<const int> labels) {
  Graph& g = graph_of(logits);
  const Tensor& lv = logits.value();
  require_matrix(g, "softmax_ce", lv, "logits");
  const std::size_t rows = lv.rows(), classes = lv.cols();
  if (labels.size() != rows) {
    shape_error(g, "softmax_ce", std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  }
  Tensor y(Shape{rows});
  std::vector<double> probs(lv.size());
  std::vector<int> lab(labels.begin(), labels.end());
  for (std::size_t r = 0; r < rows; ++r) {
    if (lab[r] < 0 || static_cast<std::size_t>(lab[r]) >= classes) {
      throw DataError("label " + std::to_string(lab[r]) + " out of range [0, " + std::to_string(classes) + ")");
    }
    const auto logp = log_softmax_row(lv.row(r), 1.0);
    y[r] = -logp[lab[r]];
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(logp[c]);
  }
  return g.record("softmax_ce", std::move(y), {logits.id},
                  [logits, probs = std::move(probs), lab = std::move(lab), rows, classes](Graph& g,
                                                                                        std::span<const double> gy) {
                    auto gl = g.grad_buffer(logits.id);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < classes; ++c) {
                        const double target = static_cast<std::size_t>(lab[r]) == c ? 1.0 : 0.0;
                        gl[r * classes + c] += gy[r] * (probs[r * classes + c] - target);
                      }
                    }
                  });
}

Var kl_softened_rows(Var student_logits, Var teacher_logits, double temperature) {
  Graph& g = same_graph(student_logits, teacher_logits);
  if (!(temperature > 0.0)) throw ConfigError("kd temperature must be > 0");
  const Tensor& sv = student_logits.value();
  const Tensor& tv = teacher_logits.value();
  require_matrix(g, "kl_softened", sv, "student logits");
  require_same_shape(g, "kl_softened", sv, tv);
  const std::size_t rows = sv.rows(), classes = sv.cols();
  const double inv_t = 1.0 / temperature;
  const double t2 = temperature * temperature;
  Tensor y(Shape{rows});
  std::vector<double> p_teacher(sv.size()), q_student(sv.size()), log_ratio(sv.size());
  std::vector<double> kl_raw(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto logp = log_softmax_row(tv.row(r), inv_t);
    const auto logq = log_softmax_row(sv.row(r), inv_t);
    double kl = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t k = r * classes + c;
      p_teacher[k] = std::exp(logp[c]);
      q_student[k] = std::exp(logq[c]);
      log_ratio[k] = logp[c] - logq[c];
      kl += p_teacher[k] * log_ratio[k];
    }
    kl_raw[r] = kl;
    y[r] = t2 * kl;
  }
  return g.record(
      "kl_softened", std::move(y), {student_logits.id, teacher_logits.id},
      [student_logits, teacher_logits, p_teacher = std::move(p_teacher), q_student = std::move(q_student),
       log_ratio = std::move(log_ratio), kl_raw = std::move(kl_raw), rows, classes,
       temperature](Graph& g, std::span<const double> gy) {
        if (g.requires_grad(student_logits)) {
          auto gs = g.grad_buffer(student_logits.id);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < classes; ++c) {
              const std::size_t k = r * classes + c;
              gs[k] += gy[r] * temperature * (q_student[k] - p_teacher[k]);
            }
          }
        }
        if (g.requires_grad(teacher_logits)) {
          auto gt = g.grad_buffer(teacher_logits.id);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < classes; ++c) {
              const std::size_t k = r * classes + c;
              gt[k] += gy[r] * temperature * p_teacher[k] * (log_ratio[k] - kl_raw[r]);
            }
          }
        }
      });
}

Var hinge(Var x, double margin) {
  Graph& g = graph_of(x);
  Tensor y(x.shape());
  const auto xd = x.value().data();
  std::vector<std::uint8_t> active(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const double z = xd[i] - margin;
    active[i] = z > 0.0;
    g.note_kink(active[i] != 0);
    y[i] = active[i] ? z : 0.0;
  }
  return g.record("hinge", std::move(y), {x.id}, [x, active = std::move(active)](Graph& g, std::span<const double> gy) {
    auto gx = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      if (active[i]) gx[i] += gy[i];
    }
  });
}

Var sum(Var x) {
  Graph& g = graph_of(x);
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return g.record("sum", Tensor::scalar(acc), {x.id}, [x](Graph& g, std::span<const double> gy) {
    auto gx = g.grad_buffer(x.id);
    for (double& v : gx) v += gy[0];
  });
}

Var mean(Var x) {
  Graph& g = graph_of(x);
  const std::size_t n = x.value().size();
  if (n == 0) shape_error(g, "mean", "empty input");
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  const double inv = 1.0 / static_cast<double>(n);
  return g.record("mean", Tensor::scalar(acc * inv), {x.id}, [x, inv](Graph& g, std::span<const double> gy) {
    auto gx = g.grad_buffer(x.id);
    for (double& v : gx) v += gy[0] * inv;
  });
}

Var weighted_mean(Var x, std::span<const double> weights) {
  Graph& g = graph_of(x);
  const std::size_t n = x.value().size();
  if (weights.size() != n) {
    shape_error(g, "weighted_mean", std::to_string(weights.size()) + " weights for " + std::to_string(n) + " values");
  }
  if (n == 0) shape_error(g, "weighted_mean", "empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += weights[i] * x.value()[i];
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<double> w(weights.begin(), weights.end());
  return g.record("weighted_mean", Tensor::scalar(acc * inv), {x.id},
                  [x, w = std::move(w), inv](Graph& g, std::span<const double> gy) {
                    auto gx = g.grad_buffer(x.id);
                    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[0] * w[i] * inv;
                  });
}

Var concat_rows(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != bv.rank() || av.rank() == 0 || av.rank() > 2 || (av.rank() == 2 && av.cols() != bv.cols())) {
    shape_error(g, "concat_rows", "cannot stack " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
  }
  Shape shape = av.shape();
  shape[0] += bv.shape()[0];
  std::vector<double> data(av.data().begin(), av.data().end());
  data.insert(data.end(), bv.data().begin(), bv.data().end());
  const std::size_t split = av.size();
  return g.record("concat_rows", Tensor(shape, std::move(data)), {a.id, b.id},
                  [a, b, split](Graph& g, std::span<const double> gy) {
                    if (g.requires_grad(a)) {
                      auto ga = g.grad_buffer(a.id);
                      for (std::size_t i = 0; i < split; ++i) ga[i] += gy[i];
                    }
                    if (g.requires_grad(b)) {
                      auto gb = g.grad_buffer(b.id);
                      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[split + i];
                    }
                  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  Graph& g = graph_of(x);
  const Tensor& xv = x.value();
  if (xv.rank() == 0 || xv.rank() > 2 || begin + count > xv.shape()[0]) {
    shape_error(g, "slice_rows", "rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                                     ") out of range for " + shape_string(xv.shape()));
  }
  const std::size_t width = xv.rank() == 2 ? xv.cols() : 1;
  Shape shape = xv.shape();
  shape[0] = count;
  std::vector<double> data(xv.data().begin() + begin * width, xv.data().begin() + (begin + count) * width);
  const std::size_t offset = begin * width;
  return g.record("slice_rows", Tensor(shape, std::move(data)), {x.id},
                  [x, offset](Graph& g, std::span<const double> gy) {
                    auto gx = g.grad_buffer(x.id);
                    for (std::size_t i = 0; i < gy.size(); ++i) gx[offset + i] += gy[i];
                  });
}

}  // namespace xmd
