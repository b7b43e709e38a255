#include "xmd/models.hpp"

#include <cmath>
#include <utility>

#include "xmd/error.hpp"
#include "xmd/random.hpp"

namespace xmd {

void EncoderConfig::validate(const std::string& who) const {
  if (input_dim == 0 || output_dim == 0) throw ConfigError(who + ": encoder dims must be >= 1");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError(who + ": hidden widths must be >= 1");
  }
}

std::vector<std::size_t> EncoderConfig::layer_dims() const {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  return dims;
}

void init_mlp(ParamSet& params, const std::string& prefix, std::span<const std::size_t> dims, std::uint64_t seed,
              bool trainable) {
  if (dims.size() < 2) throw ConfigError(prefix + ": an MLP needs at least input and output dims");
  Rng rng(seed);
  for (std::size_t layer = 0; layer + 1 < dims.size(); ++layer) {
    const std::size_t in = dims[layer], out = dims[layer + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w(Shape{out, in});
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    Tensor b(Shape{out});
    for (double& v : b.data()) v = rng.uniform(-bound, bound);
    const std::string base = prefix + ".fc" + std::to_string(layer);
    params.add(base + ".weight", std::move(w), trainable);
    params.add(base + ".bias", std::move(b), trainable);
  }
}

Var mlp_forward(Graph& g, Var x, const std::string& prefix, std::size_t num_layers) {
  Var h = x;
  for (std::size_t layer = 0; layer < num_layers; ++layer) {
    const std::string base = prefix + ".fc" + std::to_string(layer);
    h = affine(h, g.param(base + ".weight"), g.param(base + ".bias"));
    if (layer + 1 < num_layers) h = relu(h);
  }
  return h;
}

Var encoder_forward(Graph& g, Var x, const std::string& prefix, const EncoderConfig& cfg) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != cfg.input_dim) {
    throw ConfigError(prefix + " encoder expects inputs of width " + std::to_string(cfg.input_dim) + ", got " +
                      shape_string(xv.shape()));
  }
  Var h = x;
  if (cfg.normalize_input) {
    h = scale(l2_normalize_rows(h), std::sqrt(static_cast<double>(cfg.input_dim)));
  }
  return mlp_forward(g, h, prefix, cfg.hidden.size() + 1);
}

ParamSet init_teacher(const EncoderConfig& cfg, std::size_t num_classes, std::uint64_t seed) {
  cfg.validate("teacher");
  if (num_classes == 0) throw ConfigError("teacher: num_classes must be >= 1");
  ParamSet params;
  const auto dims = cfg.layer_dims();
  init_mlp(params, "teacher", dims, derive_seed(seed, "teacher.encoder"));
  Rng rng(derive_seed(seed, "teacher.classifier"));
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.output_dim));
  Tensor w(Shape{num_classes, cfg.output_dim});
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  params.add("teacher.classifier.weight", std::move(w));
  return params;
}

void validate_labels(std::span<const int> labels, std::size_t num_classes) {
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw ConfigError("label " + std::to_string(y) + " does not fit a classifier with " +
                        std::to_string(num_classes) + " classes");
    }
  }
}

Tensor semi_orthogonal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  // Orthonormalise along the shorter side with modified Gram-Schmidt.
  const bool by_rows = rows <= cols;
  const std::size_t count = by_rows ? rows : cols;
  const std::size_t length = by_rows ? cols : rows;
  Rng rng(seed);
  std::vector<std::vector<double>> basis(count, std::vector<double>(length));
  for (auto& vec : basis) {
    for (double& v : vec) v = rng.normal();
  }
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < length; ++k) dot += basis[i][k] * basis[j][k];
      for (std::size_t k = 0; k < length; ++k) basis[i][k] -= dot * basis[j][k];
    }
    double norm = 0.0;
    for (double v : basis[i]) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : basis[i]) v /= norm;
  }
  Tensor out(Shape{rows, cols});
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < length; ++k) {
      if (by_rows) {
        out.at(i, k) = basis[i][k];
      } else {
        out.at(k, i) = basis[i][k];
      }
    }
  }
  return out;
}

ModelBundle::ModelBundle(BundleConfig cfg, const ParamSet& teacher, std::uint64_t seed) : cfg_(std::move(cfg)) {
  validate();
  const std::size_t dim_t = cfg_.teacher.output_dim;
  const std::size_t dim_s = cfg_.student.output_dim;

  const auto teacher_dims = cfg_.teacher.layer_dims();
  for (std::size_t layer = 0; layer + 1 < teacher_dims.size(); ++layer) {
    const std::string name = "teacher.fc" + std::to_string(layer) + ".weight";
    if (!teacher.contains(name) ||
        teacher.get(name).value.shape() != Shape{teacher_dims[layer + 1], teacher_dims[layer]}) {
      throw ConfigError("teacher parameters do not match the configured teacher encoder (" + name + ")");
    }
  }
  for (const auto& [name, p] : teacher) {
    if (!name.starts_with("teacher.")) throw ConfigError("unexpected parameter in teacher set: " + name);
  }
  params_.merge(teacher, false);

  const std::vector<std::size_t> head_dims{dim_t, dim_t, dim_s};
  init_mlp(params_, "head", head_dims, derive_seed(seed, "head"));
  if (has_resize()) {
    params_.add("head.resize.weight", semi_orthogonal(dim_s, dim_t, derive_seed(seed, "head.resize")), false);
  }
  init_mlp(params_, "student", cfg_.student.layer_dims(), derive_seed(seed, "student"));

  Rng rng(derive_seed(seed, "classifier"));
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim_s));
  Tensor w(Shape{cfg_.num_classes, dim_s});
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  params_.add("classifier.weight", std::move(w));
}

ModelBundle::ModelBundle(BundleConfig cfg, ParamSet params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  validate();
  restore_trainable_flags(params_);
  for (const char* name : {"head.fc0.weight", "head.fc1.weight", "student.fc0.weight", "classifier.weight"}) {
    if (!params_.contains(name)) throw ConfigError(std::string("model parameters lack ") + name);
  }
  if (params_.get("classifier.weight").value.shape() != Shape{cfg_.num_classes, cfg_.student.output_dim}) {
    throw ConfigError("classifier shape does not match configured classes/embedding dim");
  }
}

void ModelBundle::restore_trainable_flags(ParamSet& params) {
  for (auto& [name, p] : params) {
    p.trainable = !(name.starts_with("teacher.") || name.starts_with("head.resize."));
  }
}

void ModelBundle::validate() const {
  cfg_.teacher.validate("teacher");
  cfg_.student.validate("student");
  if (cfg_.num_classes == 0) throw ConfigError("num_classes must be >= 1");
  if (!(cfg_.alpha >= 0.0 && cfg_.alpha <= 1.0)) {
    throw ConfigError("projection mix ratio alpha must lie in [0, 1], got " + std::to_string(cfg_.alpha));
  }
}

void ModelBundle::set_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("projection mix ratio alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  cfg_.alpha = alpha;
}

Var ModelBundle::encode_teacher(Graph& g, Var x_teacher) const {
  return encoder_forward(g, x_teacher, "teacher", cfg_.teacher);
}

Var ModelBundle::teacher_logits(Graph& g, Var e_teacher) const {
  return matmul_t(e_teacher, g.param("teacher.classifier.weight"));
}

Var ModelBundle::project(Graph& g, Var e_teacher) const {
  const Var mlp = mlp_forward(g, e_teacher, "head", 2);
  const Var skip = has_resize() ? matmul_t(e_teacher, g.param("head.resize.weight")) : e_teacher;
  return add(scale(skip, cfg_.alpha), scale(mlp, 1.0 - cfg_.alpha));
}

Var ModelBundle::encode_student(Graph& g, Var x_student) const {
  return encoder_forward(g, x_student, "student", cfg_.student);
}

Var ModelBundle::classify(Graph& g, Var features) const { return matmul_t(features, g.param("classifier.weight")); }

Tensor ModelBundle::teacher_embeddings(const Tensor& x_teacher) const {
  Graph g(std::as_const(params_));
  return encode_teacher(g, g.constant(x_teacher)).value();
}

Tensor ModelBundle::projected_embeddings(const Tensor& x_teacher) const {
  Graph g(std::as_const(params_));
  return project(g, encode_teacher(g, g.constant(x_teacher))).value();
}

Tensor ModelBundle::student_embeddings(const Tensor& x_student) const {
  Graph g(std::as_const(params_));
  return encode_student(g, g.constant(x_student)).value();
}

Tensor ModelBundle::logits(const Tensor& features) const {
  Graph g(std::as_const(params_));
  return classify(g, g.constant(features)).value();
}

}  // namespace xmd
