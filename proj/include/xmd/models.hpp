#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xmd/graph.hpp"
#include "xmd/tensor.hpp"

namespace xmd {

struct EncoderConfig {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden{64};
  std::size_t output_dim = 32;
  // Rescale every input row to unit RMS before the first layer.
  bool normalize_input = true;

  void validate(const std::string& who) const;
  std::vector<std::size_t> layer_dims() const;
};

/// Adds `prefix.fc{i}.weight` (out x in) and `prefix.fc{i}.bias` for a dense
/// ReLU network, initialised uniformly in +-1/sqrt(fan_in).
void init_mlp(ParamSet& params, const std::string& prefix, std::span<const std::size_t> dims, std::uint64_t seed,
              bool trainable = true);
/// ReLU between layers, no activation on the output.
Var mlp_forward(Graph& g, Var x, const std::string& prefix, std::size_t num_layers);
Var encoder_forward(Graph& g, Var x, const std::string& prefix, const EncoderConfig& cfg);

/// Teacher encoder plus its own classifier (`teacher.classifier.weight`),
/// trainable, for pretraining.
ParamSet init_teacher(const EncoderConfig& cfg, std::size_t num_classes, std::uint64_t seed);

/// Throws ConfigError if any label cannot index a classifier with `num_classes` rows.
void validate_labels(std::span<const int> labels, std::size_t num_classes);

struct BundleConfig {
  EncoderConfig teacher;
  EncoderConfig student;
  std::size_t num_classes = 100;
  double alpha = 0.6;
};

/// Frozen teacher, trainable projection head, trainable student encoder and
/// bias-free shared classifier, all in one ParamSet:
///
///   teacher.*            frozen encoder + frozen pretraining classifier
///   head.fc{0,1}.*       projection MLP, dim_T -> dim_T -> dim_S
///   head.resize.weight   frozen semi-orthogonal skip map (only if dim_T != dim_S)
///   student.*            student encoder
///   classifier.weight    num_classes x dim_S
class ModelBundle {
 public:
  ModelBundle(BundleConfig cfg, const ParamSet& teacher, std::uint64_t seed);
  /// Wraps an existing parameter set (e.g. a reloaded checkpoint), restoring
  /// trainable flags from the naming scheme.
  ModelBundle(BundleConfig cfg, ParamSet params);

  Var encode_teacher(Graph& g, Var x_teacher) const;
  Var teacher_logits(Graph& g, Var e_teacher) const;
  /// F_T = alpha * skip(E_T) + (1 - alpha) * MLP(E_T).
  Var project(Graph& g, Var e_teacher) const;
  Var encode_student(Graph& g, Var x_student) const;
  Var classify(Graph& g, Var features) const;

  // Inference helpers (no gradient tracking).
  Tensor teacher_embeddings(const Tensor& x_teacher) const;
  Tensor projected_embeddings(const Tensor& x_teacher) const;
  Tensor student_embeddings(const Tensor& x_student) const;
  Tensor logits(const Tensor& features) const;

  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }
  const BundleConfig& config() const noexcept { return cfg_; }
  double alpha() const noexcept { return cfg_.alpha; }
  void set_alpha(double alpha);
  bool has_resize() const noexcept { return cfg_.teacher.output_dim != cfg_.student.output_dim; }

  static void restore_trainable_flags(ParamSet& params);

 private:
  void validate() const;

  BundleConfig cfg_;
  ParamSet params_;
};

/// Semi-orthogonal (rows x cols) matrix from a seeded Gaussian draw.
Tensor semi_orthogonal(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace xmd
