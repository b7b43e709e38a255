#include "xmd/losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "xmd/error.hpp"

namespace xmd {

std::string to_string(DistillMode mode) {
  switch (mode) {
    case DistillMode::None: return "none";
    case DistillMode::Feature: return "feature";
    case DistillMode::Classifier: return "classifier";
    case DistillMode::KdKl: return "kd-kl";
    case DistillMode::FitnetL2: return "fitnet-l2";
  }
  return "none";
}

std::string to_string(DistanceMetric metric) { return metric == DistanceMetric::Cosine ? "cosine" : "sq-l2-mean"; }

DistillMode distill_mode_from_string(const std::string& name) {
  if (name == "none") return DistillMode::None;
  if (name == "feature") return DistillMode::Feature;
  if (name == "classifier") return DistillMode::Classifier;
  if (name == "kd-kl") return DistillMode::KdKl;
  if (name == "fitnet-l2") return DistillMode::FitnetL2;
  throw ConfigError("unknown distillation mode: " + name);
}

DistanceMetric distance_metric_from_string(const std::string& name) {
  if (name == "cosine") return DistanceMetric::Cosine;
  if (name == "sq-l2-mean") return DistanceMetric::SqL2Mean;
  throw ConfigError("unknown distance metric: " + name);
}

double cosine_margin_from_degrees(double degrees) { return 1.0 - std::cos(degrees * std::numbers::pi / 180.0); }

double DistillConfig::margin() const {
  return metric == DistanceMetric::Cosine ? cosine_margin_from_degrees(margin_deg) : margin_l2;
}

void DistillConfig::validate() const {
  if (metric == DistanceMetric::Cosine && !(margin_deg >= 0.0 && margin_deg <= 180.0)) {
    throw ConfigError("distill.margin_deg must lie in [0, 180]");
  }
  if (!(margin_l2 >= 0.0)) throw ConfigError("distill.margin_l2 must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("distill.alpha must lie in [0, 1]");
  if (!(beta >= 0.0)) throw ConfigError("distill.beta must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("distill.temperature must be > 0");
  if (!(lambda >= 0.0)) throw ConfigError("distill.lambda must be >= 0");
  quality.validate();
}

Var cross_entropy(Var logits, std::span<const int> labels) { return mean(softmax_ce_rows(logits, labels)); }

Var feature_distance(Var student, Var teacher, DistanceMetric metric) {
  if (metric == DistanceMetric::SqL2Mean) return sq_l2_mean_rows(student, teacher);
  const Var cos = cosine_rows(student, teacher);
  const Var ones = student.graph->constant(Tensor(cos.shape(), 1.0));
  return sub(ones, cos);
}

Var margin_feature_loss(Var student, Var teacher, DistanceMetric metric, double margin) {
  if (!(margin >= 0.0)) throw ConfigError("feature margin must be >= 0");
  return hinge(feature_distance(student, teacher, metric), margin);
}

Var classifier_level_loss_rows(Var student, Var teacher, std::span<const int> labels_student,
                               std::span<const int> labels_teacher, Var classifier_weight, double beta) {
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (labels_student.size() != labels_teacher.size()) throw DataError("student/teacher label counts differ");
  for (std::size_t i = 0; i < labels_student.size(); ++i) {
    if (labels_student[i] != labels_teacher[i]) {
      throw DataError("pair " + std::to_string(i) + " has mismatched labels " + std::to_string(labels_student[i]) +
                      " vs " + std::to_string(labels_teacher[i]));
    }
  }
  const std::size_t b = labels_student.size();
  if (student.value().rows() != b) throw ConfigError("classifier-level loss: label count does not match batch");

  std::vector<int> labels(labels_student.begin(), labels_student.end());
  labels.insert(labels.end(), labels_teacher.begin(), labels_teacher.end());
  const Var logits = matmul_t(concat_rows(student, teacher), classifier_weight);
  const Var ce = softmax_ce_rows(logits, labels);
  const Var ce_pair = scale(add(slice_rows(ce, 0, b), slice_rows(ce, b, b)), 0.5);
  if (beta == 0.0) return ce_pair;
  const Var gap = sq_l2_mean_rows(slice_rows(logits, 0, b), slice_rows(logits, b, b));
  return add(ce_pair, scale(gap, beta));
}

Var classifier_level_loss(Var student, Var teacher, std::span<const int> labels_student,
                          std::span<const int> labels_teacher, Var classifier_weight, double beta) {
  return mean(classifier_level_loss_rows(student, teacher, labels_student, labels_teacher, classifier_weight, beta));
}

Var kd_kl_baseline_rows(Var student_logits, Var teacher_logits, double temperature) {
  return kl_softened_rows(student_logits, teacher_logits, temperature);
}

Var kd_kl_baseline(Var student_logits, Var teacher_logits, double temperature) {
  return mean(kd_kl_baseline_rows(student_logits, teacher_logits, temperature));
}

Var fitnet_l2_baseline_rows(Var student, Var teacher) { return sq_l2_mean_rows(student, teacher); }

Var fitnet_l2_baseline(Var student, Var teacher) { return mean(fitnet_l2_baseline_rows(student, teacher)); }

Var total_loss(Var task, Var distill_rows, std::span<const double> weights, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("distillation scale lambda must be >= 0");
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::logic_error("negative distillation weight reached total_loss");
  }
  const std::size_t n = distill_rows.value().size();
  std::vector<double> ones;
  if (weights.empty()) {
    ones.assign(n, 1.0);
    weights = ones;
  }
  return add(task, scale(weighted_mean(distill_rows, weights), lambda));
}

}  // namespace xmd
