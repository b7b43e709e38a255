#pragma once

#include <span>
#include <string>

#include "xmd/graph.hpp"
#include "xmd/quality.hpp"

namespace xmd {

enum class DistillMode { None, Feature, Classifier, KdKl, FitnetL2 };
enum class DistanceMetric { Cosine, SqL2Mean };

std::string to_string(DistillMode mode);
std::string to_string(DistanceMetric metric);
DistillMode distill_mode_from_string(const std::string& name);
DistanceMetric distance_metric_from_string(const std::string& name);

/// Hyperparameters of one distillation run.
struct DistillConfig {
  DistillMode mode = DistillMode::Feature;
  DistanceMetric metric = DistanceMetric::Cosine;
  // Cosine margins are configured as an angle: m = 1 - cos(margin_deg).
  double margin_deg = 30.0;
  // Margin used directly when metric is sq-l2-mean.
  double margin_l2 = 0.2 * 0.2;
  double alpha = 0.6;
  double beta = 0.0;
  double temperature = 4.0;
  double lambda = 1.0;
  // sq-l2-mean and fitnet compare unit-normalised embeddings when set.
  bool normalize_features = true;
  QualityConfig quality;

  /// Margin in distance units for the configured metric.
  double margin() const;
  void validate() const;
};

double cosine_margin_from_degrees(double degrees);

/// Mean over the batch of -log softmax(logits)[y].
Var cross_entropy(Var logits, std::span<const int> labels);

/// cosine: 1 - cos(F_S, F_T) in [0, 2]; sq-l2-mean: mean_d (F_S - F_T)^2.
Var feature_distance(Var student, Var teacher, DistanceMetric metric);

/// max(d_i - m, 0) per sample.
Var margin_feature_loss(Var student, Var teacher, DistanceMetric metric, double margin);

/// Per-pair classifier-level loss: the two samples of pair i go through the
/// shared classifier as rows i and b+i of a 2b batch, giving
///   l_i = (CE_i^S + CE_i^T) / 2 + beta * mean_c (L^S_ic - L^T_ic)^2,
/// so mean_i l_i equals CE over the 2b mixed batch plus beta times the mean
/// squared logit gap.
Var classifier_level_loss_rows(Var student, Var teacher, std::span<const int> labels_student,
                               std::span<const int> labels_teacher, Var classifier_weight, double beta);
Var classifier_level_loss(Var student, Var teacher, std::span<const int> labels_student,
                          std::span<const int> labels_teacher, Var classifier_weight, double beta);

/// T^2 KL(softmax(teacher/T) || softmax(student/T)) per sample, and its batch mean.
Var kd_kl_baseline_rows(Var student_logits, Var teacher_logits, double temperature);
Var kd_kl_baseline(Var student_logits, Var teacher_logits, double temperature);

/// Hard feature regression: per-sample sq-l2-mean distance, and its batch mean.
Var fitnet_l2_baseline_rows(Var student, Var teacher);
Var fitnet_l2_baseline(Var student, Var teacher);

/// L_task + lambda * mean_i(w_i * L_distill,i). Empty weights mean all ones.
Var total_loss(Var task, Var distill_rows, std::span<const double> weights, double lambda);

}  // namespace xmd
