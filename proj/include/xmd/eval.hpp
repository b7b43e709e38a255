#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xmd/json_util.hpp"
#include "xmd/tensor.hpp"

namespace xmd {

/// Verification scores; higher means more similar.
struct TrialSet {
  std::vector<double> target;
  std::vector<double> nontarget;
};

/// Operating point of a threshold sweep. A trial is accepted when score >= threshold.
struct SweepPoint {
  double threshold = 0.0;
  double far = 0.0;  // nontargets accepted
  double frr = 0.0;  // targets rejected
};

/// Candidate thresholds are the distinct sorted scores followed by +infinity
/// (reject everything), in ascending order.
std::vector<SweepPoint> threshold_sweep(const TrialSet& trials);

/// (FAR + FRR) / 2 at the threshold minimising |FAR - FRR|; ties go to the
/// lower threshold.
double compute_eer(const TrialSet& trials);

/// min over the sweep of c_miss * P_miss * p_tar + c_fa * P_fa * (1 - p_tar).
double compute_min_dcf(const TrialSet& trials, double p_tar = 0.01, double c_miss = 1.0, double c_fa = 1.0);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double classification_accuracy(const Tensor& logits, std::span<const int> labels);

/// Cosine similarity of two rows; 0 when either has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct TrialConfig {
  std::size_t max_target = 20000;
  std::size_t max_nontarget = 20000;
  std::uint64_t seed = 0;
};

/// All pairs i < j of rows, split into same-label (target) and different-label
/// (nontarget) pairs, each side capped by a seeded sample without
/// replacement, and scored by cosine similarity.
TrialSet build_trials(const Tensor& embeddings, std::span<const int> labels, const TrialConfig& cfg);

enum class MatchingProtocol { Original, Hard };

std::string to_string(MatchingProtocol protocol);

/// Forced-choice matching. Row i of `anchors` and row i of `candidates` are
/// the two modalities of sample i. Each trial draws an anchor, a same-label
/// candidate (a different sample when the class has one) and a distractor
/// from another label; for the hard protocol the distractor label shares the
/// anchor's nuisance group (`class_groups[label]`). A trial scores 1 when the
/// true candidate is strictly closer in cosine, 0.5 on a tie.
double cross_modal_matching(const Tensor& anchors, const Tensor& candidates, std::span<const int> labels,
                            std::span<const int> class_groups, MatchingProtocol protocol, std::size_t num_trials,
                            std::uint64_t seed);

struct MatchingScores {
  double student_to_teacher = 0.0;  // "A-F": student anchor, teacher candidates
  double teacher_to_student = 0.0;  // "F-A"

  friend bool operator==(const MatchingScores&, const MatchingScores&) = default;
};

MatchingScores matching_both_directions(const Tensor& student, const Tensor& teacher, std::span<const int> labels,
                                        std::span<const int> class_groups, MatchingProtocol protocol,
                                        std::size_t num_trials, std::uint64_t seed);

/// Results of one evaluation. Rates lie in [0, 1].
struct MetricsReport {
  std::string run_id;
  std::string mode;
  std::uint64_t seed = 0;
  double eer = 0.0;
  double min_dcf = 0.0;
  double accuracy = 0.0;
  // Closed-set accuracy and EER on the validation split.
  double val_accuracy = 0.0;
  double val_eer = 0.0;
  MatchingScores matching_original;
  MatchingScores matching_hard;
  // Open-set EER on inputs corrupted at each signal-to-noise level (dB).
  std::map<double, double> noisy_eer;
  std::vector<double> loss_trace;
  json config = json::object();

  /// Flat (metric, value) list used by the CSV summaries.
  std::vector<std::pair<std::string, double>> scalar_metrics() const;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

json to_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const json& j);
/// CSV header "run_id,mode,metric,value,seed" plus one row per scalar metric.
std::string metrics_csv(std::span<const MetricsReport> reports);

}  // namespace xmd
