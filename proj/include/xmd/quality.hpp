#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "xmd/tensor.hpp"

namespace xmd {

enum class QualitySource { Teacher, Student, Min };

std::string to_string(QualitySource source);
QualitySource quality_source_from_string(const std::string& name);

struct QualityConfig {
  bool enabled = false;
  double w_base = 1.0;
  double h = 1.0 / 3.0;
  double ema_decay = 0.9;
  QualitySource source = QualitySource::Teacher;

  void validate() const;
};

/// Per-sample l2 norm of raw (pre-normalisation) features.
std::vector<double> quantify_quality(const Tensor& features);

/// Elementwise minimum of two quality vectors (the `min` source).
std::vector<double> min_quality(std::span<const double> a, std::span<const double> b);

/// Exponential moving mean and standard deviation of batch quality.
///
/// The first batch initialises both statistics directly (warmup). Later
/// batches blend in with weight (1 - decay). sigma is floored at 1e-8; every
/// batch whose own spread is zero counts a warning.
class RunningStats {
 public:
  static constexpr double kSigmaFloor = 1e-8;

  explicit RunningStats(double decay = 0.9);

  void update(std::span<const double> quality);

  double mu() const noexcept { return mu_; }
  double sigma() const noexcept { return sigma_; }
  double decay() const noexcept { return decay_; }
  bool warmed_up() const noexcept { return warmed_up_; }
  std::size_t warnings() const noexcept { return warnings_; }

  /// Sets state directly, e.g. when restoring or probing weights.
  static RunningStats from_values(double mu, double sigma, double decay = 0.9);

 private:
  double decay_;
  double mu_ = 0.0;
  double sigma_ = 0.0;
  bool warmed_up_ = false;
  std::size_t warnings_ = 0;
};

/// w_i = max(0, w_base + (Q_i - mu) / (sigma / h)).
std::vector<double> adaptive_weights(std::span<const double> quality, const RunningStats& stats,
                                     const QualityConfig& cfg);

}  // namespace xmd
