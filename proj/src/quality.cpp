#include "xmd/quality.hpp"

#include <algorithm>
#include <cmath>

#include "xmd/error.hpp"

namespace xmd {

std::string to_string(QualitySource source) {
  switch (source) {
    case QualitySource::Teacher: return "teacher";
    case QualitySource::Student: return "student";
    case QualitySource::Min: return "min";
  }
  return "teacher";
}

QualitySource quality_source_from_string(const std::string& name) {
  if (name == "teacher") return QualitySource::Teacher;
  if (name == "student") return QualitySource::Student;
  if (name == "min") return QualitySource::Min;
  throw ConfigError("unknown quality source: " + name);
}

void QualityConfig::validate() const {
  if (!(h > 0.0)) throw ConfigError("quality.h must be > 0");
  if (!(w_base >= 0.0)) throw ConfigError("quality.w_base must be >= 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("quality.ema_decay must lie in (0, 1)");
}

std::vector<double> quantify_quality(const Tensor& features) {
  std::vector<double> q(features.rows());
  for (std::size_t r = 0; r < q.size(); ++r) {
    double acc = 0.0;
    for (double v : features.row(r)) acc += v * v;
    q[r] = std::sqrt(acc);
  }
  return q;
}

std::vector<double> min_quality(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("quality vectors differ in length");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::min(a[i], b[i]);
  return out;
}

RunningStats::RunningStats(double decay) : decay_(decay) {
  if (!(decay > 0.0 && decay < 1.0)) throw ConfigError("ema decay must lie in (0, 1)");
}

RunningStats RunningStats::from_values(double mu, double sigma, double decay) {
  RunningStats s(decay);
  s.mu_ = mu;
  s.sigma_ = std::max(sigma, kSigmaFloor);
  s.warmed_up_ = true;
  return s;
}

void RunningStats::update(std::span<const double> quality) {
  if (quality.empty()) throw UsageError("quality statistics need a non-empty batch");
  const double n = static_cast<double>(quality.size());
  double mean = 0.0;
  for (double q : quality) mean += q;
  mean /= n;
  double var = 0.0;
  for (double q : quality) var += (q - mean) * (q - mean);
  const double std = std::sqrt(var / n);
  if (std == 0.0) ++warnings_;

  if (!warmed_up_) {
    mu_ = mean;
    sigma_ = std;
    warmed_up_ = true;
  } else {
    mu_ = decay_ * mu_ + (1.0 - decay_) * mean;
    sigma_ = decay_ * sigma_ + (1.0 - decay_) * std;
  }
  sigma_ = std::max(sigma_, kSigmaFloor);
}

std::vector<double> adaptive_weights(std::span<const double> quality, const RunningStats& stats,
                                     const QualityConfig& cfg) {
  if (!stats.warmed_up()) throw UsageError("adaptive weights requested before quality statistics warmed up");
  cfg.validate();
  const double spread = stats.sigma() / cfg.h;
  std::vector<double> w(quality.size());
  for (std::size_t i = 0; i < quality.size(); ++i) {
    w[i] = std::max(0.0, cfg.w_base + (quality[i] - stats.mu()) / spread);
  }
  return w;
}

}  // namespace xmd
