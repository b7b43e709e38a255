#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xmd/tensor.hpp"

namespace xmd {

enum class OptimizerKind { SgdMomentum, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // sgd-momentum only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Coupled (L2) weight decay, added to the gradient before the update.
  double weight_decay = 0.0;
};

struct OptimizerState {
  OptimizerConfig config;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  std::uint64_t step_count = 0;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  /// Applies one update to every trainable parameter, then clears all grads.
  /// Frozen parameters are left untouched even if they carry a gradient.
  void step(ParamSet& params);

  void set_learning_rate(double lr) { state_.config.learning_rate = lr; }
  double learning_rate() const { return state_.config.learning_rate; }
  std::uint64_t step_count() const { return state_.step_count; }
  const OptimizerState& state() const { return state_; }

 private:
  OptimizerState state_;
};

}  // namespace xmd
