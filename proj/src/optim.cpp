#include "xmd/optim.hpp"

#include <cmath>

#include "xmd/error.hpp"

namespace xmd {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd-momentum";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd-momentum" || name == "sgd") return OptimizerKind::SgdMomentum;
  throw ConfigError("unknown optimizer: " + name);
}

Optimizer::Optimizer(OptimizerConfig config) {
  if (!(config.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (config.momentum < 0.0 || config.momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 || config.beta2 >= 1.0) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (config.weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
  state_.config = config;
}

void Optimizer::step(ParamSet& params) {
  for (auto& [name, p] : params) {
    if (p.trainable && !p.value.has_grad()) throw UsageError("optimizer step without gradient for " + name);
  }
  ++state_.step_count;
  const auto& cfg = state_.config;
  const double t = static_cast<double>(state_.step_count);
  for (auto& [name, p] : params) {
    if (!p.trainable) {
      p.value.clear_grad();
      continue;
    }
    auto theta = p.value.data();
    auto grad = p.value.grad();
    auto& m = state_.first_moment[name];
    if (m.empty()) m.assign(theta.size(), 0.0);
    if (m.size() != theta.size()) throw ConfigError("moment buffer shape mismatch for " + name);

    if (cfg.kind == OptimizerKind::SgdMomentum) {
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i] + cfg.weight_decay * theta[i];
        m[i] = cfg.momentum * m[i] + g;
        theta[i] -= cfg.learning_rate * m[i];
      }
    } else {
      auto& v = state_.second_moment[name];
      if (v.empty()) v.assign(theta.size(), 0.0);
      if (v.size() != theta.size()) throw ConfigError("moment buffer shape mismatch for " + name);
      const double bc1 = 1.0 - std::pow(cfg.beta1, t);
      const double bc2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i] + cfg.weight_decay * theta[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      }
    }
    p.value.clear_grad();
  }
}

}  // namespace xmd
