#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xmd/graph.hpp"

namespace xmd {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Scalars whose +-h probes changed a ReLU/hinge activation pattern.
  std::size_t skipped = 0;
  std::vector<std::string> skipped_entries;
  std::string worst_entry;
};

using LossBuilder = std::function<Var(Graph&)>;

/// Compares reverse-mode gradients of `build`'s scalar output against central
/// differences (f(t+h) - f(t-h)) / 2h over every trainable scalar in `params`
/// (or a seeded random subset of `max_checks` of them when nonzero).
///
/// Relative error is |a - n| / max(|a|, |n|, 1e-8). A probe whose activation
/// signature differs from the unperturbed one straddles a kink and is skipped.
/// Parameters are restored bit-exactly and left without gradients.
GradCheckResult grad_check(const LossBuilder& build, ParamSet& params, std::uint64_t seed = 0,
                           std::size_t max_checks = 0, double step = 1e-5);

}  // namespace xmd
