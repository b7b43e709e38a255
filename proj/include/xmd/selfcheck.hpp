#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace xmd {

struct LossCheck {
  std::string loss;
  double worst_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// grad_check of every training loss (CE, both margin metrics, classifier
/// level, KD-KL, FitNet, quality-weighted composite and the full projected
/// distillation graph) over `num_seeds` seeded random configurations.
std::vector<LossCheck> gradcheck_suite(std::size_t num_seeds, std::uint64_t base_seed = 0);

}  // namespace xmd
