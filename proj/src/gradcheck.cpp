#include "xmd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "xmd/error.hpp"

namespace xmd {

namespace {

struct Probe {
  double value;
  std::vector<std::uint8_t> signature;
};

Probe evaluate(const LossBuilder& build, ParamSet& params) {
  Graph g(params);
  const Var loss = build(g);
  if (loss.value().size() != 1) throw UsageError("grad_check requires a scalar loss");
  return {loss.value().item(), g.kink_signature()};
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& build, ParamSet& params, std::uint64_t seed, std::size_t max_checks,
                           double step) {
  params.clear_grads();
  std::vector<std::uint8_t> base_signature;
  {
    Graph g(params);
    const Var loss = build(g);
    base_signature = g.kink_signature();
    g.backward(loss);
  }

  struct Entry {
    std::string name;
    std::size_t index;
    double analytic;
  };
  std::vector<Entry> entries;
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    const auto grad = p.value.grad();
    for (std::size_t i = 0; i < grad.size(); ++i) entries.push_back({name, i, grad[i]});
  }
  params.clear_grads();

  if (max_checks > 0 && entries.size() > max_checks) {
    std::mt19937_64 rng(seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(max_checks);
  }

  GradCheckResult result;
  for (const auto& e : entries) {
    double& theta = params.get(e.name).value[e.index];
    const double original = theta;
    theta = original + step;
    const Probe plus = evaluate(build, params);
    theta = original - step;
    const Probe minus = evaluate(build, params);
    theta = original;

    const std::string label = e.name + "[" + std::to_string(e.index) + "]";
    if (plus.signature != base_signature || minus.signature != base_signature) {
      ++result.skipped;
      result.skipped_entries.push_back(label);
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * step);
    const double denom = std::max({std::abs(e.analytic), std::abs(numeric), 1e-8});
    const double rel = std::abs(e.analytic - numeric) / denom;
    ++result.checked;
    if (rel > result.max_relative_error || result.worst_entry.empty()) {
      result.max_relative_error = rel;
      result.worst_entry = label;
    }
  }
  return result;
}

}  // namespace xmd
