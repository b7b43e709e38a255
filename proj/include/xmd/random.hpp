#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace xmd {

/// Derives an independent stream seed from a base seed and a purpose tag, so
/// that adding a consumer of randomness never shifts another one's draws.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  /// Log-uniform on [lo, hi]; lo == hi returns lo.
  double log_uniform(double lo, double hi);
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace xmd
