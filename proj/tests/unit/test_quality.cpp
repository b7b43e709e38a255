#include <random>

#include "doctest.h"
#include "xmd/error.hpp"
#include "xmd/quality.hpp"

using namespace xmd;

TEST_CASE("quantify_quality") {
  CHECK(quantify_quality(Tensor::matrix(1, 2, {3, 4})) == std::vector<double>{5.0});
  CHECK(quantify_quality(Tensor::matrix(1, 3, {0, 0, 0})) == std::vector<double>{0.0});
  const auto q = quantify_quality(Tensor::matrix(2, 2, {1, 2, -0.5, 7}));
  const auto q2 = quantify_quality(Tensor::matrix(2, 2, {2, 4, -1, 14}));
  for (std::size_t i = 0; i < 2; ++i) CHECK(q2[i] == doctest::Approx(2 * q[i]).epsilon(1e-15));
  const std::vector<double> a{1, 5}, b{3, 2};
  CHECK(min_quality(a, b) == std::vector<double>{1, 2});
}

TEST_CASE("running statistics") {
  SUBCASE("first batch initialises") {
    RunningStats s;
    CHECK_FALSE(s.warmed_up());
    const std::vector<double> q{1, 3};
    s.update(q);
    CHECK(s.warmed_up());
    CHECK(s.mu() == 2.0);
    CHECK(s.sigma() == 1.0);
  }
  SUBCASE("constant stream is a fixed point") {
    RunningStats s;
    const std::vector<double> q{5, 5, 5};
    for (int i = 0; i < 50; ++i) s.update(q);
    CHECK(s.mu() == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(s.sigma() == RunningStats::kSigmaFloor);
    CHECK(s.warnings() == 50);
  }
  SUBCASE("EMA rule") {
    RunningStats s = RunningStats::from_values(0.0, 1.0, 0.9);
    const std::vector<double> q{8, 12};
    s.update(q);
    CHECK(s.mu() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.sigma() == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0).epsilon(1e-15));
  }
  SUBCASE("zero spread after warmup keeps sigma positive and counts a warning") {
    RunningStats s = RunningStats::from_values(2.0, 1e-9, 0.9);
    const std::vector<double> q{2, 2};
    s.update(q);
    CHECK(s.sigma() == RunningStats::kSigmaFloor);
    CHECK(s.warnings() == 1);
  }
  SUBCASE("deterministic") {
    auto run = [] {
      RunningStats s;
      std::mt19937_64 eng(4);
      std::normal_distribution<double> nd(3.0, 0.5);
      for (int i = 0; i < 30; ++i) {
        std::vector<double> q(16);
        for (double& v : q) v = nd(eng);
        s.update(q);
      }
      return std::pair{s.mu(), s.sigma()};
    };
    CHECK(run() == run());
  }
  SUBCASE("empty batch") {
    RunningStats s;
    CHECK_THROWS_AS(s.update({}), UsageError);
  }
  SUBCASE("invalid decay") { CHECK_THROWS_AS(RunningStats(1.0), ConfigError); }
}

TEST_CASE("adaptive weights") {
  const QualityConfig cfg;
  const RunningStats s = RunningStats::from_values(10.0, 2.0);
  SUBCASE("worked cases") {
    const std::vector<double> q{10.0, 12.0, 2.0};
    const auto w = adaptive_weights(q, s, cfg);
    CHECK(w[0] == 1.0);
    CHECK(w[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(w[2] == 0.0);
  }
  SUBCASE("centering") {
    const std::vector<double> q(7, 10.0);
    for (double w : adaptive_weights(q, s, cfg)) CHECK(w == cfg.w_base);
  }
  SUBCASE("monotone and bounded within three sigma") {
    std::vector<double> q;
    for (double z = -3.0; z <= 3.0; z += 0.01) q.push_back(10.0 + z * 2.0);
    const auto w = adaptive_weights(q, s, cfg);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w[i] >= 0.0);
      CHECK(w[i] <= 2.0 + 1e-12);
      if (i > 0) CHECK(w[i] >= w[i - 1]);
    }
  }
  SUBCASE("before warmup") {
    const std::vector<double> q{1.0};
    CHECK_THROWS_AS(adaptive_weights(q, RunningStats{}, cfg), UsageError);
  }
  SUBCASE("invalid h") {
    QualityConfig bad;
    bad.h = 0.0;
    const std::vector<double> q{1.0};
    CHECK_THROWS_AS(adaptive_weights(q, s, bad), ConfigError);
  }
}

TEST_CASE("stationary stream keeps the mean weight at w_base") {
  const QualityConfig cfg;
  RunningStats s;
  std::mt19937_64 eng(11);
  std::normal_distribution<double> nd(5.0, 1.0);
  double total = 0.0;
  std::size_t count = 0;
  for (int batch = 0; batch < 500; ++batch) {
    std::vector<double> q(64);
    for (double& v : q) v = nd(eng);
    s.update(q);
    const auto w = adaptive_weights(q, s, cfg);
    if (batch >= 400) {
      for (double v : w) total += v;
      count += w.size();
    }
  }
  CHECK(std::abs(total / static_cast<double>(count) - cfg.w_base) <= 0.02 * cfg.w_base);
}
