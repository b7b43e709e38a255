#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "xmd/error.hpp"
#include "xmd/gradcheck.hpp"
#include "xmd/losses.hpp"
#include "xmd/models.hpp"

using namespace xmd;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Tensor t({rows, cols});
  for (double& v : t.storage()) v = nd(eng);
  return t;
}

double ce_oracle(const std::vector<double>& logits, int label) { return -std::log(oracle::softmax(logits)[label]); }

}  // namespace

TEST_CASE("cross entropy") {
  Graph g;
  SUBCASE("uniform logits over 4 classes") {
    const std::vector<int> y{2};
    CHECK(cross_entropy(g.input(Tensor::matrix(1, 4, {0.3, 0.3, 0.3, 0.3})), y).value().item() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-15));
  }
  SUBCASE("logits [2,0], label 0") {
    const std::vector<int> y{0};
    const double v = cross_entropy(g.input(Tensor::matrix(1, 2, {2, 0})), y).value().item();
    CHECK(v == doctest::Approx(ce_oracle({2, 0}, 0)).epsilon(1e-14));
    CHECK(v == doctest::Approx(0.1269).epsilon(1e-3));
  }
  SUBCASE("confident correct logits") {
    const std::vector<int> y{1};
    CHECK(cross_entropy(g.input(Tensor::matrix(1, 2, {0, 800})), y).value().item() < 1e-300);
  }
  SUBCASE("label out of range") {
    const std::vector<int> y{2};
    CHECK_THROWS_AS(cross_entropy(g.input(Tensor::matrix(1, 2, {0, 1})), y), DataError);
  }
}

TEST_CASE("feature distance") {
  Graph g;
  const Var f = g.input(Tensor::matrix(2, 3, {1, -2, 0.5, 3, 0.1, 4}));
  SUBCASE("identical features") {
    for (double d : feature_distance(f, f, DistanceMetric::Cosine).value().storage()) CHECK(d == 0.0);
    for (double d : feature_distance(f, f, DistanceMetric::SqL2Mean).value().storage()) CHECK(d == 0.0);
  }
  SUBCASE("orthogonal unit vectors") {
    const Var a = g.input(Tensor::matrix(1, 2, {1, 0}));
    const Var b = g.input(Tensor::matrix(1, 2, {0, 1}));
    CHECK(feature_distance(a, b, DistanceMetric::Cosine).value()[0] == 1.0);
  }
  SUBCASE("sq-l2-mean hand case") {
    const Var a = g.input(Tensor::matrix(1, 2, {0, 0}));
    const Var b = g.input(Tensor::matrix(1, 2, {0.2, 0.2}));
    CHECK(feature_distance(a, b, DistanceMetric::SqL2Mean).value()[0] == doctest::Approx(0.04).epsilon(1e-15));
  }
  SUBCASE("zero norm under cosine") {
    const Var z = g.input(Tensor::matrix(1, 2, {0, 0}));
    const Var b = g.input(Tensor::matrix(1, 2, {0.2, 0.2}));
    CHECK_THROWS_AS(feature_distance(z, b, DistanceMetric::Cosine), DataError);
  }
}

TEST_CASE("margin feature loss") {
  SUBCASE("d = 0.13, m = 0.09") {
    Graph g;
    const Var a = g.input(Tensor::matrix(1, 1, {0.0}));
    const Var b = g.input(Tensor::matrix(1, 1, {std::sqrt(0.13)}));
    CHECK(margin_feature_loss(a, b, DistanceMetric::SqL2Mean, 0.09).value()[0] ==
          doctest::Approx(0.04).epsilon(1e-12));
  }
  SUBCASE("inside the margin: zero loss and exactly zero gradient") {
    ParamSet p;
    p.add("s", random_matrix(4, 3, 1));
    p.add("t", random_matrix(4, 3, 2));
    Graph g(p);
    const Var l = margin_feature_loss(g.param("s"), g.param("t"), DistanceMetric::Cosine, 2.0);
    for (double v : l.value().storage()) CHECK(v == 0.0);
    g.backward(mean(l));
    for (double v : p.get("s").value.grad()) CHECK(v == 0.0);
    for (double v : p.get("t").value.grad()) CHECK(v == 0.0);
  }
  SUBCASE("mixed batch: samples inside the margin contribute nothing") {
    ParamSet p;
    p.add("s", Tensor::matrix(2, 2, {1, 0, 1, 0}));
    p.add("t", Tensor::matrix(2, 2, {1, 0.01, 0, 1}));
    Graph g(p);
    g.backward(mean(margin_feature_loss(g.param("s"), g.param("t"), DistanceMetric::Cosine,
                                        cosine_margin_from_degrees(30))));
    const auto gs = p.get("s").value.grad();
    CHECK(gs[0] == 0.0);
    CHECK(gs[1] == 0.0);
    CHECK(gs[3] != 0.0);
  }
  SUBCASE("non-increasing in the margin") {
    Graph g;
    const Var a = g.input(random_matrix(20, 4, 3));
    const Var b = g.input(random_matrix(20, 4, 4));
    for (auto metric : {DistanceMetric::Cosine, DistanceMetric::SqL2Mean}) {
      Tensor prev = margin_feature_loss(a, b, metric, 0.0).value();
      for (double m = 0.05; m < 3.0; m += 0.05) {
        const Tensor cur = margin_feature_loss(a, b, metric, m).value();
        for (std::size_t i = 0; i < cur.size(); ++i) CHECK(cur[i] <= prev[i]);
        prev = cur;
      }
    }
  }
  SUBCASE("negative margin") {
    Graph g;
    const Var a = g.input(random_matrix(2, 2, 3));
    CHECK_THROWS_AS(margin_feature_loss(a, a, DistanceMetric::Cosine, -0.1), ConfigError);
  }
  SUBCASE("cosine margin encoding and shipped defaults") {
    const DistillConfig cfg;
    CHECK(cfg.margin_deg == 30.0);
    CHECK(cfg.margin() == doctest::Approx(1.0 - std::sqrt(3.0) / 2.0).epsilon(1e-15));
    CHECK(cfg.margin_l2 == doctest::Approx(0.04).epsilon(1e-15));
    CHECK(cfg.alpha == 0.6);
  }
}

TEST_CASE("classifier-level loss") {
  SUBCASE("beta = 0 reduces to CE over the 2b mixed batch") {
    Graph g;
    const Var s = g.input(random_matrix(3, 4, 1));
    const Var t = g.input(random_matrix(3, 4, 2));
    const Var w = g.input(random_matrix(5, 4, 3));
    const std::vector<int> y{0, 4, 2};
    const std::vector<int> yy{0, 4, 2, 0, 4, 2};
    const double mixed = cross_entropy(matmul_t(concat_rows(s, t), w), yy).value().item();
    CHECK(classifier_level_loss(s, t, y, y, w, 0.0).value().item() == doctest::Approx(mixed).epsilon(1e-14));
  }
  SUBCASE("b = 1, identical features, logits [2,0], beta = 1") {
    Graph g;
    const Var f = g.input(Tensor::matrix(1, 2, {2, 0}));
    const Var w = g.input(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    const std::vector<int> y{0};
    CHECK(classifier_level_loss(f, f, y, y, w, 1.0).value().item() ==
          doctest::Approx(ce_oracle({2, 0}, 0)).epsilon(1e-14));
  }
  SUBCASE("logit gap term") {
    Graph g;
    const Var s = g.input(Tensor::matrix(1, 2, {1, 0}));
    const Var t = g.input(Tensor::matrix(1, 2, {0, 1}));
    const Var w = g.input(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    const std::vector<int> y{1};
    const double expected = (ce_oracle({1, 0}, 1) + ce_oracle({0, 1}, 1)) / 2.0 + 0.5 * 1.0;
    CHECK(classifier_level_loss(s, t, y, y, w, 0.5).value().item() == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("label mismatch within a pair") {
    Graph g;
    const Var s = g.input(random_matrix(2, 2, 1));
    const Var w = g.input(random_matrix(2, 2, 3));
    const std::vector<int> ys{0, 1};
    const std::vector<int> yt{0, 0};
    CHECK_THROWS_AS(classifier_level_loss(s, s, ys, yt, w, 1.0), DataError);
  }
  SUBCASE("swapping the student and teacher blocks leaves the loss unchanged") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Graph g;
      const Var s = g.input(random_matrix(4, 3, seed));
      const Var t = g.input(random_matrix(4, 3, seed + 50));
      const Var w = g.input(random_matrix(6, 3, seed + 99));
      const std::vector<int> y{0, 5, 3, 3};
      CHECK(classifier_level_loss(s, t, y, y, w, 0.7).value().item() ==
            classifier_level_loss(t, s, y, y, w, 0.7).value().item());
    }
  }
}

TEST_CASE("KD baseline") {
  Graph g;
  SUBCASE("identical logits") {
    const Var z = g.input(random_matrix(3, 4, 1));
    for (double v : kd_kl_baseline_rows(z, z, 4.0).value().storage()) CHECK(v == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("very high temperature") {
    // Both softened distributions approach uniform, so their KL vanishes; the
    // T^2 factor keeps the scaled loss finite at half the logit-gap variance.
    const Tensor sv = random_matrix(1, 4, 1, 3.0);
    const Tensor tv = random_matrix(1, 4, 2, 3.0);
    const double t = 1e6;
    const double scaled = kd_kl_baseline(g.input(sv), g.input(tv), t).value().item();
    CHECK(scaled / (t * t) <= 1e-6);
    double mean_gap = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mean_gap += (tv[i] - sv[i]) / 4.0;
    double var = 0.0;
    for (std::size_t i = 0; i < 4; ++i) var += (tv[i] - sv[i] - mean_gap) * (tv[i] - sv[i] - mean_gap) / 4.0;
    CHECK(kd_kl_baseline(g.input(sv), g.input(tv), 1e3).value().item() == doctest::Approx(var / 2.0).epsilon(1e-2));
  }
  SUBCASE("hand case against closed-form KL") {
    const Var s = g.input(Tensor::matrix(1, 2, {0, 0}));
    const Var t = g.input(Tensor::matrix(1, 2, {std::log(2.0), 0}));
    const double expected = oracle::kl({2.0 / 3.0, 1.0 / 3.0}, {0.5, 0.5});
    CHECK(kd_kl_baseline(s, t, 1.0).value().item() == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("matches the oracle at T = 3 and is non-negative") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const Tensor s = random_matrix(1, 5, seed, 2.0);
      const Tensor t = random_matrix(1, 5, seed + 100, 2.0);
      const double v = kd_kl_baseline(g.input(s), g.input(t), 3.0).value().item();
      CHECK(v >= 0.0);
      CHECK(v == doctest::Approx(9.0 * oracle::kl(oracle::softmax(t.storage(), 3.0), oracle::softmax(s.storage(), 3.0)))
                     .epsilon(1e-12));
    }
  }
  SUBCASE("a per-sample constant shift gives zero") {
    Tensor s = random_matrix(2, 4, 7);
    Tensor t = s;
    for (std::size_t c = 0; c < 4; ++c) {
      t.at(0, c) += 3.0;
      t.at(1, c) -= 1.5;
    }
    CHECK(kd_kl_baseline(g.input(s), g.input(t), 2.0).value().item() == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("temperature must be positive") {
    const Var z = g.input(random_matrix(1, 2, 1));
    CHECK_THROWS_AS(kd_kl_baseline(z, z, 0.0), ConfigError);
  }
}

TEST_CASE("FitNet baseline") {
  Graph g;
  const Var a = g.input(random_matrix(5, 4, 1));
  const Var b = g.input(random_matrix(5, 4, 2));
  CHECK(fitnet_l2_baseline(a, a).value().item() == 0.0);
  CHECK(fitnet_l2_baseline(a, b).value().item() ==
        mean(margin_feature_loss(a, b, DistanceMetric::SqL2Mean, 0.0)).value().item());
}

TEST_CASE("total loss") {
  Graph g;
  const Var task = g.input(Tensor::scalar(0.5));
  const Var rows = g.input(Tensor::vector({0.1, 0.3, 0.2}));
  SUBCASE("unit weights") {
    CHECK(total_loss(task, rows, {}, 1.0).value().item() == doctest::Approx(0.7).epsilon(1e-15));
    const std::vector<double> ones{1, 1, 1};
    CHECK(total_loss(task, rows, ones, 1.0).value().item() == doctest::Approx(0.7).epsilon(1e-15));
  }
  SUBCASE("lambda = 0 is task only") { CHECK(total_loss(task, rows, {}, 0.0).value().item() == 0.5); }
  SUBCASE("weights shift the mean linearly") {
    const std::vector<double> w{4.0 / 3.0, 1.0, 2.0 / 3.0};
    const double expected = 0.5 + (4.0 / 3.0 * 0.1 + 0.3 + 2.0 / 3.0 * 0.2) / 3.0;
    CHECK(total_loss(task, rows, w, 1.0).value().item() == doctest::Approx(expected).epsilon(1e-15));
  }
  SUBCASE("negative weights are an internal error") {
    const std::vector<double> w{1.0, -0.1, 1.0};
    CHECK_THROWS_AS(total_loss(task, rows, w, 1.0), std::logic_error);
  }
}

TEST_CASE("every loss passes grad_check over 100 seeds") {
  const std::size_t b = 4, d = 5, c = 3;
  const std::vector<int> y{0, 2, 1, 2};
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ParamSet p;
    p.add("s", random_matrix(b, d, seed));
    p.add("t", random_matrix(b, d, seed + 1000));
    p.add("w", random_matrix(c, d, seed + 2000));
    const std::vector<double> weights{0.5, 1.25, 0.0, 2.0};
    const std::vector<LossBuilder> builders{
        [&](Graph& g) { return cross_entropy(matmul_t(g.param("s"), g.param("w")), y); },
        [&](Graph& g) {
          return mean(margin_feature_loss(g.param("s"), g.param("t"), DistanceMetric::Cosine,
                                          cosine_margin_from_degrees(30)));
        },
        [&](Graph& g) { return mean(margin_feature_loss(g.param("s"), g.param("t"), DistanceMetric::SqL2Mean, 0.3)); },
        [&](Graph& g) { return classifier_level_loss(g.param("s"), g.param("t"), y, y, g.param("w"), 1.0); },
        [&](Graph& g) { return kd_kl_baseline(g.param("s"), g.param("t"), 2.0); },
        [&](Graph& g) { return fitnet_l2_baseline(g.param("s"), g.param("t")); },
        [&](Graph& g) {
          const Var task = cross_entropy(matmul_t(g.param("s"), g.param("w")), y);
          const Var rows = margin_feature_loss(g.param("s"), g.param("t"), DistanceMetric::Cosine, 0.1);
          return total_loss(task, rows, weights, 0.8);
        },
    };
    for (const auto& build : builders) {
      const auto r = grad_check(build, p, seed);
      worst = std::max(worst, r.max_relative_error);
      checked += r.checked;
    }
  }
  CHECK(checked > 100 * 7 * 20);
  CHECK(worst <= 1e-4);
}

TEST_CASE("full distillation graph passes grad_check") {
  BundleConfig cfg;
  cfg.teacher = EncoderConfig{5, {6}, 4, true};
  cfg.student = EncoderConfig{4, {6}, 3, true};
  cfg.num_classes = 3;
  const std::vector<int> y{0, 1, 2, 1, 0};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ModelBundle bundle(cfg, init_teacher(cfg.teacher, 3, seed), seed);
    const Tensor xt = random_matrix(5, 5, seed + 10);
    const Tensor xs = random_matrix(5, 4, seed + 20);
    const auto r = grad_check(
        [&](Graph& g) {
          const Var ft = bundle.project(g, bundle.encode_teacher(g, g.constant(xt)));
          const Var fs = bundle.encode_student(g, g.constant(xs));
          const Var task = cross_entropy(bundle.classify(g, fs), y);
          return total_loss(task, margin_feature_loss(fs, ft, DistanceMetric::Cosine, 0.0), {}, 1.0);
        },
        bundle.params(), seed);
    CHECK(r.checked > 0);
    CHECK(r.max_relative_error <= 1e-4);
  }
}
