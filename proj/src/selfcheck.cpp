#include "xmd/selfcheck.hpp"

#include <algorithm>
#include <functional>

#include "xmd/gradcheck.hpp"
#include "xmd/losses.hpp"
#include "xmd/models.hpp"
#include "xmd/quality.hpp"
#include "xmd/random.hpp"

namespace xmd {

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(Shape{rows, cols});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

}  // namespace

std::vector<LossCheck> gradcheck_suite(std::size_t num_seeds, std::uint64_t base_seed) {
  const std::size_t b = 4, d = 5, c = 3;
  const std::vector<int> y{0, 2, 1, 2};
  const std::vector<int> y_bundle{0, 1, 2, 1, 0};
  std::vector<LossCheck> out{{"cross_entropy"},  {"margin_cosine"}, {"margin_sq_l2_mean"}, {"classifier_level"},
                             {"kd_kl"},          {"fitnet_l2"},     {"quality_weighted_total"},
                             {"projected_total"}};
  auto record = [&](std::size_t i, const GradCheckResult& r) {
    out[i].worst_relative_error = std::max(out[i].worst_relative_error, r.max_relative_error);
    out[i].checked += r.checked;
    out[i].skipped += r.skipped;
  };

  BundleConfig bcfg;
  bcfg.teacher = EncoderConfig{5, {6}, 4, true};
  bcfg.student = EncoderConfig{4, {6}, 3, true};
  bcfg.num_classes = 3;

  for (std::size_t k = 0; k < num_seeds; ++k) {
    const std::uint64_t seed = derive_seed(base_seed, "gradcheck-suite", k);
    ParamSet p;
    p.add("s", random_matrix(b, d, derive_seed(seed, "s")));
    p.add("t", random_matrix(b, d, derive_seed(seed, "t")));
    p.add("w", random_matrix(c, d, derive_seed(seed, "w")));
    // Weights come from the real quality path: random qualities against
    // stats that put some samples below the zero clamp.
    const Tensor q = random_matrix(1, b, derive_seed(seed, "q"));
    QualityConfig qc;
    qc.enabled = true;
    const std::vector<double> weights = adaptive_weights(q.data(), RunningStats::from_values(0.2, 0.5), qc);

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
    for (std::size_t i = 0; i < builders.size(); ++i) record(i, grad_check(builders[i], p, seed));

    ModelBundle bundle(bcfg, init_teacher(bcfg.teacher, 3, seed), seed);
    const Tensor xt = random_matrix(5, 5, derive_seed(seed, "xt"));
    const Tensor xs = random_matrix(5, 4, derive_seed(seed, "xs"));
    record(builders.size(), grad_check(
                                [&](Graph& g) {
                                  const Var ft = bundle.project(g, bundle.encode_teacher(g, g.constant(xt)));
                                  const Var fs = bundle.encode_student(g, g.constant(xs));
                                  const Var task = cross_entropy(bundle.classify(g, fs), y_bundle);
                                  return total_loss(task, margin_feature_loss(fs, ft, DistanceMetric::Cosine, 0.05),
                                                    {}, 1.0);
                                },
                                bundle.params(), seed));
  }
  return out;
}

}  // namespace xmd
