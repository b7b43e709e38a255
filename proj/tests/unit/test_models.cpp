#include <random>

#include "doctest.h"
#include "xmd/checkpoint.hpp"
#include "xmd/error.hpp"
#include "xmd/losses.hpp"
#include "xmd/models.hpp"
#include "xmd/optim.hpp"

using namespace xmd;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd;
  Tensor t({rows, cols});
  for (double& v : t.storage()) v = nd(eng);
  return t;
}

void zero_prefix(ParamSet& p, const std::string& prefix) {
  for (auto& [name, param] : p) {
    if (name.starts_with(prefix)) std::fill(param.value.storage().begin(), param.value.storage().end(), 0.0);
  }
}

BundleConfig small_config(std::size_t dim_t = 6, std::size_t dim_s = 6) {
  BundleConfig cfg;
  cfg.teacher = EncoderConfig{5, {7}, dim_t, true};
  cfg.student = EncoderConfig{4, {7}, dim_s, true};
  cfg.num_classes = 3;
  return cfg;
}

}  // namespace

TEST_CASE("teacher encoder") {
  const auto cfg = small_config();
  SUBCASE("zero weights give a zero embedding") {
    ParamSet t = init_teacher(cfg.teacher, 3, 1);
    zero_prefix(t, "teacher.");
    ModelBundle b(cfg, t, 2);
    const Tensor e = b.teacher_embeddings(random_matrix(4, 5, 3));
    for (double v : e.storage()) CHECK(v == 0.0);
  }
  SUBCASE("deterministic") {
    ModelBundle b(cfg, init_teacher(cfg.teacher, 3, 1), 2);
    const Tensor x = random_matrix(4, 5, 3);
    CHECK(b.teacher_embeddings(x) == b.teacher_embeddings(x));
  }
  SUBCASE("dimension mismatch") {
    ModelBundle b(cfg, init_teacher(cfg.teacher, 3, 1), 2);
    CHECK_THROWS_AS(b.teacher_embeddings(random_matrix(4, 6, 3)), ConfigError);
    CHECK_THROWS_AS(b.student_embeddings(random_matrix(4, 5, 3)), ConfigError);
  }
}

TEST_CASE("projection head") {
  SUBCASE("alpha = 1 returns E_T exactly") {
    auto cfg = small_config();
    cfg.alpha = 1.0;
    ModelBundle b(cfg, init_teacher(cfg.teacher, 3, 1), 2);
    const Tensor x = random_matrix(4, 5, 3);
    CHECK(b.projected_embeddings(x) == b.teacher_embeddings(x));
  }
  SUBCASE("alpha = 1 with resize returns resize(E_T)") {
    auto cfg = small_config(6, 4);
    cfg.alpha = 1.0;
    ModelBundle b(cfg, init_teacher(cfg.teacher, 3, 1), 2);
    REQUIRE(b.has_resize());
    const Tensor x = random_matrix(4, 5, 3);
    const Tensor e = b.teacher_embeddings(x);
    const Tensor& r = b.params().get("head.resize.weight").value;
    const Tensor f = b.projected_embeddings(x);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 6; ++k) acc += e.at(i, k) * r.at(j, k);
        CHECK(f.at(i, j) == doctest::Approx(acc).epsilon(1e-14));
      }
    }
  }
  SUBCASE("alpha = 0 returns the MLP output") {
    auto cfg = small_config();
    cfg.alpha = 0.0;
    ModelBundle b(cfg, init_teacher(cfg.teacher, 3, 1), 2);
    const Tensor x = random_matrix(4, 5, 3);
    Graph g(std::as_const(b.params()));
    const Tensor mlp = mlp_forward(g, g.constant(b.teacher_embeddings(x)), "head", 2).value();
    CHECK(b.projected_embeddings(x) == mlp);
  }
  SUBCASE("alpha 0.6 mixes [1,0] and [0,1] into [0.6,0.4]") {
    BundleConfig cfg;
    cfg.teacher = EncoderConfig{2, {}, 2, false};
    cfg.student = EncoderConfig{2, {}, 2, false};
    cfg.num_classes = 2;
    cfg.alpha = 0.6;
    ParamSet t = init_teacher(cfg.teacher, 2, 1);
    t.get("teacher.fc0.weight").value = Tensor::matrix(2, 2, {1, 0, 0, 1});
    t.get("teacher.fc0.bias").value = Tensor::vector({0, 0});
    ModelBundle b(cfg, t, 2);
    zero_prefix(b.params(), "head.");
    b.params().get("head.fc1.bias").value = Tensor::vector({0, 1});
    const Tensor f = b.projected_embeddings(Tensor::matrix(1, 2, {1, 0}));
    CHECK(f.at(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(f.at(0, 1) == doctest::Approx(0.4).epsilon(1e-15));
  }
  SUBCASE("alpha outside [0,1]") {
    auto cfg = small_config();
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(ModelBundle(cfg, init_teacher(cfg.teacher, 3, 1), 2), ConfigError);
    cfg.alpha = 0.5;
    ModelBundle b(cfg, init_teacher(cfg.teacher, 3, 1), 2);
    CHECK_THROWS_AS(b.set_alpha(-0.1), ConfigError);
  }
}

TEST_CASE("classifier") {
  BundleConfig cfg;
  cfg.teacher = EncoderConfig{3, {}, 3, false};
  cfg.student = EncoderConfig{3, {}, 3, false};
  cfg.num_classes = 3;
  ModelBundle b(cfg, init_teacher(cfg.teacher, 3, 1), 2);
  SUBCASE("identity weights pass one-hot features through") {
    b.params().get("classifier.weight").value = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const Tensor onehot = Tensor::matrix(2, 3, {0, 1, 0, 0, 0, 1});
    CHECK(b.logits(onehot) == onehot);
  }
  SUBCASE("zero weights give a uniform softmax") {
    zero_prefix(b.params(), "classifier.");
    Graph g(std::as_const(b.params()));
    const std::vector<int> y{0, 2};
    const Var ce = cross_entropy(b.classify(g, g.constant(random_matrix(2, 3, 5))), y);
    CHECK(ce.value().item() == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  }
  SUBCASE("2b mixed features with 2b labels") {
    Graph g(std::as_const(b.params()));
    const Var f = concat_rows(g.constant(random_matrix(2, 3, 1)), g.constant(random_matrix(2, 3, 2)));
    const std::vector<int> y{0, 1, 0, 1};
    CHECK(b.classify(g, f).value().rows() == 4);
    CHECK_NOTHROW(cross_entropy(b.classify(g, f), y));
  }
  SUBCASE("labels beyond the class count") {
    const std::vector<int> y{0, 3};
    CHECK_THROWS_AS(validate_labels(y, 3), ConfigError);
  }
}

TEST_CASE("gradient routing and the frozen teacher") {
  const auto cfg = small_config(6, 4);
  ModelBundle b(cfg, init_teacher(cfg.teacher, 3, 1), 2);
  const ParamSet before = b.params();
  Optimizer opt(OptimizerConfig{});
  const Tensor xt = random_matrix(6, 5, 3);
  const Tensor xs = random_matrix(6, 4, 4);
  const std::vector<int> y{0, 1, 2, 0, 1, 2};
  for (int step = 0; step < 5; ++step) {
    Graph g(b.params());
    const Var ft = b.project(g, b.encode_teacher(g, g.constant(xt)));
    const Var fs = b.encode_student(g, g.constant(xs));
    const Var d = margin_feature_loss(fs, ft, DistanceMetric::Cosine, 0.0);
    g.backward(total_loss(cross_entropy(b.classify(g, fs), y), d, {}, 1.0));
    for (const auto& [name, p] : b.params()) {
      if (name.starts_with("teacher.") || name.starts_with("head.resize.")) {
        CHECK_FALSE(p.value.has_grad());
      } else {
        CHECK(p.value.has_grad());
      }
    }
    double head_grad = 0.0;
    for (double v : b.params().get("head.fc1.weight").value.grad()) head_grad += std::abs(v);
    CHECK(head_grad > 0.0);
    opt.step(b.params());
  }
  for (const auto& [name, p] : before) {
    if (name.starts_with("teacher.") || name.starts_with("head.resize.")) {
      CHECK(b.params().get(name).value == p.value);
    }
  }
  CHECK_FALSE(b.params().get("student.fc0.weight").value == before.get("student.fc0.weight").value);
}

TEST_CASE("student encoder") {
  auto cfg = small_config();
  SUBCASE("zero weights") {
    ModelBundle b(cfg, init_teacher(cfg.teacher, 3, 1), 2);
    zero_prefix(b.params(), "student.");
    const Tensor e = b.student_embeddings(random_matrix(3, 4, 1));
    for (double v : e.storage()) CHECK(v == 0.0);
  }
  SUBCASE("deterministic per seed") {
    ModelBundle a(cfg, init_teacher(cfg.teacher, 3, 1), 7);
    ModelBundle c(cfg, init_teacher(cfg.teacher, 3, 1), 7);
    CHECK(a.params() == c.params());
    ModelBundle d(cfg, init_teacher(cfg.teacher, 3, 1), 8);
    CHECK_FALSE(a.params() == d.params());
  }
}

TEST_CASE("semi-orthogonal resize") {
  const Tensor r = semi_orthogonal(4, 6, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 6; ++k) dot += r.at(i, k) * r.at(j, k);
      CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("checkpoint round trip") {
  const auto cfg = small_config(6, 4);
  ModelBundle b(cfg, init_teacher(cfg.teacher, 3, 1), 2);
  const std::string bytes = encode_checkpoint(b.params());
  const ParamSet back = decode_checkpoint(bytes);
  ModelBundle r(cfg, back);
  CHECK(r.params() == b.params());
  for (const auto& [name, p] : b.params()) CHECK(r.params().get(name).trainable == p.trainable);
  const Tensor x = random_matrix(3, 4, 9);
  CHECK(r.student_embeddings(x) == b.student_embeddings(x));

  SUBCASE("bad magic") {
    std::string bad = bytes;
    bad[0] = 'Y';
    try {
      decode_checkpoint(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("truncation") {
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  }
}
