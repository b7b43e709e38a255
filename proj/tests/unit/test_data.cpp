#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "xmd/binary_io.hpp"
#include "xmd/data.hpp"
#include "xmd/error.hpp"

using namespace xmd;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_classes = 6;
  s.samples_per_class = 5;
  s.shared_dim = 3;
  s.specific_dim = 2;
  s.teacher_dim = 7;
  s.student_dim = 6;
  s.seed = 3;
  return s;
}

double mean_square(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc / static_cast<double>(v.size());
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("xmd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("generate shape contract") {
  SyntheticSpec s;
  s.num_classes = 50;
  s.samples_per_class = 20;
  s.shared_dim = 8;
  s.specific_dim = 8;
  s.teacher_dim = 32;
  s.student_dim = 32;
  const PairedDataset ds = generate(s);
  CHECK(ds.size() == 1000);
  CHECK(ds.num_classes == 50);
  std::map<int, int> counts;
  for (const auto& smp : ds.samples) {
    CHECK(smp.x_teacher.size() == 32);
    CHECK(smp.x_student.size() == 32);
    CHECK(smp.noise_sigma >= s.noise_lo);
    CHECK(smp.noise_sigma <= s.noise_hi);
    ++counts[smp.label];
  }
  CHECK(counts.size() == 50);
  for (const auto& [label, n] : counts) CHECK(n == 20);
}

TEST_CASE("generate validates the spec") {
  auto s = small_spec();
  s.teacher_dim = 4;
  CHECK_THROWS_AS(generate(s), ConfigError);
  s = small_spec();
  s.specificity = 1.5;
  CHECK_THROWS_AS(generate(s), ConfigError);
  s = small_spec();
  s.noise_lo = 2.0;
  s.noise_hi = 1.0;
  CHECK_THROWS_AS(generate(s), ConfigError);
  s = small_spec();
  s.specific_dim = 0;
  CHECK_THROWS_AS(generate(s), ConfigError);
}

TEST_CASE("same seed gives byte-identical files") {
  CHECK(encode_dataset(generate(small_spec())) == encode_dataset(generate(small_spec())));
  auto other = small_spec();
  other.seed = 4;
  CHECK(encode_dataset(generate(small_spec())) != encode_dataset(generate(other)));
}

TEST_CASE("benchmark splits") {
  SuiteSpec suite;
  suite.open_classes = 4;
  suite.open_per_class = 3;
  const Benchmark b = generate_benchmark(small_spec(), suite);
  CHECK(b.train.samples == generate(small_spec()).samples);
  CHECK(b.train.num_classes == 10);
  CHECK(b.teacher_pretrain.size() == 6 * 5 * suite.teacher_multiplier);
  CHECK(b.val.size() == 6 * suite.val_per_class);
  CHECK(b.test_open.size() == 12);
  std::set<int> train_labels;
  for (int y : b.train.labels()) train_labels.insert(y);
  for (int y : b.test_open.labels()) {
    CHECK(train_labels.count(y) == 0);
    CHECK(static_cast<std::size_t>(y) < b.test_open.num_classes);
  }
  CHECK(b.test_open.class_groups.size() == 10);
  CHECK(b.val.samples.front().x_teacher != b.train.samples.front().x_teacher);
}

TEST_CASE("pairing shares the latent draw") {
  // With no specific latents and almost no noise both modalities are linear
  // images of the same z, so each pair is far closer than unrelated samples.
  auto s = small_spec();
  s.specificity = 0.0;
  s.noise_lo = s.noise_hi = 1e-9;
  s.teacher_dim = s.student_dim = 6;
  const PairedDataset ds = generate(s);
  std::vector<std::vector<double>> xt, xs;
  for (const auto& smp : ds.samples) {
    xt.push_back(smp.x_teacher);
    xs.push_back(smp.x_student);
  }
  CHECK(oracle::lstsq_residual(xt, xs) < 1e-12);
}

TEST_CASE("rho = 0 makes the student modality linearly predictable") {
  auto s = small_spec();
  s.num_classes = 40;
  s.samples_per_class = 20;
  s.shared_dim = 4;
  s.specific_dim = 4;
  s.teacher_dim = s.student_dim = 16;
  s.noise_lo = s.noise_hi = 0.05;
  auto residual = [](const PairedDataset& ds) {
    std::vector<std::vector<double>> xt, xs;
    for (const auto& smp : ds.samples) {
      xt.push_back(smp.x_teacher);
      xs.push_back(smp.x_student);
    }
    return oracle::lstsq_residual(xt, xs);
  };
  s.specificity = 0.0;
  const double shared = residual(generate(s));
  s.specificity = 0.6;
  const double specific = residual(generate(s));
  const double floor = 0.05 * 0.05;
  CHECK(shared < 3.0 * floor);
  CHECK(specific > 20.0 * shared);
}

TEST_CASE("inject_noise") {
  Rng rng(5);
  std::vector<double> x(32);
  for (double& v : x) v = rng.normal();
  const double p = mean_square(x);
  for (double db : {0.0, 5.0, 10.0, 15.0, -3.0}) {
    const auto y = inject_noise(x, db, rng);
    std::vector<double> n(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) n[i] = y[i] - x[i];
    CHECK(mean_square(n) == doctest::Approx(p / std::pow(10.0, db / 10.0)).epsilon(1e-12));
    CHECK(std::abs(10.0 * std::log10(p / mean_square(n)) - db) < 0.1);
  }
  std::vector<double> big(1024);
  for (double& v : big) v = rng.normal();
  const auto y = inject_noise(big, 10.0, rng);
  std::vector<double> n(big.size());
  for (std::size_t i = 0; i < big.size(); ++i) n[i] = y[i] - big[i];
  CHECK(std::abs(10.0 * std::log10(mean_square(big) / mean_square(n)) - 10.0) < 0.1);

  const std::vector<double> zero(8, 0.0);
  CHECK_THROWS_AS(inject_noise(zero, 10.0, rng), DataError);

  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(inject_noise_rows(t, 5.0, 1) == inject_noise_rows(t, 5.0, 1));
  CHECK_FALSE(inject_noise_rows(t, 5.0, 1) == inject_noise_rows(t, 5.0, 2));
}

TEST_CASE("make_batches") {
  auto s = small_spec();
  s.num_classes = 12;
  s.samples_per_class = 7;
  const PairedDataset ds = generate(s);
  SUBCASE("P=10, K=2") {
    const auto batches = make_batches(ds, {10, 2}, 1);
    CHECK_FALSE(batches.empty());
    std::set<std::size_t> seen;
    for (const auto& batch : batches) {
      CHECK(batch.size() == 20);
      std::map<int, int> per_class;
      for (std::size_t i : batch) {
        ++per_class[ds.samples[i].label];
        CHECK(seen.insert(i).second);
      }
      CHECK(per_class.size() == 10);
      for (const auto& [label, n] : per_class) CHECK(n == 2);
    }
    // 12 classes x 3 chunks = 36 chunks; each batch consumes 10.
    CHECK(batches.size() == 3);
  }
  SUBCASE("deterministic per seed") {
    CHECK(make_batches(ds, {4, 3}, 9) == make_batches(ds, {4, 3}, 9));
    CHECK(make_batches(ds, {4, 3}, 9) != make_batches(ds, {4, 3}, 10));
  }
  SUBCASE("P exceeds the available classes") {
    CHECK_THROWS_AS(make_batches(ds, {13, 2}, 1), ConfigError);
    CHECK_THROWS_AS(make_batches(ds, {2, 8}, 1), ConfigError);
    CHECK_THROWS_AS(make_batches(ds, {0, 2}, 1), ConfigError);
  }
  SUBCASE("gather") {
    const std::vector<std::size_t> idx{3, 0};
    const BatchData b = gather(ds, idx);
    CHECK(b.x_teacher.rows() == 2);
    CHECK(b.x_student.cols() == s.student_dim);
    CHECK(b.labels == std::vector<int>{ds.samples[3].label, ds.samples[0].label});
    CHECK(b.x_teacher.row(0)[0] == ds.samples[3].x_teacher[0]);
  }
}

TEST_CASE("subset_per_class") {
  const PairedDataset ds = generate(small_spec());
  const PairedDataset q = subset_per_class(ds, 0.4);
  CHECK(q.size() == 6 * 2);
  CHECK(q.samples.front() == ds.samples.front());
  CHECK(subset_per_class(ds, 0.01).size() == 6);
  CHECK_THROWS_AS(subset_per_class(ds, 0.0), ConfigError);
}

TEST_CASE("dataset files") {
  const auto dir = temp_dir("dataset");
  const std::string path = (dir / "train.xmdd").string();
  const PairedDataset ds = generate(small_spec());
  save_dataset(ds, path);
  CHECK(std::filesystem::exists(dir / "train.meta.json"));

  SUBCASE("round trip is exact") {
    const PairedDataset back = load_dataset(path);
    CHECK(back == ds);
    CHECK(back.spec.seed == ds.spec.seed);
    CHECK(encode_dataset(back) == encode_dataset(ds));
  }
  SUBCASE("little-endian header") {
    const std::string bytes = read_file(path);
    CHECK(bytes.substr(0, 8) == "XMDDATA1");
    CHECK(static_cast<unsigned char>(bytes[8]) == ds.size());
    CHECK(bytes[9] == 0);
  }
  SUBCASE("truncated file") {
    const std::string bytes = read_file(path);
    write_file(path, bytes.substr(0, bytes.size() - 5));
    try {
      load_dataset(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() > 24);
      CHECK(e.offset() < bytes.size());
    }
  }
  SUBCASE("corrupted magic") {
    std::string bytes = read_file(path);
    bytes[3] = 'X';
    write_file(path, bytes);
    try {
      load_dataset(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
      CHECK(std::string(e.what()).find("XMDDATA1") != std::string::npos);
    }
  }
  SUBCASE("trailing bytes") {
    write_file(path, read_file(path) + "x");
    CHECK_THROWS_AS(load_dataset(path), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_dataset((dir / "nope.xmdd").string()), DataError); }
  std::filesystem::remove_all(dir);
}
