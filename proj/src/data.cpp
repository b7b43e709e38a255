#include "xmd/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "xmd/binary_io.hpp"
#include "xmd/error.hpp"

namespace xmd {

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("data.num_classes must be >= 2");
  if (samples_per_class < 1) throw ConfigError("data.samples_per_class must be >= 1");
  if (shared_dim < 1 || specific_dim < 1) throw ConfigError("data.shared_dim and data.specific_dim must be >= 1");
  if (teacher_dim < shared_dim + specific_dim || student_dim < shared_dim + specific_dim) {
    throw ConfigError("data.teacher_dim and data.student_dim must be >= shared_dim + specific_dim");
  }
  if (!(specificity >= 0.0 && specificity <= 1.0)) throw ConfigError("data.specificity must lie in [0, 1]");
  if (!(noise_lo > 0.0 && noise_hi >= noise_lo)) throw ConfigError("data noise range needs 0 < noise_lo <= noise_hi");
  if (!(class_spread >= 0.0)) throw ConfigError("data.class_spread must be >= 0");
  if (!(center_scale > 0.0)) throw ConfigError("data.center_scale must be > 0");
}

json to_json(const SyntheticSpec& s) {
  return json{{"num_classes", s.num_classes},   {"samples_per_class", s.samples_per_class},
              {"shared_dim", s.shared_dim},     {"specific_dim", s.specific_dim},
              {"teacher_dim", s.teacher_dim},   {"student_dim", s.student_dim},
              {"specificity", s.specificity},   {"noise_lo", s.noise_lo},
              {"noise_hi", s.noise_hi},         {"class_spread", s.class_spread},
              {"center_scale", s.center_scale}, {"seed", s.seed}};
}

SyntheticSpec synthetic_spec_from_json(const json& j, SyntheticSpec s) {
  const std::string where = "data";
  reject_unknown_keys(j,
                      {"num_classes", "samples_per_class", "shared_dim", "specific_dim", "teacher_dim", "student_dim",
                       "specificity", "noise_lo", "noise_hi", "class_spread", "center_scale", "seed"},
                      where);
  read_field(j, "num_classes", s.num_classes, where);
  read_field(j, "samples_per_class", s.samples_per_class, where);
  read_field(j, "shared_dim", s.shared_dim, where);
  read_field(j, "specific_dim", s.specific_dim, where);
  read_field(j, "teacher_dim", s.teacher_dim, where);
  read_field(j, "student_dim", s.student_dim, where);
  read_field(j, "specificity", s.specificity, where);
  read_field(j, "noise_lo", s.noise_lo, where);
  read_field(j, "noise_hi", s.noise_hi, where);
  read_field(j, "class_spread", s.class_spread, where);
  read_field(j, "center_scale", s.center_scale, where);
  read_field(j, "seed", s.seed, where);
  return s;
}

json to_json(const SuiteSpec& s) {
  return json{{"val_per_class", s.val_per_class},
              {"test_closed_per_class", s.test_closed_per_class},
              {"open_classes", s.open_classes},
              {"open_per_class", s.open_per_class},
              {"teacher_multiplier", s.teacher_multiplier}};
}

SuiteSpec suite_spec_from_json(const json& j, SuiteSpec s) {
  const std::string where = "suite";
  reject_unknown_keys(
      j, {"val_per_class", "test_closed_per_class", "open_classes", "open_per_class", "teacher_multiplier"}, where);
  read_field(j, "val_per_class", s.val_per_class, where);
  read_field(j, "test_closed_per_class", s.test_closed_per_class, where);
  read_field(j, "open_classes", s.open_classes, where);
  read_field(j, "open_per_class", s.open_per_class, where);
  read_field(j, "teacher_multiplier", s.teacher_multiplier, where);
  return s;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::TeacherPretrain: return "teacher-pretrain";
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::TestClosed: return "test-closed";
    case Split::TestOpen: return "test-open";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  for (Split s : {Split::TeacherPretrain, Split::Train, Split::Val, Split::TestClosed, Split::TestOpen}) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown split: " + name);
}

std::vector<int> PairedDataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<int> PairedDataset::distinct_labels() const {
  std::set<int> seen;
  for (const auto& s : samples) seen.insert(s.label);
  return {seen.begin(), seen.end()};
}

bool operator==(const PairedDataset& a, const PairedDataset& b) {
  return a.split == b.split && a.teacher_dim == b.teacher_dim && a.student_dim == b.student_dim &&
         a.num_classes == b.num_classes && a.samples == b.samples && a.class_groups == b.class_groups;
}

namespace {

class World {
 public:
  World(const SyntheticSpec& spec, std::size_t total_classes) : spec_(spec) {
    spec.validate();
    const std::size_t k = spec.shared_dim;
    centers_.resize(total_classes);
    for (std::size_t c = 0; c < total_classes; ++c) {
      Rng rng(derive_seed(spec.seed, "class-center", c));
      centers_[c].resize(k);
      for (auto& v : centers_[c]) v = spec.center_scale * rng.normal();
    }
    mix_t_ = mixing(spec.teacher_dim, "mix-teacher");
    mix_s_ = mixing(spec.student_dim, "mix-student");
  }

  std::vector<int> groups() const {
    std::vector<int> g;
    for (const auto& z : centers_) g.push_back(z[0] >= 0.0 ? 1 : 0);
    return g;
  }

  PairedDataset sample(Split split, std::size_t first_class, std::size_t last_class, std::size_t per_class) const {
    PairedDataset ds;
    ds.spec = spec_;
    ds.split = split;
    ds.teacher_dim = spec_.teacher_dim;
    ds.student_dim = spec_.student_dim;
    ds.num_classes = centers_.size();
    ds.class_groups = groups();
    const std::string tag = "sample:" + to_string(split);
    const std::size_t k = spec_.shared_dim;
    const std::size_t s = spec_.specific_dim;
    const double rho = std::sqrt(spec_.specificity);
    std::vector<double> lat_t(k + s), lat_s(k + s);
    for (std::size_t c = first_class; c < last_class; ++c) {
      for (std::size_t j = 0; j < per_class; ++j) {
        Rng rng(derive_seed(spec_.seed, tag, c * per_class + j));
        for (std::size_t i = 0; i < k; ++i) {
          lat_t[i] = lat_s[i] = centers_[c][i] + spec_.class_spread * rng.normal();
        }
        for (std::size_t i = 0; i < s; ++i) lat_t[k + i] = rho * rng.normal();
        for (std::size_t i = 0; i < s; ++i) lat_s[k + i] = rho * rng.normal();
        PairedSample smp;
        smp.label = static_cast<int>(c);
        smp.noise_sigma = rng.log_uniform(spec_.noise_lo, spec_.noise_hi);
        smp.x_teacher = observe(mix_t_, lat_t, smp.noise_sigma, rng);
        smp.x_student = observe(mix_s_, lat_s, smp.noise_sigma, rng);
        ds.samples.push_back(std::move(smp));
      }
    }
    return ds;
  }

 private:
  Tensor mixing(std::size_t rows, std::string_view tag) const {
    const std::size_t cols = spec_.shared_dim + spec_.specific_dim;
    Rng rng(derive_seed(spec_.seed, tag));
    Tensor a({rows, cols});
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& v : a.storage()) v = scale * rng.normal();
    return a;
  }

  static std::vector<double> observe(const Tensor& a, const std::vector<double>& latent, double sigma, Rng& rng) {
    std::vector<double> x(a.rows());
    for (std::size_t r = 0; r < x.size(); ++r) {
      double acc = 0.0;
      const auto row = a.row(r);
      for (std::size_t i = 0; i < latent.size(); ++i) acc += row[i] * latent[i];
      x[r] = acc + sigma * rng.normal();
    }
    return x;
  }

  SyntheticSpec spec_;
  std::vector<std::vector<double>> centers_;
  Tensor mix_t_;
  Tensor mix_s_;
};

}  // namespace

PairedDataset generate(const SyntheticSpec& spec) {
  const World world(spec, spec.num_classes);
  return world.sample(Split::Train, 0, spec.num_classes, spec.samples_per_class);
}

Benchmark generate_benchmark(const SyntheticSpec& spec, const SuiteSpec& suite) {
  if (suite.teacher_multiplier < 1) throw ConfigError("suite.teacher_multiplier must be >= 1");
  if (suite.val_per_class < 1 || suite.test_closed_per_class < 1) throw ConfigError("suite split sizes must be >= 1");
  if (suite.open_classes == 1 || (suite.open_classes > 0 && suite.open_per_class < 2)) {
    throw ConfigError("open-set split needs >= 2 classes with >= 2 samples each");
  }
  const std::size_t c = spec.num_classes;
  const World world(spec, c + suite.open_classes);
  Benchmark b;
  b.teacher_pretrain =
      world.sample(Split::TeacherPretrain, 0, c, spec.samples_per_class * suite.teacher_multiplier);
  b.train = world.sample(Split::Train, 0, c, spec.samples_per_class);
  b.val = world.sample(Split::Val, 0, c, suite.val_per_class);
  b.test_closed = world.sample(Split::TestClosed, 0, c, suite.test_closed_per_class);
  b.test_open = world.sample(Split::TestOpen, c, c + suite.open_classes, suite.open_per_class);
  return b;
}

PairedDataset subset_per_class(const PairedDataset& dataset, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("subset fraction must lie in (0, 1]");
  std::map<int, std::size_t> total;
  for (const auto& s : dataset.samples) ++total[s.label];
  std::map<int, std::size_t> kept;
  PairedDataset out = dataset;
  out.samples.clear();
  for (const auto& s : dataset.samples) {
    const auto quota = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * total[s.label])));
    if (kept[s.label]++ < quota) out.samples.push_back(s);
  }
  return out;
}

std::vector<double> inject_noise(std::span<const double> x, double delta_db, Rng& rng) {
  if (x.empty()) throw DataError("cannot inject noise into an empty vector");
  if (!std::isfinite(delta_db)) throw ConfigError("noise level must be finite");
  double p_x = 0.0;
  for (double v : x) p_x += v * v;
  p_x /= static_cast<double>(x.size());
  if (p_x == 0.0) throw DataError("cannot set a signal-to-noise ratio for a zero-power input");
  std::vector<double> n(x.size());
  double p_n = 0.0;
  for (double& v : n) {
    v = rng.normal();
    p_n += v * v;
  }
  p_n /= static_cast<double>(n.size());
  const double target = p_x / std::pow(10.0, delta_db / 10.0);
  const double k = std::sqrt(target / p_n);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + k * n[i];
  return out;
}

Tensor inject_noise_rows(const Tensor& x, double delta_db, std::uint64_t seed) {
  Tensor out = x;
  out.clear_grad();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    Rng rng(derive_seed(seed, "noise-row", r));
    const auto noisy = inject_noise(x.row(r), delta_db, rng);
    std::copy(noisy.begin(), noisy.end(), out.row(r).begin());
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(const PairedDataset& dataset, const BatchSpec& spec,
                                                   std::uint64_t seed) {
  const std::size_t p = spec.classes_per_batch;
  const std::size_t k = spec.samples_per_class;
  if (p == 0 || k == 0) throw ConfigError("batch P and K must be >= 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) by_class[dataset.samples[i].label].push_back(i);

  Rng rng(seed);
  // Per class: shuffled samples cut into K-sized chunks, consumed from the back.
  std::vector<std::vector<std::vector<std::size_t>>> chunks;
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    std::vector<std::vector<std::size_t>> cls;
    for (std::size_t i = 0; i + k <= idx.size(); i += k) cls.emplace_back(idx.begin() + i, idx.begin() + i + k);
    if (!cls.empty()) chunks.push_back(std::move(cls));
  }
  if (chunks.size() < p) {
    throw ConfigError("batch needs " + std::to_string(p) + " classes with >= " + std::to_string(k) +
                      " samples each, dataset has " + std::to_string(chunks.size()));
  }

  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> order(chunks.size());
  std::vector<std::uint64_t> tie(chunks.size());
  while (true) {
    for (auto& t : tie) t = rng.engine()();
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (chunks[a].size() != chunks[b].size()) return chunks[a].size() > chunks[b].size();
      return tie[a] < tie[b];
    });
    if (chunks[order[p - 1]].empty()) break;
    std::vector<std::size_t> batch;
    batch.reserve(p * k);
    for (std::size_t i = 0; i < p; ++i) {
      auto& cls = chunks[order[i]];
      batch.insert(batch.end(), cls.back().begin(), cls.back().end());
      cls.pop_back();
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

BatchData gather(const PairedDataset& dataset, std::span<const std::size_t> indices) {
  BatchData b;
  b.x_teacher = Tensor({indices.size(), dataset.teacher_dim});
  b.x_student = Tensor({indices.size(), dataset.student_dim});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= dataset.samples.size()) throw ConfigError("batch index out of range");
    const auto& s = dataset.samples[indices[r]];
    std::copy(s.x_teacher.begin(), s.x_teacher.end(), b.x_teacher.row(r).begin());
    std::copy(s.x_student.begin(), s.x_student.end(), b.x_student.row(r).begin());
    b.labels.push_back(s.label);
    b.noise_sigma.push_back(s.noise_sigma);
  }
  return b;
}

BatchData gather_all(const PairedDataset& dataset) {
  std::vector<std::size_t> all(dataset.samples.size());
  std::iota(all.begin(), all.end(), 0);
  return gather(dataset, all);
}

std::string encode_dataset(const PairedDataset& dataset) {
  constexpr auto u32_max = std::numeric_limits<std::uint32_t>::max();
  if (dataset.samples.size() > u32_max || dataset.teacher_dim > u32_max || dataset.student_dim > u32_max ||
      dataset.num_classes > u32_max) {
    throw DataError("dataset too large for the XMDDATA1 format");
  }
  ByteWriter w;
  w.put_bytes(kDatasetMagic);
  w.put_u32(static_cast<std::uint32_t>(dataset.samples.size()));
  w.put_u32(static_cast<std::uint32_t>(dataset.teacher_dim));
  w.put_u32(static_cast<std::uint32_t>(dataset.student_dim));
  w.put_u32(static_cast<std::uint32_t>(dataset.num_classes));
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    if (s.x_teacher.size() != dataset.teacher_dim || s.x_student.size() != dataset.student_dim) {
      throw DataError("sample " + std::to_string(i) + " does not match the dataset dimensions");
    }
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= dataset.num_classes) {
      throw DataError("sample " + std::to_string(i) + " has label " + std::to_string(s.label) + " outside [0, " +
                      std::to_string(dataset.num_classes) + ")");
    }
    w.put_u32(static_cast<std::uint32_t>(s.label));
    w.put_f64(s.noise_sigma);
    for (double v : s.x_teacher) w.put_f64(v);
    for (double v : s.x_student) w.put_f64(v);
  }
  return w.take();
}

PairedDataset decode_dataset(std::string_view bytes) {
  if (bytes.size() < kDatasetMagic.size() || bytes.substr(0, kDatasetMagic.size()) != kDatasetMagic) {
    throw FormatError("not a dataset file: expected magic " + std::string(kDatasetMagic), 0);
  }
  ByteReader r(bytes, "dataset");
  r.get_bytes(kDatasetMagic.size());
  PairedDataset ds;
  const std::uint32_t n = r.get_u32();
  ds.teacher_dim = r.get_u32();
  ds.student_dim = r.get_u32();
  ds.num_classes = r.get_u32();
  ds.spec.teacher_dim = ds.teacher_dim;
  ds.spec.student_dim = ds.student_dim;
  for (std::uint32_t i = 0; i < n; ++i) {
    PairedSample s;
    const std::size_t at = r.offset();
    const std::uint32_t label = r.get_u32();
    if (label >= ds.num_classes) {
      throw FormatError("label " + std::to_string(label) + " outside [0, " + std::to_string(ds.num_classes) + ")", at);
    }
    s.label = static_cast<int>(label);
    s.noise_sigma = r.get_f64();
    s.x_teacher.resize(ds.teacher_dim);
    s.x_student.resize(ds.student_dim);
    for (double& v : s.x_teacher) v = r.get_f64();
    for (double& v : s.x_student) v = r.get_f64();
    for (double v : s.x_teacher) {
      if (!std::isfinite(v)) throw FormatError("non-finite feature in sample " + std::to_string(i), at);
    }
    for (double v : s.x_student) {
      if (!std::isfinite(v)) throw FormatError("non-finite feature in sample " + std::to_string(i), at);
    }
    ds.samples.push_back(std::move(s));
  }
  if (!r.at_end()) throw FormatError(std::to_string(r.remaining()) + " trailing bytes after dataset", r.offset());
  return ds;
}

std::string dataset_meta_path(const std::string& path) {
  std::filesystem::path p(path);
  p.replace_extension();
  return p.string() + ".meta.json";
}

void save_dataset(const PairedDataset& dataset, const std::string& path) {
  write_file(path, encode_dataset(dataset));
  json meta{{"format", std::string(kDatasetMagic)},
            {"split", to_string(dataset.split)},
            {"num_samples", dataset.samples.size()},
            {"spec", to_json(dataset.spec)},
            {"class_groups", dataset.class_groups}};
  write_file(dataset_meta_path(path), meta.dump(2) + "\n");
}

PairedDataset load_dataset(const std::string& path) {
  PairedDataset ds = decode_dataset(read_file(path));
  const std::string meta_path = dataset_meta_path(path);
  if (!std::filesystem::exists(meta_path)) return ds;
  json meta;
  try {
    meta = json::parse(read_file(meta_path));
  } catch (const json::parse_error& e) {
    throw DataError("malformed dataset metadata " + meta_path + ": " + e.what());
  }
  try {
    if (meta.contains("split")) ds.split = split_from_string(meta.at("split").get<std::string>());
    if (meta.contains("spec")) ds.spec = synthetic_spec_from_json(meta.at("spec"));
    if (meta.contains("class_groups")) ds.class_groups = meta.at("class_groups").get<std::vector<int>>();
  } catch (const std::exception& e) {
    throw DataError("invalid dataset metadata " + meta_path + ": " + e.what());
  }
  if (!ds.class_groups.empty() && ds.class_groups.size() != ds.num_classes) {
    throw DataError("dataset metadata lists " + std::to_string(ds.class_groups.size()) + " class groups for " +
                    std::to_string(ds.num_classes) + " classes");
  }
  return ds;
}

}  // namespace xmd
