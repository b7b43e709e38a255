#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmd/json_util.hpp"
#include "xmd/random.hpp"
#include "xmd/tensor.hpp"

namespace xmd {

/// Linear-Gaussian paired-modality generator.
///
/// Each class c has a centre z_c in R^k. A sample draws z = z_c + spread * N(0, I),
/// independent modality-specific latents s_T, s_S in R^s, and one noise level
/// sigma (log-uniform in [noise_lo, noise_hi]); then
///   x_T = A_T [z; sqrt(rho) s_T] + sigma * N(0, I)
///   x_S = A_S [z; sqrt(rho) s_S] + sigma * N(0, I)
/// with seeded mixing matrices A_T (d_T x (k+s)) and A_S (d_S x (k+s)).
struct SyntheticSpec {
  std::size_t num_classes = 100;
  std::size_t samples_per_class = 40;
  std::size_t shared_dim = 8;
  std::size_t specific_dim = 8;
  std::size_t teacher_dim = 32;
  std::size_t student_dim = 32;
  double specificity = 0.6;
  double noise_lo = 0.1;
  double noise_hi = 1.0;
  double class_spread = 0.5;
  double center_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

json to_json(const SyntheticSpec& spec);
/// Overlays keys of j onto `base`; unknown keys raise ConfigError.
SyntheticSpec synthetic_spec_from_json(const json& j, SyntheticSpec base = {});

/// Sizes of the remaining splits of a benchmark built around a SyntheticSpec.
struct SuiteSpec {
  std::size_t val_per_class = 10;
  std::size_t test_closed_per_class = 10;
  std::size_t open_classes = 20;
  std::size_t open_per_class = 20;
  std::size_t teacher_multiplier = 4;
};

json to_json(const SuiteSpec& suite);
SuiteSpec suite_spec_from_json(const json& j, SuiteSpec base = {});

enum class Split { TeacherPretrain, Train, Val, TestClosed, TestOpen };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct PairedSample {
  std::vector<double> x_teacher;
  std::vector<double> x_student;
  int label = 0;
  // Generative noise level; ground-truth quality kept for diagnostics.
  double noise_sigma = 0.0;

  friend bool operator==(const PairedSample&, const PairedSample&) = default;
};

struct PairedDataset {
  SyntheticSpec spec;
  Split split = Split::Train;
  std::size_t teacher_dim = 0;
  std::size_t student_dim = 0;
  // Size of the label space; every label is < num_classes.
  std::size_t num_classes = 0;
  std::vector<PairedSample> samples;
  // Nuisance group per label (sign of the first shared coordinate of the
  // class centre). Empty when unknown.
  std::vector<int> class_groups;

  std::size_t size() const noexcept { return samples.size(); }
  std::vector<int> labels() const;
  std::vector<int> distinct_labels() const;
  friend bool operator==(const PairedDataset& a, const PairedDataset& b);
};

struct Benchmark {
  PairedDataset teacher_pretrain;
  PairedDataset train;
  PairedDataset val;
  PairedDataset test_closed;
  PairedDataset test_open;
};

/// The training split for `spec` (num_classes x samples_per_class pairs).
PairedDataset generate(const SyntheticSpec& spec);
/// All five splits. Training classes are 0..num_classes-1; open-set classes
/// follow and never appear in the other splits.
Benchmark generate_benchmark(const SyntheticSpec& spec, const SuiteSpec& suite);

/// Keeps the first max(1, floor(fraction * n_c)) samples of each class.
PairedDataset subset_per_class(const PairedDataset& dataset, double fraction);

/// x plus Gaussian noise rescaled so that 10 log10(P_x / P_noise) == delta_db,
/// with P the mean square of the entries.
std::vector<double> inject_noise(std::span<const double> x, double delta_db, Rng& rng);
/// Row-wise inject_noise with per-row streams derived from `seed`.
Tensor inject_noise_rows(const Tensor& x, double delta_db, std::uint64_t seed);

struct BatchSpec {
  std::size_t classes_per_batch = 20;  // P
  std::size_t samples_per_class = 2;   // K
};

struct BatchData {
  Tensor x_teacher;
  Tensor x_student;
  std::vector<int> labels;
  std::vector<double> noise_sigma;
};

/// One epoch of class-balanced batches (P classes x K samples, indices into
/// the dataset). Each sample appears at most once; leftovers are dropped.
std::vector<std::vector<std::size_t>> make_batches(const PairedDataset& dataset, const BatchSpec& spec,
                                                   std::uint64_t seed);
BatchData gather(const PairedDataset& dataset, std::span<const std::size_t> indices);
BatchData gather_all(const PairedDataset& dataset);

// Binary format (little-endian):
//   "XMDDATA1", u32 num_samples, u32 d_T, u32 d_S, u32 num_classes,
//   per sample: u32 label, f64 noise_sigma, d_T x f64, d_S x f64.
// A sidecar "<stem>.meta.json" records the split and generation parameters.
inline constexpr std::string_view kDatasetMagic = "XMDDATA1";

std::string encode_dataset(const PairedDataset& dataset);
PairedDataset decode_dataset(std::string_view bytes);
std::string dataset_meta_path(const std::string& path);
void save_dataset(const PairedDataset& dataset, const std::string& path);
PairedDataset load_dataset(const std::string& path);

}  // namespace xmd
