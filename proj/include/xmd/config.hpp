#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xmd/data.hpp"
#include "xmd/eval.hpp"
#include "xmd/json_util.hpp"
#include "xmd/losses.hpp"
#include "xmd/models.hpp"
#include "xmd/optim.hpp"

namespace xmd {

struct TeacherTrainConfig {
  std::vector<std::size_t> hidden{64};
  std::size_t output_dim = 32;
  bool normalize_input = true;
  std::size_t epochs = 30;
  // Fraction of each class of the teacher-pretrain split used (0.25 = weak teacher).
  double data_fraction = 1.0;
};

struct StudentConfig {
  std::vector<std::size_t> hidden{64};
  std::size_t output_dim = 32;
  bool normalize_input = true;
};

struct TrainConfig {
  std::size_t epochs = 30;
  BatchSpec batch{25, 2};
  OptimizerConfig optimizer;
  double lr_decay = 0.75;
  std::size_t lr_decay_every = 3;
  // Fraction of each class of the train split the student sees.
  double student_fraction = 1.0;
};

struct EvalConfig {
  std::size_t max_target = 20000;
  std::size_t max_nontarget = 20000;
  std::vector<double> noise_db{15.0, 10.0, 5.0};
  std::size_t matching_trials = 2000;
  // Views averaged per test sample; views after the first carry light noise.
  std::size_t crops = 1;
  double crop_snr_db = 30.0;
  double p_target = 0.01;
};

struct SweepConfig {
  std::string axis = "margin";
  std::vector<double> values{0, 10, 20, 30, 40, 50};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

/// Everything that determines a run. A resolved config plus the code version
/// fixes all outputs bit-exactly.
struct ExperimentConfig {
  std::string preset = "verification";
  std::uint64_t seed = 1;
  std::string out_dir = "runs/default";
  // When set, splits are loaded from <dir>/<split>.xmdd instead of generated.
  std::string dataset_dir;
  SyntheticSpec data;
  SuiteSpec suite;
  TeacherTrainConfig teacher;
  StudentConfig student;
  TrainConfig train;
  DistillConfig distill;
  EvalConfig eval;
  SweepConfig sweep;

  BundleConfig bundle_config() const;
  EncoderConfig teacher_encoder() const;
  void validate() const;
};

/// Known presets: "verification" (default) and "classification".
json preset_json(const std::string& preset);

json to_json(const ExperimentConfig& cfg);
/// Strict parse of a complete document (as produced by to_json).
ExperimentConfig experiment_config_from_json(const json& j);

/// Recursively overlays `overlay` onto `base`; keys absent from `base` are a
/// ConfigError naming the dotted path.
void merge_json(json& base, const json& overlay, const std::string& path = "");

/// Applies "dotted.path=value". The value is parsed as JSON when possible and
/// taken as a string otherwise.
void apply_override(json& doc, const std::string& assignment);

struct ConfigSources {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

/// Preset defaults <- config file <- --set overrides <- --seed/--out.
/// --seed sets both the run seed and the dataset seed.
ExperimentConfig resolve_config(const ConfigSources& sources);

/// Stable hash of the config with seeds and output location removed; runs
/// that differ only by seed share it.
std::string config_hash(const json& config);

}  // namespace xmd
