#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "xmd/config.hpp"
#include "xmd/data.hpp"
#include "xmd/eval.hpp"
#include "xmd/models.hpp"

namespace xmd {

/// Append-only JSONL writer; a default-constructed log discards records.
class RunLog {
 public:
  RunLog() = default;
  /// Truncates `path`.
  explicit RunLog(const std::string& path);

  void write(const json& record);
  bool enabled() const noexcept { return out_.has_value(); }

 private:
  std::optional<std::ofstream> out_;
};

/// Generates the benchmark from the inline spec, or loads every split from
/// `dataset_dir/<split>.xmdd` when set (dims must match the config).
Benchmark load_benchmark(const ExperimentConfig& cfg);
/// Writes every split to `dir/<split>.xmdd` plus sidecars.
void save_benchmark(const Benchmark& bench, const std::string& dir);

struct TeacherResult {
  ParamSet params;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

/// CE pretraining of the teacher encoder with its own classifier on the
/// teacher-pretrain split (cut to teacher.data_fraction per class).
TeacherResult train_teacher(const ExperimentConfig& cfg, const Benchmark& bench, RunLog* log = nullptr);

struct DistillResult {
  ModelBundle bundle;
  std::vector<double> loss_trace;  // mean total loss per epoch
  std::vector<json> epochs;
};

/// Student training for cfg.distill.mode. On a non-finite loss or parameter
/// the pre-step parameters are saved to `last_good_path` (when non-empty) and
/// NumericError is thrown.
DistillResult distill_train(const ExperimentConfig& cfg, const Benchmark& bench, const ParamSet& teacher,
                            RunLog* log = nullptr, const std::string& last_good_path = "");

/// Student embeddings averaged over eval.crops views.
Tensor eval_embeddings(const ExperimentConfig& cfg, const ModelBundle& bundle, const Tensor& x_student);

MetricsReport evaluate(const ExperimentConfig& cfg, const Benchmark& bench, const ModelBundle& bundle,
                       const std::string& run_id, std::vector<double> loss_trace = {});

/// Writes `dir/config.resolved.json`, creating `dir`.
void write_resolved_config(const ExperimentConfig& cfg, const std::string& dir);

/// Full run into cfg.out_dir: resolved config, teacher (trained unless
/// `teacher_checkpoint` is given), log.jsonl, student.ckpt, metrics.json and
/// metrics.csv.
MetricsReport run_distill(const ExperimentConfig& cfg, const std::string& teacher_checkpoint = "");

/// Applies one sweep axis value ("alpha", "margin", "beta" or "h") to a config.
void apply_sweep_value(ExperimentConfig& cfg, const std::string& axis, double value);

struct SweepOutcome {
  std::string csv;
  std::size_t failures = 0;
};

/// One run per value per seed under cfg.out_dir, runs executed sequentially.
/// A failing run is recorded and the sweep continues. Writes sweep.csv.
SweepOutcome run_sweep(const ExperimentConfig& cfg);

struct ReportSummary {
  std::string markdown;
  std::string csv;
  std::size_t runs = 0;
  std::size_t groups = 0;
  std::size_t warnings = 0;
};

/// Aggregates the metrics records of every log.jsonl under `dir`, grouped by
/// config hash. Reads only; throws DataError("no runs found") when empty.
ReportSummary build_report(const std::string& dir);

}  // namespace xmd
