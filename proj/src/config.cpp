#include "xmd/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "xmd/error.hpp"

namespace xmd {

namespace {

json to_json(const OptimizerConfig& o) {
  return json{{"kind", to_string(o.kind)},     {"learning_rate", o.learning_rate}, {"momentum", o.momentum},
              {"beta1", o.beta1},              {"beta2", o.beta2},                 {"epsilon", o.epsilon},
              {"weight_decay", o.weight_decay}};
}

OptimizerConfig optimizer_from_json(const json& j, OptimizerConfig o, const std::string& where) {
  reject_unknown_keys(j, {"kind", "learning_rate", "momentum", "beta1", "beta2", "epsilon", "weight_decay"}, where);
  std::string kind = to_string(o.kind);
  read_field(j, "kind", kind, where);
  o.kind = optimizer_kind_from_string(kind);
  read_field(j, "learning_rate", o.learning_rate, where);
  read_field(j, "momentum", o.momentum, where);
  read_field(j, "beta1", o.beta1, where);
  read_field(j, "beta2", o.beta2, where);
  read_field(j, "epsilon", o.epsilon, where);
  read_field(j, "weight_decay", o.weight_decay, where);
  return o;
}

json to_json(const QualityConfig& q) {
  return json{{"enabled", q.enabled},
              {"w_base", q.w_base},
              {"h", q.h},
              {"ema_decay", q.ema_decay},
              {"source", to_string(q.source)}};
}

QualityConfig quality_from_json(const json& j, QualityConfig q) {
  const std::string where = "distill.quality";
  reject_unknown_keys(j, {"enabled", "w_base", "h", "ema_decay", "source"}, where);
  read_field(j, "enabled", q.enabled, where);
  read_field(j, "w_base", q.w_base, where);
  read_field(j, "h", q.h, where);
  read_field(j, "ema_decay", q.ema_decay, where);
  std::string source = to_string(q.source);
  read_field(j, "source", source, where);
  q.source = quality_source_from_string(source);
  return q;
}

json to_json(const DistillConfig& d) {
  return json{{"mode", to_string(d.mode)},
              {"metric", to_string(d.metric)},
              {"margin_deg", d.margin_deg},
              {"margin_l2", d.margin_l2},
              {"alpha", d.alpha},
              {"beta", d.beta},
              {"temperature", d.temperature},
              {"lambda", d.lambda},
              {"normalize_features", d.normalize_features},
              {"quality", to_json(d.quality)}};
}

DistillConfig distill_from_json(const json& j, DistillConfig d) {
  const std::string where = "distill";
  reject_unknown_keys(j,
                      {"mode", "metric", "margin_deg", "margin_l2", "alpha", "beta", "temperature", "lambda",
                       "normalize_features", "quality"},
                      where);
  std::string mode = to_string(d.mode), metric = to_string(d.metric);
  read_field(j, "mode", mode, where);
  read_field(j, "metric", metric, where);
  d.mode = distill_mode_from_string(mode);
  d.metric = distance_metric_from_string(metric);
  read_field(j, "margin_deg", d.margin_deg, where);
  read_field(j, "margin_l2", d.margin_l2, where);
  read_field(j, "alpha", d.alpha, where);
  read_field(j, "beta", d.beta, where);
  read_field(j, "temperature", d.temperature, where);
  read_field(j, "lambda", d.lambda, where);
  read_field(j, "normalize_features", d.normalize_features, where);
  if (const auto it = j.find("quality"); it != j.end()) d.quality = quality_from_json(*it, d.quality);
  return d;
}

json to_json(const BatchSpec& b) {
  return json{{"classes_per_batch", b.classes_per_batch}, {"samples_per_class", b.samples_per_class}};
}

BatchSpec batch_from_json(const json& j, BatchSpec b) {
  const std::string where = "train.batch";
  reject_unknown_keys(j, {"classes_per_batch", "samples_per_class"}, where);
  read_field(j, "classes_per_batch", b.classes_per_batch, where);
  read_field(j, "samples_per_class", b.samples_per_class, where);
  return b;
}

json to_json(const TeacherTrainConfig& t) {
  return json{{"hidden", t.hidden},
              {"output_dim", t.output_dim},
              {"normalize_input", t.normalize_input},
              {"epochs", t.epochs},
              {"data_fraction", t.data_fraction}};
}

TeacherTrainConfig teacher_from_json(const json& j, TeacherTrainConfig t) {
  const std::string where = "teacher";
  reject_unknown_keys(j, {"hidden", "output_dim", "normalize_input", "epochs", "data_fraction"}, where);
  read_field(j, "hidden", t.hidden, where);
  read_field(j, "output_dim", t.output_dim, where);
  read_field(j, "normalize_input", t.normalize_input, where);
  read_field(j, "epochs", t.epochs, where);
  read_field(j, "data_fraction", t.data_fraction, where);
  return t;
}

json to_json(const StudentConfig& s) {
  return json{{"hidden", s.hidden}, {"output_dim", s.output_dim}, {"normalize_input", s.normalize_input}};
}

StudentConfig student_from_json(const json& j, StudentConfig s) {
  const std::string where = "student";
  reject_unknown_keys(j, {"hidden", "output_dim", "normalize_input"}, where);
  read_field(j, "hidden", s.hidden, where);
  read_field(j, "output_dim", s.output_dim, where);
  read_field(j, "normalize_input", s.normalize_input, where);
  return s;
}

json to_json(const TrainConfig& t) {
  return json{{"epochs", t.epochs},
              {"batch", to_json(t.batch)},
              {"optimizer", to_json(t.optimizer)},
              {"lr_decay", t.lr_decay},
              {"lr_decay_every", t.lr_decay_every},
              {"student_fraction", t.student_fraction}};
}

TrainConfig train_from_json(const json& j, TrainConfig t) {
  const std::string where = "train";
  reject_unknown_keys(j, {"epochs", "batch", "optimizer", "lr_decay", "lr_decay_every", "student_fraction"}, where);
  read_field(j, "epochs", t.epochs, where);
  if (const auto it = j.find("batch"); it != j.end()) t.batch = batch_from_json(*it, t.batch);
  if (const auto it = j.find("optimizer"); it != j.end()) {
    t.optimizer = optimizer_from_json(*it, t.optimizer, "train.optimizer");
  }
  read_field(j, "lr_decay", t.lr_decay, where);
  read_field(j, "lr_decay_every", t.lr_decay_every, where);
  read_field(j, "student_fraction", t.student_fraction, where);
  return t;
}

json to_json(const EvalConfig& e) {
  return json{{"max_target", e.max_target},   {"max_nontarget", e.max_nontarget},
              {"noise_db", e.noise_db},       {"matching_trials", e.matching_trials},
              {"crops", e.crops},             {"crop_snr_db", e.crop_snr_db},
              {"p_target", e.p_target}};
}

EvalConfig eval_from_json(const json& j, EvalConfig e) {
  const std::string where = "eval";
  reject_unknown_keys(
      j, {"max_target", "max_nontarget", "noise_db", "matching_trials", "crops", "crop_snr_db", "p_target"}, where);
  read_field(j, "max_target", e.max_target, where);
  read_field(j, "max_nontarget", e.max_nontarget, where);
  read_field(j, "noise_db", e.noise_db, where);
  read_field(j, "matching_trials", e.matching_trials, where);
  read_field(j, "crops", e.crops, where);
  read_field(j, "crop_snr_db", e.crop_snr_db, where);
  read_field(j, "p_target", e.p_target, where);
  return e;
}

json to_json(const SweepConfig& s) { return json{{"axis", s.axis}, {"values", s.values}, {"seeds", s.seeds}}; }

SweepConfig sweep_from_json(const json& j, SweepConfig s) {
  const std::string where = "sweep";
  reject_unknown_keys(j, {"axis", "values", "seeds"}, where);
  read_field(j, "axis", s.axis, where);
  read_field(j, "values", s.values, where);
  read_field(j, "seeds", s.seeds, where);
  return s;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

EncoderConfig ExperimentConfig::teacher_encoder() const {
  return EncoderConfig{data.teacher_dim, teacher.hidden, teacher.output_dim, teacher.normalize_input};
}

BundleConfig ExperimentConfig::bundle_config() const {
  BundleConfig b;
  b.teacher = teacher_encoder();
  b.student = EncoderConfig{data.student_dim, student.hidden, student.output_dim, student.normalize_input};
  b.num_classes = data.num_classes;
  b.alpha = distill.alpha;
  return b;
}

void ExperimentConfig::validate() const {
  if (preset != "verification" && preset != "classification") throw ConfigError("unknown preset: " + preset);
  data.validate();
  teacher_encoder().validate("teacher");
  bundle_config().student.validate("student");
  distill.validate();
  if (train.epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (teacher.epochs == 0) throw ConfigError("teacher.epochs must be >= 1");
  if (train.batch.classes_per_batch < 2 || train.batch.samples_per_class < 1) {
    throw ConfigError("train.batch needs classes_per_batch >= 2 and samples_per_class >= 1");
  }
  if (!(train.lr_decay > 0.0 && train.lr_decay <= 1.0)) throw ConfigError("train.lr_decay must lie in (0, 1]");
  if (train.lr_decay_every == 0) throw ConfigError("train.lr_decay_every must be >= 1");
  if (!(train.student_fraction > 0.0 && train.student_fraction <= 1.0)) {
    throw ConfigError("train.student_fraction must lie in (0, 1]");
  }
  if (!(teacher.data_fraction > 0.0 && teacher.data_fraction <= 1.0)) {
    throw ConfigError("teacher.data_fraction must lie in (0, 1]");
  }
  if (eval.max_target == 0 || eval.max_nontarget == 0) throw ConfigError("eval trial caps must be >= 1");
  if (eval.matching_trials == 0) throw ConfigError("eval.matching_trials must be >= 1");
  if (eval.crops == 0) throw ConfigError("eval.crops must be >= 1");
  if (!(eval.p_target > 0.0 && eval.p_target < 1.0)) throw ConfigError("eval.p_target must lie in (0, 1)");
  for (double db : eval.noise_db) {
    if (!std::isfinite(db)) throw ConfigError("eval.noise_db entries must be finite");
  }
  if (suite.teacher_multiplier == 0) throw ConfigError("suite.teacher_multiplier must be >= 1");
  if (suite.open_classes < 2 || suite.open_per_class < 2) {
    throw ConfigError("suite needs >= 2 open classes with >= 2 samples each");
  }
  if (suite.val_per_class < 1 || suite.test_closed_per_class < 1) {
    throw ConfigError("suite.val_per_class and suite.test_closed_per_class must be >= 1");
  }
}

json to_json(const ExperimentConfig& c) {
  return json{{"preset", c.preset},
              {"seed", c.seed},
              {"out_dir", c.out_dir},
              {"dataset_dir", c.dataset_dir},
              {"data", to_json(c.data)},
              {"suite", to_json(c.suite)},
              {"teacher", to_json(c.teacher)},
              {"student", to_json(c.student)},
              {"train", to_json(c.train)},
              {"distill", to_json(c.distill)},
              {"eval", to_json(c.eval)},
              {"sweep", to_json(c.sweep)}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  const std::string where = "config";
  reject_unknown_keys(j,
                      {"preset", "seed", "out_dir", "dataset_dir", "data", "suite", "teacher", "student", "train",
                       "distill", "eval", "sweep"},
                      where);
  ExperimentConfig c;
  read_field(j, "preset", c.preset, where);
  read_field(j, "seed", c.seed, where);
  read_field(j, "out_dir", c.out_dir, where);
  read_field(j, "dataset_dir", c.dataset_dir, where);
  if (const auto it = j.find("data"); it != j.end()) c.data = synthetic_spec_from_json(*it, c.data);
  if (const auto it = j.find("suite"); it != j.end()) c.suite = suite_spec_from_json(*it, c.suite);
  if (const auto it = j.find("teacher"); it != j.end()) c.teacher = teacher_from_json(*it, c.teacher);
  if (const auto it = j.find("student"); it != j.end()) c.student = student_from_json(*it, c.student);
  if (const auto it = j.find("train"); it != j.end()) c.train = train_from_json(*it, c.train);
  if (const auto it = j.find("distill"); it != j.end()) c.distill = distill_from_json(*it, c.distill);
  if (const auto it = j.find("eval"); it != j.end()) c.eval = eval_from_json(*it, c.eval);
  if (const auto it = j.find("sweep"); it != j.end()) c.sweep = sweep_from_json(*it, c.sweep);
  c.validate();
  return c;
}

json preset_json(const std::string& preset) {
  ExperimentConfig c;
  c.preset = preset;
  if (preset == "verification") {
    c.train.optimizer.kind = OptimizerKind::Adam;
    c.train.optimizer.learning_rate = 1e-3;
    // Calibrated benchmark: the teacher modality must carry enough signal for
    // a visibly stronger teacher (val accuracy ~0.91 vs ~0.87 undistilled).
    c.data.shared_dim = 16;
    c.data.specific_dim = 16;
    c.data.teacher_dim = 64;
    c.data.student_dim = 64;
    c.data.class_spread = 0.6;
    c.teacher.hidden = {128};
    c.student.hidden = {128};
    c.train.batch.classes_per_batch = 10;
    // Margin on raw (unnormalized) features, so it is in feature-scale units.
    c.distill.metric = DistanceMetric::SqL2Mean;
    c.distill.normalize_features = false;
    c.distill.margin_l2 = 1.0;
    c.sweep.values = {0, 0.5, 1, 2, 4, 8};
  } else if (preset == "classification") {
    c.train.optimizer.kind = OptimizerKind::SgdMomentum;
    c.train.optimizer.learning_rate = 0.05;
    c.train.optimizer.momentum = 0.9;
    c.distill.metric = DistanceMetric::SqL2Mean;
    c.distill.beta = 1.0;
    c.sweep.values = {0, 0.01, 0.04, 0.09, 0.16};
  } else {
    throw ConfigError("unknown preset: " + preset);
  }
  return to_json(c);
}

void merge_json(json& base, const json& overlay, const std::string& path) {
  if (!overlay.is_object()) throw ConfigError((path.empty() ? std::string("config") : path) + " must be a JSON object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string dotted = path.empty() ? key : path + "." + key;
    const auto it = base.find(key);
    if (it == base.end()) throw ConfigError("unknown configuration key: " + dotted);
    if (it->is_object()) {
      merge_json(*it, value, dotted);
    } else {
      *it = value;
    }
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("unknown configuration key: " + path);
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) {
    merge_json(*node, value, path);
  } else {
    *node = std::move(value);
  }
}

ExperimentConfig resolve_config(const ConfigSources& sources) {
  json file = json::object();
  if (!sources.config_path.empty()) {
    file = json::parse(read_text(sources.config_path), nullptr, false);
    if (file.is_discarded() || !file.is_object()) {
      throw ConfigError("config file is not a JSON object: " + sources.config_path);
    }
  }
  // The preset picks the defaults, so it is resolved before anything else.
  std::string preset = file.value("preset", std::string("verification"));
  for (const auto& s : sources.overrides) {
    if (s.starts_with("preset=")) preset = s.substr(7);
  }
  json doc = preset_json(preset);
  merge_json(doc, file);
  for (const auto& s : sources.overrides) apply_override(doc, s);
  doc["preset"] = preset;
  if (sources.seed) {
    doc["seed"] = *sources.seed;
    doc["data"]["seed"] = *sources.seed;
  }
  if (sources.out_dir) doc["out_dir"] = *sources.out_dir;
  return experiment_config_from_json(doc);
}

std::string config_hash(const json& config) {
  json j = config;
  j.erase("seed");
  j.erase("out_dir");
  j.erase("sweep");
  if (j.contains("data") && j["data"].is_object()) j["data"].erase("seed");
  // FNV-1a over the canonical (sorted-key) dump.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
  return out;
}

}  // namespace xmd
